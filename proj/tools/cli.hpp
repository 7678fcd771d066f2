#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fraclap::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kNotConverged = 2, kIo = 3 };

/// Runs the command line `args` (args[0] is the program name). Regular output
/// goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "256,512,1024" or "5..10" (inclusive range), or a mix: "5..7,10".
std::vector<long> parse_int_list(const std::string& text);
std::vector<double> parse_real_list(const std::string& text);

}  // namespace fraclap::cli
