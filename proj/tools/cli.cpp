#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "fraclap/design.hpp"
#include "fraclap/errors.hpp"
#include "fraclap/solver.hpp"
#include "fraclap/tensor_io.hpp"

namespace fraclap::cli {

namespace {

/// File system failure; maps to exit code 3.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solve finished without meeting the tolerance; exit code 2.
class NotConverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class F>
auto guard_io(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const InvalidArgument&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(trim(item));
  return parts;
}

long to_long(const std::string& s) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(s, &pos);
  } catch (const std::exception&) {
    throw InvalidArgument("not an integer: '" + s + "'");
  }
  if (pos != s.size()) throw InvalidArgument("not an integer: '" + s + "'");
  return v;
}

double to_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw InvalidArgument("not a number: '" + s + "'");
  }
  if (pos != s.size()) throw InvalidArgument("not a number: '" + s + "'");
  return v;
}

// Flat key=value file turned into "--key=value" tokens.
std::vector<std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::vector<std::string> tokens;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    while (!key.empty() && key.front() == '-') key.erase(key.begin());
    if (key.empty()) throw InvalidArgument(path + ":" + std::to_string(lineno) + ": empty key");
    tokens.push_back("--" + key + "=" + trim(line.substr(eq + 1)));
  }
  return tokens;
}

unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FRACLAP_THREADS")) {
    const long v = to_long(env);
    if (v < 1) throw InvalidArgument("FRACLAP_THREADS must be >= 1");
    n = std::min<unsigned>(n, static_cast<unsigned>(v));
  }
  return n;
}

// Runs fn(0..count-1) on up to worker_count() threads. The first exception
// is rethrown after all workers stop.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

Aggregation parse_aggregation(const std::string& tag) {
  if (tag == "sum-then-power") return Aggregation::SumThenPower;
  if (tag == "power-then-sum") return Aggregation::PowerThenSum;
  throw InvalidArgument("unknown aggregation '" + tag + "' (sum-then-power or power-then-sum)");
}

void check_d(int d) {
  if (d != 2 && d != 3) throw InvalidArgument("--d must be 2 or 3");
}

void check_n(long n) {
  if (n < 1) throw InvalidArgument("grid size must be >= 1");
}

// Output sink: a file when a path is given, `fallback` otherwise.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw IoError("cannot open '" + path + "' for writing");
      os_ = &file_;
    }
  }
  std::ostream& stream() { return *os_; }
  void finish() {
    os_->flush();
    if (!*os_) throw IoError("write failed");
  }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

DesignFunction design_from(const std::string& tag, double center, double width, std::uint64_t seed) {
  DesignFunction f;
  f.kind = parse_design_kind(tag);
  if (f.kind == DesignKind::CustomSeparable) {
    throw InvalidArgument("custom-separable designs are library-only; pick another --rhs");
  }
  f.center = center;
  f.width = width;
  f.seed = seed;
  return f;
}

// Leading r terms of a core whose weights are sorted by decreasing magnitude.
LowRankOperator leading_terms(const LowRankOperator& op, Index r) {
  const CpTensor& c = op.diag().core;
  if (r >= c.rank()) return op;
  std::vector<MatrixXd> f;
  for (const auto& m : c.factors()) f.push_back(m.leftCols(r));
  DiagOpFunction d = op.diag();
  d.core = CpTensor(c.weights().head(r), std::move(f));
  return LowRankOperator(std::move(d));
}

// System whose preconditioner carries the given table label.
CoreKind system_for_label(const std::string& label) {
  if (label == "g1") return CoreKind::Power;
  if (label == "g4") return CoreKind::State;
  if (label == "g3") return CoreKind::G2;
  throw InvalidArgument("--kinds accepts g1, g4 and g3 (preconditioner labels), got '" + label + "'");
}

std::string fmt(double v, int digits = 6) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

struct Common {
  std::uint64_t seed = 20240917;
  double alpha = 0.5;
  int d = 2;
  std::string aggregation = "sum-then-power";
};

// ---------------------------------------------------------------- build-core

struct BuildCoreArgs {
  Common c;
  std::string kind;
  long n = 0;
  std::string method;
  double eps = 1e-10;
  std::optional<long> max_rank;
  std::optional<long> tucker_rank;
  std::optional<int> sinc_m;
  std::string spectrum = "laplacian";
  std::optional<double> spectrum_value;
  std::string out_path;
};

int cmd_build_core(const BuildCoreArgs& a, std::ostream& out) {
  check_d(a.c.d);
  check_n(a.n);
  CoreFunctionKind kind;
  kind.tag = parse_core_kind(a.kind);
  if (kind.tag != CoreKind::G1 && kind.tag != CoreKind::G2 && kind.tag != CoreKind::G3 && kind.tag != CoreKind::G4) {
    throw InvalidArgument("--kind must be one of g1, g2, g3, g4");
  }
  kind.alpha = a.c.alpha;
  kind.aggregation = parse_aggregation(a.c.aggregation);
  kind.validate();
  const CoreMethod method = a.method.empty() ? default_method(a.c.d) : parse_core_method(a.method);

  EigenSpectrum spectrum = EigenSpectrum::laplacian(a.c.d, a.n);
  if (a.spectrum == "constant") {
    const double v = a.spectrum_value.value_or(1.0 / a.c.d);
    if (!(v > 0.0)) throw InvalidArgument("--spectrum-value must be positive");
    std::vector<Mode1D> modes;
    for (int l = 0; l < a.c.d; ++l) modes.push_back(spectrum.mode(l).with_eigenvalues(VectorXd::Constant(a.n, v)));
    spectrum = EigenSpectrum(std::move(modes));
  } else if (a.spectrum != "laplacian") {
    throw InvalidArgument("--spectrum must be laplacian or constant");
  } else if (a.spectrum_value) {
    throw InvalidArgument("--spectrum-value needs --spectrum constant");
  }

  CoreBuildOptions options;
  options.seed = a.c.seed;
  if (a.sinc_m) {
    if (method != CoreMethod::Sinc) throw InvalidArgument("--sinc-m needs --method sinc");
    options.sinc_m = *a.sinc_m;
  }
  if (a.tucker_rank) {
    if (method != CoreMethod::MultigridTucker) throw InvalidArgument("--tucker-rank needs --method mg-tucker");
    if (*a.tucker_rank < 1) throw InvalidArgument("--tucker-rank must be >= 1");
    options.tucker_rank = *a.tucker_rank;
  }
  if (a.max_rank && *a.max_rank < 1) throw InvalidArgument("--max-rank must be >= 1");
  const TruncationSpec spec =
      TruncationSpec::relative(a.eps, a.max_rank ? std::optional<Index>(*a.max_rank) : std::nullopt);

  const DiagOpFunction op = build_core(kind, spectrum, spec, method, options);
  const CoreError err = core_error(kind, spectrum, op.core, a.c.seed);
  guard_io([&] {
    save_diag_op(a.out_path, op);
    return 0;
  });
  out << "rank=" << op.core.rank() << " frobenius_error=" << fmt(err.frobenius)
      << " max_relative_error=" << fmt(err.max_relative) << (err.exact ? "" : " (sampled)") << '\n';
  return kOk;
}

// --------------------------------------------------------------------- solve

struct SolveArgs {
  Common c;
  long n = 0;
  double beta = 1.0;
  double gamma = 1.0;
  std::string rhs = "gaussian-bump";
  double rhs_center = 0.5;
  double rhs_width = 0.1;
  long precond_rank = 6;
  double eps = 1e-8;
  double tol = 1e-6;
  int k_max = 100;
  double op_eps = 1e-10;
  std::optional<long> max_rank;
  std::string target = "control";
  std::string out_path;
  std::string state_out;
  std::string csv_path;
};

SolverConfig solver_config(const Common& c, double beta, double gamma, double eps, long r, double tol, int k_max,
                           double op_eps, std::optional<long> max_rank) {
  SolverConfig cfg;
  cfg.alpha = c.alpha;
  cfg.beta = beta;
  cfg.gamma = gamma;
  cfg.eps = eps;
  cfg.precond_rank = r;
  cfg.residual_tol = tol;
  cfg.k_max = k_max;
  cfg.op_eps = op_eps;
  if (max_rank) cfg.max_rank = *max_rank;
  cfg.aggregation = parse_aggregation(c.aggregation);
  cfg.core_options.seed = c.seed;
  cfg.validate();
  return cfg;
}

void append_csv(const std::string& path, const std::string& header, const std::string& row, std::ostream& out) {
  if (path.empty()) {
    out << header << '\n' << row << '\n';
    return;
  }
  const bool fresh = !std::ifstream(path).good();
  std::ofstream f(path, std::ios::app);
  if (!f) throw IoError("cannot open '" + path + "' for appending");
  if (fresh) f << header << '\n';
  f << row << '\n';
  if (!f) throw IoError("write to '" + path + "' failed");
}

int cmd_solve(const SolveArgs& a, std::ostream& out, std::ostream& err) {
  check_d(a.c.d);
  check_n(a.n);
  const SolverConfig cfg =
      solver_config(a.c, a.beta, a.gamma, a.eps, a.precond_rank, a.tol, a.k_max, a.op_eps, a.max_rank);
  if (a.target != "control" && a.target != "state") throw InvalidArgument("--target must be control or state");
  if (!a.state_out.empty() && a.target != "control") throw InvalidArgument("--state-out needs --target control");
  const EigenSpectrum spectrum = EigenSpectrum::laplacian(a.c.d, a.n);
  const CpTensor y_design =
      design_tensor(design_from(a.rhs, a.rhs_center, a.rhs_width, a.c.seed), spectrum.dims());

  PcgResult res;
  std::string label;
  try {
    if (a.target == "control") {
      res = solve_control(y_design, cfg, spectrum);
      label = "g3";
    } else {
      res = solve_state(y_design, cfg, spectrum);
      label = "g4";
    }
  } catch (const NumericBreakdown& e) {
    err << "solve: " << e.what() << '\n';
    return kNotConverged;
  }

  guard_io([&] {
    if (!a.out_path.empty()) save_tensor(a.out_path, res.x);
    if (!a.state_out.empty()) save_tensor(a.state_out, state_from_control(res.x, cfg, spectrum));
    return 0;
  });
  append_csv(a.csv_path, pcg_csv_header(),
             pcg_csv_row(label, a.c.d, a.n, a.c.alpha, a.precond_rank, a.eps, res.report), out);
  if (!res.report.converged) {
    err << "solve: no convergence after " << res.report.iterations << " iterations (residual "
        << fmt(res.report.final_residual) << ")\n";
    return kNotConverged;
  }
  return kOk;
}

// ------------------------------------------------------------- bench-precond

struct BenchArgs {
  Common c;
  std::string kinds = "g1,g4,g3";
  std::string grid_list;
  std::string rank_list;
  std::string rhs = "gaussian-bump";
  double beta = 1.0;
  double gamma = 1.0;
  double eps = 1e-8;
  double tol = 1e-6;
  int k_max = 100;
  double op_eps = 1e-10;
  std::optional<long> max_rank;
  std::string out_path;
};

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  check_d(a.c.d);
  const std::vector<std::string> labels = split(a.kinds, ',');
  const std::vector<long> grids = parse_int_list(a.grid_list);
  const std::vector<long> ranks = parse_int_list(a.rank_list);
  if (labels.empty() || grids.empty() || ranks.empty()) {
    throw InvalidArgument("--kinds, --grid-list and --rank-list must be non-empty");
  }
  for (long n : grids) check_n(n);
  for (long r : ranks) {
    if (r < 1) throw InvalidArgument("preconditioner ranks must be >= 1");
  }
  std::vector<CoreKind> systems;
  for (const auto& l : labels) systems.push_back(system_for_label(l));
  const SolverConfig cfg =
      solver_config(a.c, a.beta, a.gamma, a.eps, ranks.front(), a.tol, a.k_max, a.op_eps, a.max_rank);
  const long r_max = *std::max_element(ranks.begin(), ranks.end());
  Sink sink(a.out_path, out);

  // counts[kind][rank][grid]
  std::vector<std::vector<std::vector<int>>> counts(
      labels.size(), std::vector<std::vector<int>>(ranks.size(), std::vector<int>(grids.size(), -1)));
  std::mutex log_mutex;

  for (std::size_t gi = 0; gi < grids.size(); ++gi) {
    const EigenSpectrum spectrum = EigenSpectrum::laplacian(a.c.d, grids[gi]);
    const CpTensor b = design_tensor(design_from(a.rhs, 0.5, 0.1, a.c.seed), spectrum.dims());
    for (std::size_t ki = 0; ki < labels.size(); ++ki) {
      const CoreFunctionKind system = cfg.kind(systems[ki]);
      const LowRankOperator fun = build_system_operator(system, spectrum, cfg);
      // In 2D the rank-r preconditioner is the leading part of the rank-r_max
      // SVD, so one build serves every row.
      std::optional<LowRankOperator> shared;
      if (a.c.d == 2) shared = build_preconditioner(system, spectrum, r_max, cfg.core_options);
      parallel_for(ranks.size(), [&](std::size_t ri) {
        const LowRankOperator pre = shared ? leading_terms(*shared, ranks[ri])
                                           : build_preconditioner(system, spectrum, ranks[ri], cfg.core_options);
        try {
          const PcgResult res = pcg(fun, pre, b, CpTensor(b.dims()), cfg);
          counts[ki][ri][gi] = res.report.converged ? res.report.iterations : -1;
        } catch (const NumericBreakdown& e) {
          std::lock_guard lock(log_mutex);
          err << "bench-precond: " << labels[ki] << " n=" << grids[gi] << " r=" << ranks[ri] << ": " << e.what()
              << '\n';
        }
      });
    }
  }

  std::ostream& os = sink.stream();
  for (std::size_t ki = 0; ki < labels.size(); ++ki) {
    if (ki > 0) os << '\n';
    os << "kind,r";
    for (long n : grids) os << ',' << n;
    os << '\n';
    for (std::size_t ri = 0; ri < ranks.size(); ++ri) {
      os << labels[ki] << ',' << ranks[ri];
      for (std::size_t gi = 0; gi < grids.size(); ++gi) os << ',' << counts[ki][ri][gi];
      os << '\n';
    }
  }
  sink.finish();
  return kOk;
}

// ---------------------------------------------------------------- rank-decay

struct RankDecayArgs {
  Common c;
  std::string kind = "g1";
  long n = 0;
  std::string alpha_list;
  long max_rank = 20;
  std::string out_path;
};

int cmd_rank_decay(const RankDecayArgs& a, std::ostream& out) {
  check_d(a.c.d);
  check_n(a.n);
  if (a.max_rank < 1) throw InvalidArgument("--max-rank must be >= 1");
  const std::vector<double> alphas = parse_real_list(a.alpha_list);
  if (alphas.empty()) throw InvalidArgument("--alpha-list must be non-empty");
  CoreFunctionKind kind;
  kind.tag = parse_core_kind(a.kind);
  kind.aggregation = parse_aggregation(a.c.aggregation);
  const EigenSpectrum spectrum = EigenSpectrum::laplacian(a.c.d, a.n);
  CoreBuildOptions options;
  options.seed = a.c.seed;

  std::vector<std::vector<double>> errors(alphas.size());
  parallel_for(alphas.size(), [&](std::size_t ai) {
    CoreFunctionKind k = kind;
    k.alpha = alphas[ai];
    k.validate();
    std::vector<double>& e = errors[ai];
    e.push_back(1.0);
    if (a.c.d == 2) {
      const DenseTensor g = core_dense(k, spectrum);
      const MatrixXd m = g.unfold(0);
      const VectorXd s = Eigen::JacobiSVD<MatrixXd>(m).singularValues();
      const double total = s.norm();
      for (long r = 1; r <= a.max_rank; ++r) {
        const Index keep = std::min<Index>(r, s.size());
        e.push_back(s.tail(s.size() - keep).norm() / total);
      }
    } else {
      for (long r = 1; r <= a.max_rank; ++r) {
        const TuckerTensor t = build_core_tucker(k, spectrum, r, options);
        e.push_back(tucker_core_error(k, spectrum, t, a.c.seed));
      }
    }
  });

  Sink sink(a.out_path, out);
  std::ostream& os = sink.stream();
  os << "alpha,rank,relative_error\n";
  for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
    for (std::size_t r = 0; r < errors[ai].size(); ++r) {
      os << fmt(alphas[ai]) << ',' << r << ',' << fmt(errors[ai][r], 10) << '\n';
    }
  }
  sink.finish();
  return kOk;
}

// -------------------------------------------------------------------- timing

struct TimingArgs {
  Common c;
  std::string kind = "g1";
  long rank = 6;
  std::string grid_list;
  int repeats = 3;
  int iterations = 3;
  std::optional<long> fun_rank;
  long max_rank = 20;
  double eps = 1e-8;
  std::string out_path;
};

int cmd_timing(const TimingArgs& a, std::ostream& out) {
  check_d(a.c.d);
  const std::vector<long> grids = parse_int_list(a.grid_list);
  if (grids.empty()) throw InvalidArgument("--grid-list must be non-empty");
  for (long n : grids) check_n(n);
  if (a.repeats < 1) throw InvalidArgument("--repeats must be >= 1");
  if (a.iterations < 1) throw InvalidArgument("--iterations must be >= 1");
  const long fun_rank = a.fun_rank.value_or(a.c.d == 2 ? 20 : 8);
  if (fun_rank < 1) throw InvalidArgument("--fun-rank must be >= 1");
  // Fixed iteration count: the tolerance is never met.
  SolverConfig cfg = solver_config(a.c, 1.0, 1.0, a.eps, a.rank, 1e-300, a.iterations, 1e-10, a.max_rank);
  const CoreKind system = system_for_label(a.kind);
  const CoreFunctionKind kind = cfg.kind(system);

  Sink sink(a.out_path, out);
  std::ostream& os = sink.stream();
  os << "n,median_seconds_per_iteration\n";
  for (long n : grids) {
    const EigenSpectrum spectrum = EigenSpectrum::laplacian(a.c.d, n);
    const CpTensor b = design_tensor(design_from("gaussian-bump", 0.5, 0.1, a.c.seed), spectrum.dims());
    const LowRankOperator fun(build_core(kind, spectrum, TruncationSpec::fixed(fun_rank), default_method(a.c.d),
                                         cfg.core_options));
    const LowRankOperator pre = build_preconditioner(kind, spectrum, a.rank, cfg.core_options);
    std::vector<double> times;
    for (int rep = 0; rep < a.repeats; ++rep) {
      try {
        times.push_back(pcg(fun, pre, b, CpTensor(b.dims()), cfg).report.seconds_per_iteration);
      } catch (const NumericBreakdown& e) {
        throw NotConverged(std::string("timing: ") + e.what());
      }
    }
    std::sort(times.begin(), times.end());
    const std::size_t m = times.size();
    const double median = m % 2 ? times[m / 2] : 0.5 * (times[m / 2 - 1] + times[m / 2]);
    os << n << ',' << fmt(median) << '\n';
  }
  sink.finish();
  return kOk;
}

const char* kFooter = R"(Output formats:
  build-core     writes a DOF1 dump to --out; prints
                 rank=R frobenius_error=E max_relative_error=M
  solve          CSV kind,d,n,alpha,r,eps,iterations,final_residual,seconds_per_iteration
                 (kind is the preconditioner label: g3 for control, g4 for state;
                 iterations = -1 when k_max is hit); appended to --csv or printed
  bench-precond  one CSV block per kind: header kind,r,<n1>,<n2>,...; one row per
                 rank with iteration counts, -1 on k_max hit or breakdown
  rank-decay     CSV alpha,rank,relative_error (rank 0 row = 1)
  timing         CSV n,median_seconds_per_iteration

Every flag can be set in a flat key=value file passed with --config; flags on
the command line override the file. FRACLAP_THREADS caps worker threads.
Exit codes: 0 ok, 1 usage, 2 non-convergence, 3 I/O.)";

void add_common(CLI::App* sub, Common& c, bool with_alpha, bool alpha_required) {
  if (with_alpha) {
    auto* o = sub->add_option("--alpha", c.alpha, "Fractional order in (0, 1]");
    if (alpha_required) o->required();
  }
  sub->add_option("--d", c.d, "Spatial dimension (2 or 3)")->required();
  sub->add_option("--seed", c.seed, "Seed for random right-hand sides and sampling")->capture_default_str();
  sub->add_option("--aggregation", c.aggregation, "sum-then-power or power-then-sum")->capture_default_str();
}

}  // namespace

std::vector<long> parse_int_list(const std::string& text) {
  std::vector<long> out;
  for (const auto& part : split(text, ',')) {
    if (part.empty()) continue;
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(to_long(part));
      continue;
    }
    const long lo = to_long(trim(part.substr(0, dots)));
    const long hi = to_long(trim(part.substr(dots + 2)));
    if (hi < lo) throw InvalidArgument("empty range '" + part + "'");
    for (long v = lo; v <= hi; ++v) out.push_back(v);
  }
  return out;
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : split(text, ',')) {
    if (!part.empty()) out.push_back(to_double(part));
  }
  return out;
}

int run(const std::vector<std::string>& args_in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-rank solvers for fractional Laplacian optimal control", "fraclap"};
  app.footer(kFooter);
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  app.add_option("--config", config_path, "Flat key=value file with default flag values");

  BuildCoreArgs bc;
  auto* s_bc = app.add_subcommand("build-core", "Build a low-rank core g(Lambda) and write it to a file");
  add_common(s_bc, bc.c, true, true);
  s_bc->add_option("--kind", bc.kind, "g1, g2, g3 or g4")->required();
  s_bc->add_option("--n", bc.n, "Grid size per direction")->required();
  s_bc->add_option("--method", bc.method, "sinc, mg-tucker or dense-svd (default: dense-svd for d=2, mg-tucker for d=3)");
  s_bc->add_option("--eps", bc.eps, "Relative accuracy target")->capture_default_str();
  s_bc->add_option("--max-rank", bc.max_rank, "Cap on the CP rank");
  s_bc->add_option("--tucker-rank", bc.tucker_rank, "Fixed Tucker rank per mode (mg-tucker)");
  s_bc->add_option("--sinc-m", bc.sinc_m, "Fixed quadrature parameter M (sinc)");
  s_bc->add_option("--spectrum", bc.spectrum, "laplacian or constant")->capture_default_str();
  s_bc->add_option("--spectrum-value", bc.spectrum_value, "Eigenvalue of the constant spectrum (default 1/d)");
  s_bc->add_option("--out", bc.out_path, "Output file")->required();

  SolveArgs sv;
  auto* s_sv = app.add_subcommand("solve", "Solve for the optimal control or the optimal state");
  add_common(s_sv, sv.c, true, true);
  s_sv->add_option("--n", sv.n, "Grid size per direction")->required();
  s_sv->add_option("--beta", sv.beta, "Control scaling beta")->capture_default_str();
  s_sv->add_option("--gamma", sv.gamma, "Regularization gamma")->capture_default_str();
  s_sv->add_option("--rhs", sv.rhs, "gaussian-bump, two-bumps, box-indicator or random")->capture_default_str();
  s_sv->add_option("--rhs-center", sv.rhs_center, "Center of the design function")->capture_default_str();
  s_sv->add_option("--rhs-width", sv.rhs_width, "Width of the design function")->capture_default_str();
  s_sv->add_option("--precond-rank", sv.precond_rank, "Preconditioner rank r")->capture_default_str();
  s_sv->add_option("--eps", sv.eps, "Truncation tolerance inside PCG (0 disables)")->capture_default_str();
  s_sv->add_option("--tol", sv.tol, "Relative residual tolerance")->capture_default_str();
  s_sv->add_option("--k-max", sv.k_max, "Iteration limit")->capture_default_str();
  s_sv->add_option("--op-eps", sv.op_eps, "Accuracy of the system operator core")->capture_default_str();
  s_sv->add_option("--max-rank", sv.max_rank, "Cap on iterate ranks");
  s_sv->add_option("--target", sv.target, "control or state")->capture_default_str();
  s_sv->add_option("--out", sv.out_path, "Solution dump (LRT1 CP)");
  s_sv->add_option("--state-out", sv.state_out, "State dump computed from the control (target control)");
  s_sv->add_option("--csv", sv.csv_path, "Append the report row to this CSV file");

  BenchArgs bn;
  auto* s_bn = app.add_subcommand("bench-precond", "Iteration counts over preconditioner ranks and grid sizes");
  add_common(s_bn, bn.c, true, true);
  s_bn->add_option("--kinds", bn.kinds, "Preconditioner labels: g1 (A^alpha system), g4 (state), g3 (control)")
      ->capture_default_str();
  s_bn->add_option("--grid-list", bn.grid_list, "Grid sizes, e.g. 256,512 or 64..66")->required();
  s_bn->add_option("--rank-list", bn.rank_list, "Preconditioner ranks, e.g. 5..10")->required();
  s_bn->add_option("--rhs", bn.rhs, "Right-hand side design function")->capture_default_str();
  s_bn->add_option("--beta", bn.beta, "Control scaling beta")->capture_default_str();
  s_bn->add_option("--gamma", bn.gamma, "Regularization gamma")->capture_default_str();
  s_bn->add_option("--eps", bn.eps, "Truncation tolerance inside PCG")->capture_default_str();
  s_bn->add_option("--tol", bn.tol, "Relative residual tolerance")->capture_default_str();
  s_bn->add_option("--k-max", bn.k_max, "Iteration limit")->capture_default_str();
  s_bn->add_option("--op-eps", bn.op_eps, "Accuracy of the system operator core")->capture_default_str();
  s_bn->add_option("--max-rank", bn.max_rank, "Cap on iterate ranks");
  s_bn->add_option("--out", bn.out_path, "CSV output file (default stdout)");

  RankDecayArgs rd;
  auto* s_rd = app.add_subcommand("rank-decay", "Approximation error of a core versus rank");
  add_common(s_rd, rd.c, false, false);
  s_rd->add_option("--kind", rd.kind, "g1, g2, g3 or g4")->capture_default_str();
  s_rd->add_option("--n", rd.n, "Grid size per direction")->required();
  s_rd->add_option("--alpha-list", rd.alpha_list, "Fractional orders, e.g. 1,0.5,0.1")->required();
  s_rd->add_option("--max-rank", rd.max_rank, "Largest rank reported")->capture_default_str();
  s_rd->add_option("--out", rd.out_path, "CSV output file (default stdout)");

  TimingArgs tm;
  auto* s_tm = app.add_subcommand("timing", "Median seconds per PCG iteration versus grid size");
  add_common(s_tm, tm.c, true, false);
  s_tm->add_option("--kind", tm.kind, "Preconditioner label g1, g4 or g3")->capture_default_str();
  s_tm->add_option("--rank", tm.rank, "Preconditioner rank")->capture_default_str();
  s_tm->add_option("--grid-list", tm.grid_list, "Grid sizes")->required();
  s_tm->add_option("--repeats", tm.repeats, "Runs per grid size")->capture_default_str();
  s_tm->add_option("--iterations", tm.iterations, "PCG iterations per run")->capture_default_str();
  s_tm->add_option("--fun-rank", tm.fun_rank, "Fixed rank of the system core (default 20 for d=2, Tucker 8 for d=3)");
  s_tm->add_option("--max-rank", tm.max_rank, "Cap on iterate ranks")->capture_default_str();
  s_tm->add_option("--eps", tm.eps, "Truncation tolerance inside PCG")->capture_default_str();
  s_tm->add_option("--out", tm.out_path, "CSV output file (default stdout)");

  try {
    // Splice config tokens in right after the subcommand name, so that later
    // command-line flags take precedence.
    std::vector<std::string> args;
    std::vector<std::string> rest;
    for (std::size_t i = 1; i < args_in.size(); ++i) {
      const std::string& t = args_in[i];
      if (t == "--config" && i + 1 < args_in.size()) {
        config_path = args_in[++i];
      } else if (t.rfind("--config=", 0) == 0) {
        config_path = t.substr(9);
      } else {
        rest.push_back(t);
      }
    }
    std::vector<std::string> cfg_tokens;
    if (!config_path.empty()) cfg_tokens = read_config(config_path);
    args.push_back(args_in.empty() ? "fraclap" : args_in.front());
    bool spliced = false;
    for (const auto& t : rest) {
      args.push_back(t);
      if (!spliced && app.get_subcommand_no_throw(t) != nullptr) {
        args.insert(args.end(), cfg_tokens.begin(), cfg_tokens.end());
        spliced = true;
      }
    }
    std::reverse(args.begin() + 1, args.end());
    args.erase(args.begin());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const InvalidArgument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (s_bc->parsed()) return cmd_build_core(bc, out);
    if (s_sv->parsed()) return cmd_solve(sv, out, err);
    if (s_bn->parsed()) return cmd_bench(bn, out, err);
    if (s_rd->parsed()) return cmd_rank_decay(rd, out);
    if (s_tm->parsed()) return cmd_timing(tm, out);
  } catch (const InvalidArgument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ResourceLimit& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const NotConverged& e) {
    err << e.what() << '\n';
    return kNotConverged;
  }
  return kUsage;
}

}  // namespace fraclap::cli
