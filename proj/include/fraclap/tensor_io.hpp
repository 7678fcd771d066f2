#pragma once

#include <filesystem>
#include <iosfwd>
#include <variant>

#include "fraclap/tensor.hpp"

namespace fraclap {

// Binary layout (all integers and reals little-endian, 64-bit):
//   "LRT1" | u8 d | u8 tag (0 = CP, 1 = Tucker) | u64 dims[d]
//   CP:     u64 R | f64 weights[R] | f64 factor_l[n_l * R] (column-major), l = 1..d
//   Tucker: u64 ranks[d] | f64 core[prod r] (column-major) | f64 side_l[n_l * r_l], l = 1..d

using AnyTensor = std::variant<CpTensor, TuckerTensor>;

void write_tensor(std::ostream& out, const CpTensor& t);
void write_tensor(std::ostream& out, const TuckerTensor& t);
AnyTensor read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const AnyTensor& t);
AnyTensor load_tensor(const std::filesystem::path& path);

namespace io {
void put_u8(std::ostream& out, std::uint8_t v);
void put_u64(std::ostream& out, std::uint64_t v);
void put_f64(std::ostream& out, double v);
std::uint8_t get_u8(std::istream& in);
std::uint64_t get_u64(std::istream& in);
double get_f64(std::istream& in);
}  // namespace io

}  // namespace fraclap
