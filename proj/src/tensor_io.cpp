#include "fraclap/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "fraclap/errors.hpp"

namespace fraclap {

namespace io {

void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> buf{};
  for (int i = 0; i < 8; ++i) buf[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(buf.data(), 8);
}

void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint8_t get_u8(std::istream& in) {
  char c = 0;
  if (!in.get(c)) throw std::runtime_error("tensor dump: unexpected end of stream");
  return static_cast<std::uint8_t>(c);
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> buf{};
  if (!in.read(reinterpret_cast<char*>(buf.data()), 8)) {
    throw std::runtime_error("tensor dump: unexpected end of stream");
  }
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[static_cast<std::size_t>(i)];
  return v;
}

double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace io

namespace {

constexpr char kMagic[4] = {'L', 'R', 'T', '1'};
constexpr std::uint64_t kMaxEntries = std::uint64_t{1} << 34;

void put_values(std::ostream& out, const double* p, Index n) {
  for (Index i = 0; i < n; ++i) io::put_f64(out, p[i]);
}

void get_values(std::istream& in, double* p, Index n) {
  for (Index i = 0; i < n; ++i) p[i] = io::get_f64(in);
}

void write_header(std::ostream& out, const Dims& dims, std::uint8_t tag) {
  out.write(kMagic, 4);
  io::put_u8(out, static_cast<std::uint8_t>(dims.size()));
  io::put_u8(out, tag);
  for (Index n : dims) io::put_u64(out, static_cast<std::uint64_t>(n));
}

Index checked_size(std::uint64_t v) {
  if (v > kMaxEntries) throw std::runtime_error("tensor dump: implausible size field");
  return static_cast<Index>(v);
}

}  // namespace

void write_tensor(std::ostream& out, const CpTensor& t) {
  write_header(out, t.dims(), 0);
  io::put_u64(out, static_cast<std::uint64_t>(t.rank()));
  put_values(out, t.weights().data(), t.rank());
  for (const auto& f : t.factors()) put_values(out, f.data(), f.size());
  if (!out) throw std::runtime_error("tensor dump: write failed");
}

void write_tensor(std::ostream& out, const TuckerTensor& t) {
  write_header(out, t.dims(), 1);
  for (Index r : t.ranks()) io::put_u64(out, static_cast<std::uint64_t>(r));
  put_values(out, t.core().data().data(), t.core().numel());
  for (const auto& s : t.sides()) put_values(out, s.data(), s.size());
  if (!out) throw std::runtime_error("tensor dump: write failed");
}

AnyTensor read_tensor(std::istream& in) {
  char magic[4] = {};
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("tensor dump: bad magic");
  }
  const int d = io::get_u8(in);
  const int tag = io::get_u8(in);
  if (d < 1 || d > 8) throw std::runtime_error("tensor dump: unsupported order");
  Dims dims;
  for (int l = 0; l < d; ++l) dims.push_back(checked_size(io::get_u64(in)));

  if (tag == 0) {
    const Index r = checked_size(io::get_u64(in));
    VectorXd w(r);
    get_values(in, w.data(), r);
    std::vector<MatrixXd> factors;
    for (Index n : dims) {
      MatrixXd f(n, r);
      get_values(in, f.data(), f.size());
      factors.push_back(std::move(f));
    }
    if (r == 0) return CpTensor(dims);
    return CpTensor(std::move(w), std::move(factors));
  }
  if (tag == 1) {
    Dims ranks;
    for (int l = 0; l < d; ++l) ranks.push_back(checked_size(io::get_u64(in)));
    DenseTensor core(ranks, static_cast<std::int64_t>(kMaxEntries));
    get_values(in, core.data().data(), core.numel());
    std::vector<MatrixXd> sides;
    for (int l = 0; l < d; ++l) {
      MatrixXd s(dims[static_cast<std::size_t>(l)], ranks[static_cast<std::size_t>(l)]);
      get_values(in, s.data(), s.size());
      sides.push_back(std::move(s));
    }
    return TuckerTensor(std::move(core), std::move(sides));
  }
  throw std::runtime_error("tensor dump: unknown format tag");
}

void save_tensor(const std::filesystem::path& path, const AnyTensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  std::visit([&](const auto& x) { write_tensor(out, x); }, t);
}

AnyTensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_tensor(in);
}

}  // namespace fraclap
