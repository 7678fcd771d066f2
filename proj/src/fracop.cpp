#include "fraclap/fracop.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include "fraclap/errors.hpp"
#include "fraclap/tensor_io.hpp"

namespace fraclap {

void CoreFunctionKind::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("core function: alpha must lie in (0, 1]");
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidArgument("core function: scale factors must be positive");
  if (aggregation == Aggregation::Generalized && !map) {
    throw InvalidArgument("core function: generalized aggregation needs a scalar map");
  }
}

VectorXd CoreFunctionKind::mode_values(const VectorXd& lambda) const {
  switch (aggregation) {
    case Aggregation::SumThenPower:
      return lambda;
    case Aggregation::PowerThenSum:
      return lambda.array().pow(alpha).matrix();
    case Aggregation::Generalized: {
      VectorXd out(lambda.size());
      for (Index i = 0; i < lambda.size(); ++i) out(i) = map(lambda(i));
      return out;
    }
  }
  return lambda;
}

double CoreFunctionKind::outer_power() const { return aggregation == Aggregation::PowerThenSum ? 1.0 : alpha; }

double CoreFunctionKind::evaluate(double p) const {
  switch (tag) {
    case CoreKind::G1:
      return a / p;
    case CoreKind::G2:
      return a / p + b * p;
    case CoreKind::G3:
      return p / (a + b * p * p);
    case CoreKind::G4:
      return 1.0 / (1.0 + (b / a) * p * p);
    case CoreKind::Power:
      return p / a;
    case CoreKind::State:
      return 1.0 + (b / a) * p * p;
  }
  return 0.0;
}

double CoreFunctionKind::evaluate_sum(double mu_sum) const {
  const double e = outer_power();
  return evaluate(e == 1.0 ? mu_sum : std::pow(mu_sum, e));
}

CoreFunctionKind CoreFunctionKind::reciprocal() const {
  CoreFunctionKind r = *this;
  switch (tag) {
    case CoreKind::G1: r.tag = CoreKind::Power; break;
    case CoreKind::Power: r.tag = CoreKind::G1; break;
    case CoreKind::G2: r.tag = CoreKind::G3; break;
    case CoreKind::G3: r.tag = CoreKind::G2; break;
    case CoreKind::G4: r.tag = CoreKind::State; break;
    case CoreKind::State: r.tag = CoreKind::G4; break;
  }
  return r;
}

std::string_view to_string(CoreKind kind) {
  switch (kind) {
    case CoreKind::G1: return "g1";
    case CoreKind::G2: return "g2";
    case CoreKind::G3: return "g3";
    case CoreKind::G4: return "g4";
    case CoreKind::Power: return "power";
    case CoreKind::State: return "state";
  }
  return "?";
}

CoreKind parse_core_kind(std::string_view tag) {
  for (CoreKind k : {CoreKind::G1, CoreKind::G2, CoreKind::G3, CoreKind::G4, CoreKind::Power, CoreKind::State}) {
    if (to_string(k) == tag) return k;
  }
  throw InvalidArgument("unknown core kind '" + std::string(tag) + "'");
}

std::string_view to_string(CoreMethod method) {
  switch (method) {
    case CoreMethod::Sinc: return "sinc";
    case CoreMethod::MultigridTucker: return "mg-tucker";
    case CoreMethod::DenseSvd: return "dense-svd";
  }
  return "?";
}

CoreMethod parse_core_method(std::string_view tag) {
  for (CoreMethod m : {CoreMethod::Sinc, CoreMethod::MultigridTucker, CoreMethod::DenseSvd}) {
    if (to_string(m) == tag) return m;
  }
  throw InvalidArgument("unknown core method '" + std::string(tag) + "'");
}

namespace {

std::vector<VectorXd> all_mode_values(const CoreFunctionKind& kind, const EigenSpectrum& spectrum) {
  std::vector<VectorXd> mu;
  for (const auto& m : spectrum.modes()) mu.push_back(kind.mode_values(m.eigenvalues()));
  return mu;
}

double cp_entry(const CpTensor& a, std::span<const Index> idx) {
  double s = 0.0;
  for (Index k = 0; k < a.rank(); ++k) {
    double t = a.weights()(k);
    for (int l = 0; l < a.order(); ++l) t *= a.factor(l)(idx[static_cast<std::size_t>(l)], k);
    s += t;
  }
  return s;
}

}  // namespace

double core_entry(const CoreFunctionKind& kind, const EigenSpectrum& spectrum, std::span<const Index> index) {
  kind.validate();
  if (static_cast<int>(index.size()) != spectrum.order()) {
    throw InvalidArgument("core_entry: index length does not match the spectrum order");
  }
  VectorXd lam(1);
  double sum = 0.0;
  for (int l = 0; l < spectrum.order(); ++l) {
    const Index i = index[static_cast<std::size_t>(l)];
    const Mode1D& m = spectrum.mode(l);
    if (i < 0 || i >= m.size()) throw InvalidArgument("core_entry: index out of range");
    lam(0) = m.eigenvalues()(i);
    sum += kind.mode_values(lam)(0);
  }
  return kind.evaluate_sum(sum);
}

DenseTensor core_dense(const CoreFunctionKind& kind, const EigenSpectrum& spectrum, std::int64_t cap) {
  kind.validate();
  const Dims dims = spectrum.dims();
  DenseTensor t(dims, cap);
  const std::vector<VectorXd> mu = all_mode_values(kind, spectrum);
  const Index n1 = dims[0];
  const Index n2 = dims[1];
  const Index n3 = dims.size() == 3 ? dims[2] : 1;
  Index lin = 0;
  for (Index k = 0; k < n3; ++k) {
    const double c = dims.size() == 3 ? mu[2](k) : 0.0;
    for (Index j = 0; j < n2; ++j) {
      for (Index i = 0; i < n1; ++i) t.data()(lin++) = kind.evaluate_sum(mu[0](i) + mu[1](j) + c);
    }
  }
  return t;
}

namespace {

CpTensor separable_sum(const std::vector<VectorXd>& mu) {
  const auto d = mu.size();
  std::vector<MatrixXd> f;
  for (std::size_t l = 0; l < d; ++l) {
    MatrixXd m = MatrixXd::Ones(mu[l].size(), static_cast<Index>(d));
    m.col(static_cast<Index>(l)) = mu[l];
    f.push_back(std::move(m));
  }
  return cp_normalize(CpTensor(VectorXd::Ones(static_cast<Index>(d)), std::move(f)));
}

}  // namespace

CpTensor sum_core_exact(const EigenSpectrum& spectrum) {
  std::vector<VectorXd> mu;
  for (const auto& m : spectrum.modes()) mu.push_back(m.eigenvalues());
  return separable_sum(mu);
}

CpTensor plus_part_core(const CoreFunctionKind& kind, const EigenSpectrum& spectrum) {
  kind.validate();
  return separable_sum(all_mode_values(kind, spectrum));
}

CoreError core_error(const CoreFunctionKind& kind, const EigenSpectrum& spectrum, const CpTensor& core,
                     std::uint64_t seed) {
  kind.validate();
  const Dims dims = spectrum.dims();
  if (core.dims() != dims) throw InvalidArgument("core_error: core dims do not match the spectrum");
  double total = 1.0;
  for (Index n : dims) total *= static_cast<double>(n);

  CoreError out;
  double err2 = 0.0;
  double ref2 = 0.0;
  auto account = [&](double approx, double exact) {
    const double e = approx - exact;
    err2 += e * e;
    ref2 += exact * exact;
    out.max_relative = std::max(out.max_relative, std::abs(e) / std::abs(exact));
  };

  if (total <= double(1 << 22)) {
    const DenseTensor exact = core_dense(kind, spectrum);
    const DenseTensor approx = cp_to_dense(core);
    for (Index i = 0; i < exact.numel(); ++i) account(approx.data()(i), exact.data()(i));
    out.exact = true;
  } else {
    const int d = spectrum.order();
    const std::vector<VectorXd> mu = all_mode_values(kind, spectrum);
    std::mt19937_64 rng(seed);
    std::vector<Index> idx(static_cast<std::size_t>(d));
    auto visit = [&]() {
      double s = 0.0;
      for (int l = 0; l < d; ++l) s += mu[static_cast<std::size_t>(l)](idx[static_cast<std::size_t>(l)]);
      account(cp_entry(core, idx), kind.evaluate_sum(s));
    };
    for (int l = 0; l < d; ++l) idx[static_cast<std::size_t>(l)] = 0;
    visit();
    for (int l = 0; l < d; ++l) idx[static_cast<std::size_t>(l)] = dims[static_cast<std::size_t>(l)] - 1;
    visit();
    for (int s = 0; s < 10000; ++s) {
      for (int l = 0; l < d; ++l) {
        std::uniform_int_distribution<Index> pick(0, dims[static_cast<std::size_t>(l)] - 1);
        idx[static_cast<std::size_t>(l)] = pick(rng);
      }
      visit();
    }
    out.exact = false;
  }
  out.frobenius = ref2 > 0.0 ? std::sqrt(err2 / ref2) : std::sqrt(err2);
  return out;
}

DiagOpFunction sinc_inverse_power(const EigenSpectrum& spectrum, const CoreFunctionKind& kind, int m,
                                  double step_param) {
  kind.validate();
  if (kind.tag != CoreKind::G1) throw InvalidArgument("sinc quadrature represents the g1 kind only");
  if (m < 0) throw InvalidArgument("sinc quadrature: M must be non-negative");
  if (!(step_param > 0.0)) throw InvalidArgument("sinc quadrature: step parameter must be positive");

  const std::vector<VectorXd> mu = all_mode_values(kind, spectrum);
  double rho_min = 0.0;
  for (const auto& v : mu) {
    if (!(v.minCoeff() > 0.0)) throw InvalidArgument("sinc quadrature: spectrum must be positive");
    rho_min += v.minCoeff();
  }
  const double e = kind.outer_power();
  const double h = step_param * std::numbers::pi / std::sqrt(static_cast<double>(std::max(m, 1)));
  const double scale = kind.a * std::pow(rho_min, -e) / std::tgamma(e);

  const Index r = 2 * static_cast<Index>(m) + 1;
  VectorXd w(r);
  std::vector<MatrixXd> f;
  for (const auto& v : mu) f.emplace_back(v.size(), r);
  for (Index k = 0; k < r; ++k) {
    const double u = h * static_cast<double>(k - m);
    // t = log(1 + e^u), dt/du = 1 / (1 + e^-u)
    const double t = u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
    const double dt = 1.0 / (1.0 + std::exp(-u));
    w(k) = scale * h * std::pow(t, e - 1.0) * dt;
    for (std::size_t l = 0; l < mu.size(); ++l) {
      f[l].col(k) = (-(t / rho_min) * mu[l].array()).exp().matrix();
    }
  }
  DiagOpFunction op{spectrum, kind, cp_normalize(CpTensor(std::move(w), std::move(f))), 0.0};
  op.achieved_error = core_error(kind, spectrum, op.core).max_relative;
  return op;
}

DiagOpFunction sinc_inverse_power(const EigenSpectrum& spectrum, double alpha, int m, double step_param) {
  CoreFunctionKind kind;
  kind.tag = CoreKind::G1;
  kind.alpha = alpha;
  return sinc_inverse_power(spectrum, kind, m, step_param);
}

LowRankOperator::LowRankOperator(DiagOpFunction diag) : diag_(std::move(diag)) {
  if (diag_.core.dims() != diag_.spectrum.dims()) {
    throw InvalidArgument("LowRankOperator: core dims do not match the spectrum");
  }
}

CpTensor LowRankOperator::to_spectral(const CpTensor& x) const {
  if (x.dims() != dims()) throw InvalidArgument("LowRankOperator: operand dims do not match");
  std::vector<MatrixXd> f = x.factors();
  for (int l = 0; l < x.order(); ++l) spectrum().mode(l).apply_columns(f[static_cast<std::size_t>(l)], Direction::Forward);
  if (x.rank() == 0) return x;
  return CpTensor(x.weights(), std::move(f));
}

CpTensor LowRankOperator::from_spectral(const CpTensor& x) const {
  if (x.dims() != dims()) throw InvalidArgument("LowRankOperator: operand dims do not match");
  if (x.rank() == 0) return x;
  std::vector<MatrixXd> f = x.factors();
  for (int l = 0; l < x.order(); ++l) spectrum().mode(l).apply_columns(f[static_cast<std::size_t>(l)], Direction::Inverse);
  return CpTensor(x.weights(), std::move(f));
}

CpTensor LowRankOperator::apply(const CpTensor& x) const {
  const CpTensor xs = to_spectral(x);
  if (xs.rank() == 0) return xs;
  return from_spectral(cp_hadamard(diag_.core, xs));
}

CpTensor LowRankOperator::apply_truncated(const CpTensor& x, const TruncationSpec& spec) const {
  const CpTensor xs = to_spectral(x);
  if (xs.rank() == 0) return xs;
  return from_spectral(trunc(cp_hadamard(diag_.core, xs), spec));
}

void save_diag_op(const std::filesystem::path& path, const DiagOpFunction& op) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write("DOF1", 4);
  io::put_u8(out, static_cast<std::uint8_t>(op.kind.tag));
  io::put_u8(out, static_cast<std::uint8_t>(op.kind.aggregation));
  io::put_f64(out, op.kind.alpha);
  io::put_f64(out, op.kind.a);
  io::put_f64(out, op.kind.b);
  io::put_f64(out, op.achieved_error);
  write_tensor(out, op.core);
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

DiagOpHeader load_diag_op(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "DOF1") throw std::runtime_error("'" + path.string() + "' is not a DOF1 dump");
  DiagOpHeader h;
  const auto tag = io::get_u8(in);
  const auto agg = io::get_u8(in);
  if (tag > static_cast<std::uint8_t>(CoreKind::State) || agg > static_cast<std::uint8_t>(Aggregation::Generalized)) {
    throw std::runtime_error("'" + path.string() + "': bad kind or aggregation tag");
  }
  h.kind.tag = static_cast<CoreKind>(tag);
  h.kind.aggregation = static_cast<Aggregation>(agg);
  h.kind.alpha = io::get_f64(in);
  h.kind.a = io::get_f64(in);
  h.kind.b = io::get_f64(in);
  h.achieved_error = io::get_f64(in);
  AnyTensor t = read_tensor(in);
  if (!std::holds_alternative<CpTensor>(t)) throw std::runtime_error("'" + path.string() + "': core is not CP");
  h.core = std::get<CpTensor>(std::move(t));
  return h;
}

}  // namespace fraclap
