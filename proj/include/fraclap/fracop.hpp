#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "fraclap/decomp.hpp"
#include "fraclap/spectral.hpp"
#include "fraclap/tensor.hpp"

namespace fraclap {

/// Scalar function applied to the aggregated spectral variable p.
///
/// With scale factors a, b (a = beta, b = gamma / beta in the control
/// problem, both 1 by default):
///   g1    = a / p
///   g2    = a / p + b p
///   g3    = 1 / g2
///   g4    = 1 / (1 + (b/a) p^2)
///   power = p / a                  (reciprocal of g1)
///   state = 1 + (b/a) p^2          (reciprocal of g4)
enum class CoreKind { G1, G2, G3, G4, Power, State };

/// How per-mode eigenvalues are combined into p:
///   SumThenPower:  p = (sum_l lambda_l)^alpha
///   PowerThenSum:  p = sum_l lambda_l^alpha       (directionally fractional)
///   Generalized:   p = (sum_l F(lambda_l))^alpha
enum class Aggregation { SumThenPower, PowerThenSum, Generalized };

struct CoreFunctionKind {
  CoreKind tag = CoreKind::G1;
  double alpha = 1.0;
  Aggregation aggregation = Aggregation::SumThenPower;
  std::function<double(double)> map;  // F, Generalized only
  double a = 1.0;
  double b = 1.0;

  void validate() const;

  /// Per-mode values mu_l that are summed (lambda, lambda^alpha or F(lambda)).
  VectorXd mode_values(const VectorXd& lambda) const;
  /// Exponent applied after summing: alpha, or 1 for PowerThenSum.
  double outer_power() const;
  /// g as a function of p.
  double evaluate(double p) const;
  /// g as a function of the summed mode values.
  double evaluate_sum(double mu_sum) const;

  /// Same aggregation and scales, entrywise reciprocal function.
  CoreFunctionKind reciprocal() const;
};

std::string_view to_string(CoreKind kind);
CoreKind parse_core_kind(std::string_view tag);

/// Exact value of the core function at one index tuple.
double core_entry(const CoreFunctionKind& kind, const EigenSpectrum& spectrum, std::span<const Index> index);

/// Exact core tensor as a dense array (oracle, small sizes).
DenseTensor core_dense(const CoreFunctionKind& kind, const EigenSpectrum& spectrum,
                       std::int64_t cap = kDefaultDenseCap);

/// Exact rank-d CP tensor of sum_l lambda_l(i_l).
CpTensor sum_core_exact(const EigenSpectrum& spectrum);

/// Exact rank-d CP tensor of the summed mode values of `kind`
/// (for PowerThenSum: sum_l lambda_l^alpha).
CpTensor plus_part_core(const CoreFunctionKind& kind, const EigenSpectrum& spectrum);

/// Low-rank CP representation of the core tensor G = g(Lambda).
struct DiagOpFunction {
  EigenSpectrum spectrum;
  CoreFunctionKind kind;
  CpTensor core;
  /// Relative error estimate of `core` against the exact entries: relative
  /// Frobenius error for build_core, maximal relative entrywise error for
  /// sinc_inverse_power. Exact when prod n_l <= 2^22, sampled otherwise.
  double achieved_error = 0.0;
};

/// Sinc-quadrature exponential sum for p^-1 (kinds G1 only), rank 2M+1.
/// The quadrature runs on rho / rho_min; rho_min^-alpha is reapplied to the
/// weights.
DiagOpFunction sinc_inverse_power(const EigenSpectrum& spectrum, const CoreFunctionKind& kind, int m,
                                  double step_param = 0.8);
/// Convenience overload: G1, SumThenPower, unit scales.
DiagOpFunction sinc_inverse_power(const EigenSpectrum& spectrum, double alpha, int m, double step_param = 0.8);

enum class CoreMethod { Sinc, MultigridTucker, DenseSvd };

std::string_view to_string(CoreMethod method);
CoreMethod parse_core_method(std::string_view tag);

struct CoreBuildOptions {
  /// Sinc: fixed M, or increase M over perfect squares until the error
  /// target is met.
  std::optional<int> sinc_m;
  double sinc_step = 0.8;
  int sinc_max_m = 400;
  /// Multigrid Tucker: fixed Tucker rank per mode, or adapt up to the cap.
  std::optional<Index> tucker_rank;
  Index tucker_rank_cap = 40;
  int multigrid_levels = 3;
  Index multigrid_min_size = 24;
  std::uint64_t seed = 20240917;
};

/// CP approximation of g(Lambda) with relative Frobenius error below the
/// spec tolerance (or at the spec's fixed rank).
DiagOpFunction build_core(const CoreFunctionKind& kind, const EigenSpectrum& spectrum, const TruncationSpec& spec,
                          CoreMethod method, const CoreBuildOptions& options = {});

/// Tucker stage of the multigrid route: every mode at rank min(rank, n).
/// Uses nested grids for equal-size Laplacian modes, a single grid otherwise.
TuckerTensor build_core_tucker(const CoreFunctionKind& kind, const EigenSpectrum& spectrum, Index rank,
                               const CoreBuildOptions& options = {});

/// Relative Frobenius error of a Tucker core (exact when prod n_l <= 2^22,
/// sampled otherwise).
double tucker_core_error(const CoreFunctionKind& kind, const EigenSpectrum& spectrum, const TuckerTensor& t,
                         std::uint64_t seed = 20240917);

/// Relative error of a CP core against the exact core function.
struct CoreError {
  double frobenius = 0.0;     // ||G_cp - G|| / ||G||
  double max_relative = 0.0;  // max |G_cp - G| / |G|
  bool exact = true;          // false when estimated from samples
};
CoreError core_error(const CoreFunctionKind& kind, const EigenSpectrum& spectrum, const CpTensor& core,
                     std::uint64_t seed = 20240917);

/// F(A) x = F^T (G .* (F x)) for CP-format x, all in factored form.
class LowRankOperator {
 public:
  explicit LowRankOperator(DiagOpFunction diag);

  const DiagOpFunction& diag() const noexcept { return diag_; }
  const EigenSpectrum& spectrum() const noexcept { return diag_.spectrum; }
  Dims dims() const { return diag_.core.dims(); }
  Index rank() const noexcept { return diag_.core.rank(); }

  /// Exact product, rank R * S.
  CpTensor apply(const CpTensor& x) const;

  /// trunc(apply(x)): the truncation runs on the spectral-domain factors and
  /// only the retained columns are transformed back.
  CpTensor apply_truncated(const CpTensor& x, const TruncationSpec& spec) const;

  /// Spectral-domain representation of x (forward transform of all factors).
  CpTensor to_spectral(const CpTensor& x) const;
  CpTensor from_spectral(const CpTensor& x) const;

 private:
  DiagOpFunction diag_;
};

/// Dump: "DOF1" | u8 kind | u8 aggregation | f64 alpha | f64 a | f64 b |
/// f64 achieved_error | CP tensor in the LRT1 layout.
void save_diag_op(const std::filesystem::path& path, const DiagOpFunction& op);

struct DiagOpHeader {
  CoreFunctionKind kind;
  double achieved_error = 0.0;
  CpTensor core;
};
DiagOpHeader load_diag_op(const std::filesystem::path& path);

}  // namespace fraclap
