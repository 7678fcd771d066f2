#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "fraclap/tensor.hpp"

namespace fraclap {

/// How much of a tensor to keep when reducing its rank.
///
/// Tolerance mode keeps the smallest rank whose discarded part is at most
/// `tolerance` relative to the Frobenius norm of the input, optionally capped
/// by `max_rank`. Fixed-rank mode keeps exactly `max_rank` (or fewer when the
/// input has fewer).
struct TruncationSpec {
  enum class Mode { Tolerance, FixedRank };

  Mode mode = Mode::Tolerance;
  double tolerance = 1e-8;
  std::optional<Index> max_rank;

  static TruncationSpec relative(double eps, std::optional<Index> max_rank = std::nullopt);
  static TruncationSpec fixed(Index rank);

  void validate() const;

  /// Rank to keep for descending singular values `s` of a tensor with
  /// Frobenius norm `norm`.
  Index select(const VectorXd& s, double norm) const;
};

/// Truncated SVD of a matrix as a d = 2 CP tensor (weights = singular values).
CpTensor svd_truncate(const MatrixXd& m, const TruncationSpec& spec);

/// Leading left singular vectors of every unfolding, core by projection.
TuckerTensor hosvd(const DenseTensor& t, std::span<const Index> ranks);

struct AlsOptions {
  int max_sweeps = 30;
  double stall_tol = 1e-9;  // relative change of the fit ||core||^2 / ||T||^2
};

/// Per-sweep fit history of an ALS run (fit = ||core||^2 / ||T||^2).
struct AlsTrace {
  std::vector<double> fits;
  int sweeps = 0;
};

TuckerTensor tucker_als(const DenseTensor& t, std::span<const Index> ranks, const TuckerTensor& init,
                        AlsOptions options = {}, AlsTrace* trace = nullptr);

/// Entry of a function-related tensor on grid level `level` (0 = coarsest).
using GridSampler = std::function<double(std::span<const Index> index, int level)>;

/// Entry cap for n0^(d+1) at the coarsest level of the multigrid scheme.
inline constexpr std::int64_t kMultigridCoarseCap = std::int64_t{1} << 32;

/// Multigrid Tucker: HOSVD + ALS on the coarsest grid, then ALS on each finer
/// grid started from the linearly interpolated, re-orthonormalized side
/// vectors of the previous level. `level_sizes` lists the univariate grid size
/// per level, coarse to fine; every mode of a level has the same size. Grid
/// point i of a level with n points sits at x = (i+1)/(n+1).
TuckerTensor multigrid_tucker(const GridSampler& sampler, int order, std::span<const Index> level_sizes,
                              std::span<const Index> ranks, AlsOptions options = {},
                              std::int64_t coarse_cap = kMultigridCoarseCap);

/// n_m = n0 * 2^(m-1), m = 1..levels.
std::vector<Index> dyadic_levels(Index n0, int levels);

/// Nested grids: (n_m + 1) = (n_finest + 1) / 2^(levels - m); stops early
/// when n_finest + 1 is no longer even or the grid would fall below min_size.
std::vector<Index> nested_levels(Index n_finest, int levels, Index min_size = 8);

/// Reduced HOSVD of a CP tensor: truncated SVD of the side matrices (weights
/// folded into mode 1), core by contraction. Never forms the full tensor.
TuckerTensor rhosvd(const CpTensor& a, std::span<const Index> ranks);

/// Canonical-to-Tucker: RHOSVD initial guess, ALS sweeps on the CP
/// representation, core by contraction.
TuckerTensor c2t(const CpTensor& a, const TruncationSpec& spec, int als_sweeps = 2);

/// Tucker-to-canonical by slice-wise SVD of the core.
CpTensor t2c(const TuckerTensor& t, const TruncationSpec& spec);

/// Rank truncation used inside PCG: factored SVD for d = 2, c2t followed by
/// t2c for d = 3. Never increases the rank.
CpTensor trunc(const CpTensor& x, const TruncationSpec& spec);

/// Frobenius norm computed from the projection of the tensor onto the
/// column spaces of its factors. Accurate for sums with heavy cancellation
/// (differences of nearly equal tensors), where cp_norm loses half the digits.
double cp_norm_projected(const CpTensor& x);

}  // namespace fraclap
