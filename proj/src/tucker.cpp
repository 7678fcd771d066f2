#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "als.hpp"
#include "fraclap/decomp.hpp"
#include "fraclap/errors.hpp"
#include "linalg.hpp"

namespace fraclap {

TruncationSpec TruncationSpec::relative(double eps, std::optional<Index> max_rank) {
  TruncationSpec s;
  s.mode = Mode::Tolerance;
  s.tolerance = eps;
  s.max_rank = max_rank;
  s.validate();
  return s;
}

TruncationSpec TruncationSpec::fixed(Index rank) {
  TruncationSpec s;
  s.mode = Mode::FixedRank;
  s.max_rank = rank;
  s.validate();
  return s;
}

void TruncationSpec::validate() const {
  if (mode == Mode::Tolerance && !(tolerance >= 0.0)) {
    throw InvalidArgument("TruncationSpec: tolerance must be non-negative");
  }
  if (mode == Mode::FixedRank && (!max_rank || *max_rank < 1)) {
    throw InvalidArgument("TruncationSpec: fixed-rank mode needs max_rank >= 1");
  }
  if (max_rank && *max_rank < 1) throw InvalidArgument("TruncationSpec: max_rank must be >= 1");
}

Index TruncationSpec::select(const VectorXd& s, double norm) const {
  Index r = s.size();
  if (mode == Mode::Tolerance) r = detail::rank_for_tail(s, tolerance * norm);
  if (max_rank) r = std::min(r, *max_rank);
  return r;
}

CpTensor svd_truncate(const MatrixXd& m, const TruncationSpec& spec) {
  spec.validate();
  if (!m.allFinite()) throw InvalidArgument("svd_truncate: non-finite entries");
  detail::ThinSvd svd = detail::thin_svd(m);
  const Index r = spec.select(svd.s, m.norm());
  if (r == 0) return CpTensor(Dims{m.rows(), m.cols()});
  return CpTensor(svd.s.head(r), {svd.u.leftCols(r), svd.v.leftCols(r)});
}

TuckerTensor hosvd(const DenseTensor& t, std::span<const Index> ranks) {
  if (static_cast<int>(ranks.size()) != t.order()) throw InvalidArgument("hosvd: one rank per mode required");
  std::vector<MatrixXd> sides;
  for (int l = 0; l < t.order(); ++l) {
    const Index r = ranks[static_cast<std::size_t>(l)];
    if (r < 0 || r > t.dims()[static_cast<std::size_t>(l)]) {
      throw InvalidArgument("hosvd: rank " + std::to_string(r) + " exceeds mode size in mode " + std::to_string(l));
    }
    sides.push_back(detail::leading_left_vectors(t.unfold(l), r));
  }
  DenseTensor core = multilinear_transpose_product(t, sides);
  return TuckerTensor(std::move(core), std::move(sides));
}

namespace detail {

SliceSource dense_source(const DenseTensor& t) {
  SliceSource src;
  src.dims = t.dims();
  src.slice = [&t](Index i, MatrixXd& s) {
    const Dims& d = t.dims();
    const Index n1 = d[0];
    const Index n2 = d[1];
    const Index n3 = d.size() == 3 ? d[2] : 1;
    s.resize(n2, n3);
    const double* p = t.data().data();
    for (Index k = 0; k < n3; ++k) {
      for (Index j = 0; j < n2; ++j) s(j, k) = p[i + n1 * (j + n2 * k)];
    }
  };
  return src;
}

SliceSource sampled_source(const GridSampler& sampler, int order, Index n, int level) {
  SliceSource src;
  src.dims = Dims(static_cast<std::size_t>(order), n);
  src.slice = [&sampler, order, n, level](Index i, MatrixXd& s) {
    const Index n3 = order == 3 ? n : 1;
    s.resize(n, n3);
    std::array<Index, 3> idx{i, 0, 0};
    for (Index k = 0; k < n3; ++k) {
      idx[2] = k;
      for (Index j = 0; j < n; ++j) {
        idx[1] = j;
        s(j, k) = sampler(std::span<const Index>(idx.data(), static_cast<std::size_t>(order)), level);
      }
    }
  };
  return src;
}

DenseTensor materialize(const GridSampler& sampler, int order, Index n, int level) {
  DenseTensor t(Dims(static_cast<std::size_t>(order), n));
  std::array<Index, 3> idx{0, 0, 0};
  const Index n3 = order == 3 ? n : 1;
  Index lin = 0;
  for (Index k = 0; k < n3; ++k) {
    idx[2] = k;
    for (Index j = 0; j < n; ++j) {
      idx[1] = j;
      for (Index i = 0; i < n; ++i) {
        idx[0] = i;
        t.data()(lin++) = sampler(std::span<const Index>(idx.data(), static_cast<std::size_t>(order)), level);
      }
    }
  }
  return t;
}

namespace {

// Projection of the tensor onto all side spaces except `mode`, unfolded
// along `mode`: n_mode x prod_{m != mode} r_m.
MatrixXd project_except(const SliceSource& src, const std::vector<MatrixXd>& sides, int mode,
                        double* norm2) {
  const int d = static_cast<int>(src.dims.size());
  const Index n1 = src.dims[0];
  MatrixXd s;
  double acc = 0.0;
  MatrixXd w;
  if (d == 2) {
    const MatrixXd& v0 = sides[0];
    const MatrixXd& v1 = sides[1];
    w = mode == 0 ? MatrixXd(n1, v1.cols()) : MatrixXd::Zero(src.dims[1], v0.cols());
    for (Index i = 0; i < n1; ++i) {
      src.slice(i, s);
      if (norm2 != nullptr) acc += s.squaredNorm();
      if (mode == 0) {
        w.row(i).noalias() = (v1.transpose() * s.col(0)).transpose();
      } else {
        w.noalias() += s.col(0) * v0.row(i);
      }
    }
  } else {
    const MatrixXd& v0 = sides[0];
    const MatrixXd& v1 = sides[1];
    const MatrixXd& v2 = sides[2];
    const Index r0 = v0.cols();
    const Index r1 = v1.cols();
    const Index r2 = v2.cols();
    if (mode == 0) {
      w.resize(n1, r1 * r2);
    } else if (mode == 1) {
      w = MatrixXd::Zero(src.dims[1], r0 * r2);
    } else {
      w = MatrixXd::Zero(src.dims[2], r0 * r1);
    }
    MatrixXd tmp;
    for (Index i = 0; i < n1; ++i) {
      src.slice(i, s);
      if (norm2 != nullptr) acc += s.squaredNorm();
      if (mode == 0) {
        tmp.noalias() = v1.transpose() * s * v2;
        w.row(i) = Eigen::Map<const Eigen::RowVectorXd>(tmp.data(), r1 * r2);
      } else if (mode == 1) {
        tmp.noalias() = s * v2;
        for (Index c = 0; c < r2; ++c) w.middleCols(r0 * c, r0).noalias() += tmp.col(c) * v0.row(i);
      } else {
        tmp.noalias() = s.transpose() * v1;
        for (Index b = 0; b < r1; ++b) w.middleCols(r0 * b, r0).noalias() += tmp.col(b) * v0.row(i);
      }
    }
  }
  if (norm2 != nullptr) *norm2 = acc;
  return w;
}

}  // namespace

TuckerTensor run_als(const SliceSource& source, std::vector<MatrixXd> sides, const AlsOptions& options,
                     AlsTrace* trace) {
  const int d = static_cast<int>(source.dims.size());
  if (d != 2 && d != 3) throw InvalidArgument("Tucker ALS: order must be 2 or 3");
  Dims ranks;
  for (const auto& s : sides) ranks.push_back(s.cols());

  double norm2 = -1.0;
  DenseTensor core(ranks);
  double prev_fit = -1.0;
  int sweep = 0;
  const int max_sweeps = std::max(1, options.max_sweeps);
  while (sweep < max_sweeps) {
    ++sweep;
    MatrixXd w;
    for (int mode = 0; mode < d; ++mode) {
      w = project_except(source, sides, mode, norm2 < 0.0 ? &norm2 : nullptr);
      sides[static_cast<std::size_t>(mode)] = leading_left_vectors(w, ranks[static_cast<std::size_t>(mode)]);
    }
    const MatrixXd& last = sides[static_cast<std::size_t>(d - 1)];
    const MatrixXd c = w.transpose() * last;
    core.data() = Eigen::Map<const VectorXd>(c.data(), c.size());

    const double fit = norm2 > 0.0 ? core.data().squaredNorm() / norm2 : 1.0;
    if (trace != nullptr) trace->fits.push_back(fit);
    if (norm2 <= 0.0) break;
    if (1.0 - fit <= 8.0 * std::numeric_limits<double>::epsilon()) break;
    if (prev_fit >= 0.0 && std::abs(fit - prev_fit) <= options.stall_tol * fit) break;
    prev_fit = fit;
  }
  if (trace != nullptr) trace->sweeps = sweep;
  return TuckerTensor(std::move(core), std::move(sides));
}

}  // namespace detail

TuckerTensor tucker_als(const DenseTensor& t, std::span<const Index> ranks, const TuckerTensor& init,
                        AlsOptions options, AlsTrace* trace) {
  if (static_cast<int>(ranks.size()) != t.order() || init.order() != t.order()) {
    throw InvalidArgument("tucker_als: order mismatch between tensor, ranks and initial guess");
  }
  std::vector<MatrixXd> sides;
  for (int l = 0; l < t.order(); ++l) {
    const auto ul = static_cast<std::size_t>(l);
    const MatrixXd& s = init.side(l);
    if (s.rows() != t.dims()[ul] || s.cols() != ranks[ul]) {
      throw InvalidArgument("tucker_als: initial side matrix " + std::to_string(l) + " does not match ranks");
    }
    sides.push_back(s);
  }
  return detail::run_als(detail::dense_source(t), std::move(sides), options, trace);
}

std::vector<Index> dyadic_levels(Index n0, int levels) {
  if (n0 < 1 || levels < 1) throw InvalidArgument("dyadic_levels: need n0 >= 1 and at least one level");
  std::vector<Index> out;
  for (int m = 0; m < levels; ++m) out.push_back(n0 << m);
  return out;
}

std::vector<Index> nested_levels(Index n_finest, int levels, Index min_size) {
  if (n_finest < 1 || levels < 1) throw InvalidArgument("nested_levels: need n >= 1 and at least one level");
  std::vector<Index> out{n_finest};
  Index n = n_finest;
  while (static_cast<int>(out.size()) < levels && (n + 1) % 2 == 0 && (n + 1) / 2 - 1 >= min_size) {
    n = (n + 1) / 2 - 1;
    out.push_back(n);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

namespace {

// Linear interpolation in x = (i+1)/(n+1) with zero end values, followed by
// re-orthonormalization.
MatrixXd interpolate_side(const MatrixXd& coarse, Index n_fine) {
  const Index nc = coarse.rows();
  MatrixXd fine(n_fine, coarse.cols());
  for (Index j = 0; j < n_fine; ++j) {
    const double pos = static_cast<double>(j + 1) / static_cast<double>(n_fine + 1) * static_cast<double>(nc + 1);
    // pos is in coarse index units where coarse point i sits at i+1
    const auto left = static_cast<Index>(std::floor(pos));
    const double t = pos - static_cast<double>(left);
    for (Index c = 0; c < coarse.cols(); ++c) {
      const double a = left >= 1 && left <= nc ? coarse(left - 1, c) : 0.0;
      const double b = left + 1 >= 1 && left + 1 <= nc ? coarse(left, c) : 0.0;
      fine(j, c) = (1.0 - t) * a + t * b;
    }
  }
  MatrixXd q = detail::orthonormalize(fine);
  detail::fix_signs(q);
  if (q.cols() < coarse.cols()) q = detail::leading_left_vectors(q, coarse.cols());
  return q;
}

}  // namespace

TuckerTensor multigrid_tucker(const GridSampler& sampler, int order, std::span<const Index> level_sizes,
                              std::span<const Index> ranks, AlsOptions options, std::int64_t coarse_cap) {
  if (order != 2 && order != 3) throw InvalidArgument("multigrid_tucker: order must be 2 or 3");
  if (level_sizes.empty()) throw InvalidArgument("multigrid_tucker: at least one level required");
  if (static_cast<int>(ranks.size()) != order) throw InvalidArgument("multigrid_tucker: one rank per mode");
  const Index n0 = level_sizes[0];
  for (Index r : ranks) {
    if (r < 1 || r > n0) throw InvalidArgument("multigrid_tucker: ranks must lie in [1, n0]");
  }
  for (std::size_t m = 1; m < level_sizes.size(); ++m) {
    if (level_sizes[m] <= level_sizes[m - 1]) throw InvalidArgument("multigrid_tucker: levels must grow");
  }
  double work = 1.0;
  for (int l = 0; l <= order; ++l) work *= static_cast<double>(n0);
  if (work > static_cast<double>(coarse_cap)) {
    throw ResourceLimit("multigrid_tucker: coarsest grid too large for HOSVD (n0^(d+1) above cap)");
  }

  DenseTensor coarse = detail::materialize(sampler, order, n0, 0);
  TuckerTensor t = hosvd(coarse, ranks);
  t = detail::run_als(detail::dense_source(coarse), t.sides(), options, nullptr);

  for (std::size_t m = 1; m < level_sizes.size(); ++m) {
    const Index n = level_sizes[m];
    std::vector<MatrixXd> sides;
    for (const auto& s : t.sides()) sides.push_back(interpolate_side(s, n));
    double numel = 1.0;
    for (int l = 0; l < order; ++l) numel *= static_cast<double>(n);
    const int level = static_cast<int>(m);
    if (numel <= static_cast<double>(kDefaultDenseCap)) {
      const DenseTensor dense = detail::materialize(sampler, order, n, level);
      t = detail::run_als(detail::dense_source(dense), std::move(sides), options, nullptr);
    } else {
      t = detail::run_als(detail::sampled_source(sampler, order, n, level), std::move(sides), options, nullptr);
    }
  }
  return t;
}

}  // namespace fraclap
