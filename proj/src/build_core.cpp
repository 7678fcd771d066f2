#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "fraclap/errors.hpp"
#include "fraclap/fracop.hpp"
#include "linalg.hpp"

namespace fraclap {

namespace {

std::vector<VectorXd> mode_values(const CoreFunctionKind& kind, const EigenSpectrum& spectrum) {
  std::vector<VectorXd> mu;
  for (const auto& m : spectrum.modes()) mu.push_back(kind.mode_values(m.eigenvalues()));
  return mu;
}

MatrixXd core_matrix(const CoreFunctionKind& kind, const std::vector<VectorXd>& mu) {
  MatrixXd g(mu[0].size(), mu[1].size());
  for (Index j = 0; j < g.cols(); ++j) {
    for (Index i = 0; i < g.rows(); ++i) g(i, j) = kind.evaluate_sum(mu[0](i) + mu[1](j));
  }
  return g;
}

CpTensor from_svd(const VectorXd& w, const MatrixXd& u, const MatrixXd& v, Index k) {
  return CpTensor(w.head(k), {u.leftCols(k), v.leftCols(k)});
}

// Adaptive randomized range finder: grows an orthonormal basis of range(G)
// in blocks until the explicit residual is small enough or `cap` is hit.
CpTensor randomized_core(const MatrixXd& g, const TruncationSpec& spec, std::uint64_t seed) {
  const double gnorm = g.norm();
  const Index cap = std::min<Index>(std::min(g.rows(), g.cols()),
                                     spec.max_rank ? *spec.max_rank + 16 : std::min(g.rows(), g.cols()));
  const double target = spec.mode == TruncationSpec::Mode::Tolerance ? 0.5 * spec.tolerance * gnorm : 0.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  MatrixXd q(g.rows(), 0);
  const Index block = 16;
  while (q.cols() < cap) {
    const Index add = std::min(block, cap - q.cols());
    MatrixXd omega(g.cols(), add);
    for (Index j = 0; j < omega.cols(); ++j) {
      for (Index i = 0; i < omega.rows(); ++i) omega(i, j) = normal(rng);
    }
    MatrixXd y = g * omega;
    for (int pass = 0; pass < 2; ++pass) {
      if (q.cols() > 0) y -= q * (q.transpose() * y);
    }
    MatrixXd qy = detail::orthonormalize(y);
    MatrixXd nq(g.rows(), q.cols() + qy.cols());
    nq << q, qy;
    q = std::move(nq);
    if (spec.mode == TruncationSpec::Mode::FixedRank && q.cols() >= cap) break;
    if (spec.mode == TruncationSpec::Mode::Tolerance) {
      const double res = (g - q * (q.transpose() * g)).norm();
      if (res <= target) break;
    }
  }
  const MatrixXd b = q.transpose() * g;
  detail::ThinSvd svd = detail::thin_svd(b);
  const Index k = std::max<Index>(1, spec.select(svd.s, gnorm));
  return CpTensor(svd.s.head(k), {q * svd.u.leftCols(k), svd.v.leftCols(k)});
}

CpTensor dense_svd_core(const CoreFunctionKind& kind, const EigenSpectrum& spectrum, const TruncationSpec& spec,
                        const CoreBuildOptions& options) {
  if (spectrum.order() != 2) throw InvalidArgument("dense-svd core construction is for d = 2 only");
  const std::vector<VectorXd> mu = mode_values(kind, spectrum);
  const double entries = static_cast<double>(mu[0].size()) * static_cast<double>(mu[1].size());
  if (entries > 4096.0 * 4096.0) throw ResourceLimit("dense-svd core construction: grid above 4096 x 4096");
  const MatrixXd g = core_matrix(kind, mu);
  if (entries > double(1 << 21)) return randomized_core(g, spec, options.seed);

  const double gnorm = g.norm();
  if (mu[0].size() == mu[1].size() && mu[0] == mu[1]) {
    // Symmetric core: eigen-decomposition, ordered by |eigenvalue|.
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(g);
    const Index n = g.rows();
    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) {
      return std::abs(eig.eigenvalues()(x)) > std::abs(eig.eigenvalues()(y));
    });
    VectorXd s(n);
    VectorXd w(n);
    MatrixXd u(n, n);
    for (Index i = 0; i < n; ++i) {
      const Index o = order[static_cast<std::size_t>(i)];
      w(i) = eig.eigenvalues()(o);
      s(i) = std::abs(w(i));
      u.col(i) = eig.eigenvectors().col(o);
    }
    detail::fix_signs(u);
    const Index k = std::max<Index>(1, spec.select(s, gnorm));
    return from_svd(w, u, u, k);
  }
  detail::ThinSvd svd = detail::thin_svd(g);
  const Index k = std::max<Index>(1, spec.select(svd.s, gnorm));
  return from_svd(svd.s, svd.u, svd.v, k);
}

// Relative Frobenius error of a Tucker approximation of the core
// (exact for small grids, sampled otherwise).
double tucker_error_impl(const CoreFunctionKind& kind, const EigenSpectrum& spectrum, const TuckerTensor& t,
                         std::uint64_t seed) {
  const Dims dims = spectrum.dims();
  double total = 1.0;
  for (Index n : dims) total *= static_cast<double>(n);
  if (total <= double(1 << 22)) {
    const DenseTensor exact = core_dense(kind, spectrum);
    const DenseTensor approx = tucker_to_dense(t);
    return (approx.data() - exact.data()).norm() / exact.norm();
  }
  const int d = spectrum.order();
  const std::vector<VectorXd> mu = mode_values(kind, spectrum);
  std::mt19937_64 rng(seed);
  const Dims r = t.ranks();
  double err2 = 0.0;
  double ref2 = 0.0;
  std::vector<Index> idx(static_cast<std::size_t>(d));
  for (int s = 0; s < 10002; ++s) {
    for (int l = 0; l < d; ++l) {
      const auto ul = static_cast<std::size_t>(l);
      if (s == 0) {
        idx[ul] = 0;
      } else if (s == 1) {
        idx[ul] = dims[ul] - 1;
      } else {
        std::uniform_int_distribution<Index> pick(0, dims[ul] - 1);
        idx[ul] = pick(rng);
      }
    }
    double sum = 0.0;
    for (int l = 0; l < d; ++l) sum += mu[static_cast<std::size_t>(l)](idx[static_cast<std::size_t>(l)]);
    const double exact = kind.evaluate_sum(sum);
    // core x_l v_l(i_l)
    const VectorXd v0 = t.side(0).row(idx[0]).transpose();
    const VectorXd v1 = t.side(1).row(idx[1]).transpose();
    const Eigen::Map<const MatrixXd> c01(t.core().data().data(), r[0], t.core().numel() / r[0]);
    const VectorXd rest = c01.transpose() * v0;  // r1 (x r2)
    double approx = 0.0;
    if (d == 2) {
      approx = rest.dot(v1);
    } else {
      const VectorXd v2 = t.side(2).row(idx[2]).transpose();
      const Eigen::Map<const MatrixXd> c12(rest.data(), r[1], r[2]);
      approx = v1.dot(c12 * v2);
    }
    err2 += (approx - exact) * (approx - exact);
    ref2 += exact * exact;
  }
  return std::sqrt(err2 / ref2);
}

// Univariate grid sizes for the multigrid scheme, coarse to fine.
std::vector<Index> grid_sequence(Index n, const CoreBuildOptions& options) {
  std::vector<Index> sizes{n};
  while (static_cast<int>(sizes.size()) < options.multigrid_levels) {
    const Index next = (sizes.back() + 1) / 2 - 1;
    if (next < options.multigrid_min_size) break;
    sizes.push_back(next);
  }
  std::reverse(sizes.begin(), sizes.end());
  return sizes;
}

TuckerTensor tucker_core_impl(const CoreFunctionKind& kind, const EigenSpectrum& spectrum, Index rank,
                              const CoreBuildOptions& options) {
  const int d = spectrum.order();
  const Dims dims = spectrum.dims();
  bool uniform = true;
  bool laplacian = true;
  for (const auto& m : spectrum.modes()) {
    uniform = uniform && m.size() == dims[0];
    laplacian = laplacian && m.is_laplacian();
  }
  const AlsOptions als;
  if (!uniform) {
    const DenseTensor exact = core_dense(kind, spectrum);
    Dims ranks;
    for (Index n : dims) ranks.push_back(std::min(rank, n));
    const TuckerTensor init = hosvd(exact, ranks);
    return tucker_als(exact, ranks, init, als);
  }

  const Index n = dims[0];
  std::vector<Index> sizes = laplacian ? grid_sequence(n, options) : std::vector<Index>{n};
  // Mode values per level; coarse levels sample the same continuous
  // eigenvalue curve lambda(x) = 4 (n+1)^2 sin^2(pi x / 2), x = (i+1)/(m+1).
  std::vector<std::vector<VectorXd>> mu(sizes.size());
  for (std::size_t lev = 0; lev < sizes.size(); ++lev) {
    const Index m = sizes[lev];
    if (m == n) {
      mu[lev] = mode_values(kind, spectrum);
      continue;
    }
    VectorXd lam(m);
    const double scale = 4.0 * static_cast<double>(n + 1) * static_cast<double>(n + 1);
    for (Index i = 0; i < m; ++i) {
      const double x = static_cast<double>(i + 1) / static_cast<double>(m + 1);
      const double s = std::sin(std::numbers::pi * x / 2.0);
      lam(i) = scale * s * s;
    }
    const VectorXd v = kind.mode_values(lam);
    mu[lev] = std::vector<VectorXd>(static_cast<std::size_t>(d), v);
  }
  const GridSampler sampler = [&kind, &mu, d](std::span<const Index> idx, int level) {
    const auto& m = mu[static_cast<std::size_t>(level)];
    double s = 0.0;
    for (int l = 0; l < d; ++l) s += m[static_cast<std::size_t>(l)](idx[static_cast<std::size_t>(l)]);
    return kind.evaluate_sum(s);
  };
  const Index r = std::min(rank, sizes.front());
  const Dims ranks(static_cast<std::size_t>(d), r);
  return multigrid_tucker(sampler, d, sizes, ranks, als);
}

CpTensor multigrid_core(const CoreFunctionKind& kind, const EigenSpectrum& spectrum, const TruncationSpec& spec,
                        const CoreBuildOptions& options) {
  if (spec.mode == TruncationSpec::Mode::FixedRank || options.tucker_rank) {
    const Index r = options.tucker_rank ? *options.tucker_rank : *spec.max_rank;
    if (r < 1) throw InvalidArgument("multigrid core: Tucker rank must be >= 1");
    const TuckerTensor t = tucker_core_impl(kind, spectrum, r, options);
    TruncationSpec tight = TruncationSpec::relative(spec.mode == TruncationSpec::Mode::FixedRank ? 1e-10
                                                                                              : spec.tolerance);
    if (spec.mode == TruncationSpec::Mode::Tolerance) tight.max_rank = spec.max_rank;
    return t2c(t, tight);
  }
  const double budget = spec.tolerance / std::sqrt(2.0);
  const Index cap = spec.max_rank ? std::min(*spec.max_rank, options.tucker_rank_cap) : options.tucker_rank_cap;
  Index nmin = spectrum.dims()[0];
  for (Index n : spectrum.dims()) nmin = std::min(nmin, n);
  TuckerTensor best;
  for (Index r : {2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 24, 28, 32, 36, 40, 48, 56, 64}) {
    const Index rr = std::min({r, cap, nmin});
    best = tucker_core_impl(kind, spectrum, rr, options);
    if (tucker_error_impl(kind, spectrum, best, options.seed) <= budget) break;
    if (rr == cap || rr == nmin) break;
  }
  return t2c(best, TruncationSpec::relative(budget, spec.max_rank));
}

CpTensor sinc_core(const CoreFunctionKind& kind, const EigenSpectrum& spectrum, const TruncationSpec& spec,
                   const CoreBuildOptions& options) {
  if (kind.tag != CoreKind::G1) throw InvalidArgument("sinc core construction applies to g1 only");
  std::optional<DiagOpFunction> op;
  if (options.sinc_m) {
    op = sinc_inverse_power(spectrum, kind, *options.sinc_m, options.sinc_step);
  } else {
    for (int k = 2;; ++k) {
      op = sinc_inverse_power(spectrum, kind, k * k, options.sinc_step);
      const bool met = spec.mode == TruncationSpec::Mode::Tolerance && op->achieved_error <= 0.5 * spec.tolerance;
      if (met || (k + 1) * (k + 1) > options.sinc_max_m) break;
    }
  }
  TruncationSpec rest = spec;
  if (rest.mode == TruncationSpec::Mode::Tolerance) rest.tolerance *= 0.5;
  return trunc(op->core, rest);
}

}  // namespace

TuckerTensor build_core_tucker(const CoreFunctionKind& kind, const EigenSpectrum& spectrum, Index rank,
                               const CoreBuildOptions& options) {
  kind.validate();
  if (rank < 1) throw InvalidArgument("build_core_tucker: rank must be >= 1");
  return tucker_core_impl(kind, spectrum, rank, options);
}

double tucker_core_error(const CoreFunctionKind& kind, const EigenSpectrum& spectrum, const TuckerTensor& t,
                         std::uint64_t seed) {
  kind.validate();
  if (t.dims() != spectrum.dims()) throw InvalidArgument("tucker_core_error: dims do not match the spectrum");
  return tucker_error_impl(kind, spectrum, t, seed);
}

DiagOpFunction build_core(const CoreFunctionKind& kind, const EigenSpectrum& spectrum, const TruncationSpec& spec,
                          CoreMethod method, const CoreBuildOptions& options) {
  kind.validate();
  spec.validate();
  CpTensor core;
  switch (method) {
    case CoreMethod::Sinc:
      core = sinc_core(kind, spectrum, spec, options);
      break;
    case CoreMethod::DenseSvd:
      core = dense_svd_core(kind, spectrum, spec, options);
      break;
    case CoreMethod::MultigridTucker:
      core = multigrid_core(kind, spectrum, spec, options);
      break;
  }
  DiagOpFunction op{spectrum, kind, std::move(core), 0.0};
  op.achieved_error = core_error(kind, spectrum, op.core, options.seed).frobenius;
  return op;
}

}  // namespace fraclap
