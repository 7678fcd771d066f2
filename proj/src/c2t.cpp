#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

#include "fraclap/decomp.hpp"
#include "fraclap/errors.hpp"
#include "linalg.hpp"

namespace fraclap {

namespace {

// Khatri-Rao product of r_m x R matrices: (prod r_m) x R, first matrix
// index fastest.
MatrixXd khatri_rao(const std::vector<const MatrixXd*>& mats) {
  const Index r = mats.front()->cols();
  MatrixXd out = *mats.front();
  for (std::size_t m = 1; m < mats.size(); ++m) {
    const MatrixXd& b = *mats[m];
    MatrixXd next(out.rows() * b.rows(), r);
    for (Index k = 0; k < r; ++k) {
      for (Index i = 0; i < b.rows(); ++i) next.col(k).segment(i * out.rows(), out.rows()) = out.col(k) * b(i, k);
    }
    out = std::move(next);
  }
  return out;
}

// Weighted mode unfolding of a CP tensor projected on the other modes:
// U_mode diag(w) KR(P_m)^T with P_m = r_m x R.
MatrixXd projected_unfolding(const CpTensor& a, int mode, const std::vector<MatrixXd>& proj) {
  std::vector<const MatrixXd*> others;
  for (int m = 0; m < a.order(); ++m) {
    if (m != mode) others.push_back(&proj[static_cast<std::size_t>(m)]);
  }
  const MatrixXd kr = khatri_rao(others);
  return (a.factor(mode) * a.weights().asDiagonal()) * kr.transpose();
}

DenseTensor project_core(const CpTensor& a, const std::vector<MatrixXd>& sides) {
  std::vector<MatrixXd> f;
  for (int l = 0; l < a.order(); ++l) f.push_back(sides[static_cast<std::size_t>(l)].transpose() * a.factor(l));
  return cp_to_dense(CpTensor(a.weights(), std::move(f)));
}

TuckerTensor zero_tucker(const Dims& dims, const Dims& ranks) {
  std::vector<MatrixXd> sides;
  for (std::size_t l = 0; l < dims.size(); ++l) {
    sides.push_back(MatrixXd::Identity(dims[l], std::min(ranks[l], dims[l])));
  }
  Dims r;
  for (const auto& s : sides) r.push_back(s.cols());
  return TuckerTensor(DenseTensor(r), std::move(sides));
}

struct ModeBasis {
  VectorXd s;     // all singular values of the unfolding, descending
  MatrixXd left;  // matching left singular vectors, n x q
};

// Above this many entries in the small unfolding (or its Khatri-Rao
// factor) the spectra come from Gram matrices instead.
constexpr double kExactUnfoldingCap = double(1 << 21);

// Exact singular values and left vectors of every mode unfolding of a CP
// tensor, from thin QR factors of its side matrices.
std::vector<ModeBasis> unfolding_bases(const CpTensor& a) {
  const int d = a.order();
  const Index r = a.rank();
  std::vector<MatrixXd> q(static_cast<std::size_t>(d));
  std::vector<MatrixXd> rf(static_cast<std::size_t>(d));
  for (int l = 0; l < d; ++l) {
    const auto ul = static_cast<std::size_t>(l);
    const MatrixXd& u = a.factor(l);
    q[ul] = detail::orthonormalize(u);
    rf[ul] = q[ul].transpose() * u;
  }
  std::vector<ModeBasis> out(static_cast<std::size_t>(d));
  for (int l = 0; l < d; ++l) {
    const auto ul = static_cast<std::size_t>(l);
    double other = 1.0;
    for (int m = 0; m < d; ++m) {
      if (m != l) other *= static_cast<double>(rf[static_cast<std::size_t>(m)].rows());
    }
    const MatrixXd lead = rf[ul] * a.weights().asDiagonal();
    MatrixXd vecs;
    VectorXd s;
    if (other * static_cast<double>(std::max(rf[ul].rows(), r)) <= kExactUnfoldingCap) {
      const MatrixXd small = projected_unfolding(CpTensor(a.weights(), rf), l, rf);
      detail::ThinSvd svd = detail::thin_svd(small, false);
      vecs = std::move(svd.u);
      s = std::move(svd.s);
    } else {
      MatrixXd h = MatrixXd::Ones(r, r);
      for (int m = 0; m < d; ++m) {
        if (m == l) continue;
        const MatrixXd& f = a.factor(m);
        h.array() *= (f.transpose() * f).array();
      }
      const MatrixXd gram = lead * h * lead.transpose();
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
      const Index k = gram.rows();
      vecs = eig.eigenvectors().rowwise().reverse();
      s.resize(k);
      for (Index i = 0; i < k; ++i) s(i) = std::sqrt(std::max(0.0, eig.eigenvalues()(k - 1 - i)));
    }
    MatrixXd left = q[ul] * vecs;
    detail::fix_signs(left);
    out[ul] = ModeBasis{std::move(s), std::move(left)};
  }
  return out;
}

// Normalized columns, exactly repeated or collinear terms merged, zero terms
// dropped.
CpTensor merge_collinear(const CpTensor& x) {
  const CpTensor a = cp_normalize(x);
  const Index r = a.rank();
  VectorXd w = a.weights();
  std::vector<bool> alive(static_cast<std::size_t>(r), true);
  std::vector<MatrixXd> grams;
  for (const auto& f : a.factors()) grams.push_back(f.transpose() * f);
  for (Index j = 0; j < r; ++j) {
    if (!alive[static_cast<std::size_t>(j)]) continue;
    for (Index k = j + 1; k < r; ++k) {
      if (!alive[static_cast<std::size_t>(k)]) continue;
      double sign = 1.0;
      bool same = true;
      for (const auto& g : grams) {
        if (std::abs(g(j, k)) < 1.0 - 1e-13) {
          same = false;
          break;
        }
        sign *= g(j, k) < 0.0 ? -1.0 : 1.0;
      }
      if (!same) continue;
      w(j) += sign * w(k);
      alive[static_cast<std::size_t>(k)] = false;
    }
  }
  const double wmax = w.cwiseAbs().maxCoeff();
  std::vector<Index> keep;
  for (Index j = 0; j < r; ++j) {
    if (alive[static_cast<std::size_t>(j)] && std::abs(w(j)) > 1e-15 * wmax) keep.push_back(j);
  }
  if (static_cast<Index>(keep.size()) == r) return a;
  VectorXd nw(static_cast<Index>(keep.size()));
  std::vector<MatrixXd> nf;
  for (int l = 0; l < a.order(); ++l) nf.emplace_back(a.dims()[static_cast<std::size_t>(l)], nw.size());
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const auto ci = static_cast<Index>(c);
    nw(ci) = w(keep[c]);
    for (int l = 0; l < a.order(); ++l) nf[static_cast<std::size_t>(l)].col(ci) = a.factor(l).col(keep[c]);
  }
  if (nw.size() == 0) return CpTensor(a.dims());
  return CpTensor(std::move(nw), std::move(nf));
}

// Above this CP rank the exact unfolding spectra (O(d n R^2)) give way to
// a randomized range finder.
constexpr Index kSketchRankThreshold = 1024;
// Once R >= n the exact bases cost O(n^3) per mode; sketch instead on large
// 3D grids.
constexpr Index kSketchMinGrid = 128;
constexpr Index kSketchMinRank = 256;

// Mode unfolding applied to Khatri-Rao products of Gaussian vectors.
MatrixXd sketch_unfolding(const CpTensor& x, int mode, Index count, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  MatrixXd z = MatrixXd::Ones(x.rank(), count);
  for (int m = 0; m < x.order(); ++m) {
    if (m == mode) continue;
    MatrixXd omega(x.dims()[static_cast<std::size_t>(m)], count);
    for (Index j = 0; j < count; ++j) {
      for (Index i = 0; i < omega.rows(); ++i) omega(i, j) = normal(rng);
    }
    z.array() *= (x.factor(m).transpose() * omega).array();
  }
  return x.factor(mode) * (x.weights().asDiagonal() * z);
}

// Randomized Tucker compression of a high-rank CP tensor. Each probe has
// identity covariance, so mean squared probe norms estimate ||T||^2 and the
// squared residual outside the current basis.
TuckerTensor c2t_sketched(const CpTensor& x, const TruncationSpec& spec) {
  const int d = x.order();
  const auto sqrt_d = std::sqrt(static_cast<double>(d));
  const Index probes = 8;
  const Index block = 16;
  std::mt19937_64 rng(0x51A7C0DEULL + static_cast<std::uint64_t>(x.rank()));
  std::vector<MatrixXd> bases;
  double norm2 = 0.0;
  int norm_samples = 0;
  for (int l = 0; l < d; ++l) {
    const Index n = x.dims()[static_cast<std::size_t>(l)];
    const Index cap = std::min(n, x.rank());
    MatrixXd q(n, 0);
    if (spec.mode == TruncationSpec::Mode::FixedRank) {
      q = detail::orthonormalize(sketch_unfolding(x, l, std::min(cap, *spec.max_rank + 10), rng));
    } else {
      while (true) {
        const MatrixXd test = sketch_unfolding(x, l, probes, rng);
        norm2 += test.squaredNorm() / static_cast<double>(probes);
        ++norm_samples;
        const double target = 0.5 * spec.tolerance * std::sqrt(norm2 / norm_samples) / sqrt_d;
        MatrixXd res = test - q * (q.transpose() * test);
        const double res_norm = std::sqrt(res.squaredNorm() / static_cast<double>(probes));
        if ((q.cols() > 0 && res_norm <= target) || q.cols() >= cap) break;
        MatrixXd y(n, probes + block);
        y << test, sketch_unfolding(x, l, block, rng);
        MatrixXd grown(n, q.cols() + y.cols());
        grown << q, y;
        q = detail::orthonormalize(grown);
        if (q.cols() > cap) q = q.leftCols(cap).eval();
      }
    }
    bases.push_back(std::move(q));
  }

  // Exact HOSVD of the projected core trims the oversampled bases.
  const DenseTensor core0 = project_core(x, bases);
  const double cnorm = core0.norm();
  std::vector<MatrixXd> small;
  for (int l = 0; l < d; ++l) {
    VectorXd s;
    MatrixXd u = detail::leading_left_vectors(core0.unfold(l), core0.dims()[static_cast<std::size_t>(l)], &s);
    TruncationSpec per_mode = spec;
    per_mode.tolerance = 0.85 * spec.tolerance / sqrt_d;
    const Index r = std::clamp<Index>(per_mode.select(s, cnorm), 1, u.cols());
    small.push_back(u.leftCols(r));
  }
  DenseTensor core = multilinear_transpose_product(core0, small);
  std::vector<MatrixXd> sides;
  for (int l = 0; l < d; ++l) {
    sides.push_back(bases[static_cast<std::size_t>(l)] * small[static_cast<std::size_t>(l)]);
  }
  return TuckerTensor(std::move(core), std::move(sides));
}

}  // namespace

TuckerTensor rhosvd(const CpTensor& a, std::span<const Index> ranks) {
  if (static_cast<int>(ranks.size()) != a.order()) throw InvalidArgument("rhosvd: one rank per mode required");
  const Index r = a.rank();
  Dims rk(ranks.begin(), ranks.end());
  if (r == 0) return zero_tucker(a.dims(), rk);
  std::vector<MatrixXd> sides;
  for (int l = 0; l < a.order(); ++l) {
    const auto ul = static_cast<std::size_t>(l);
    const Index limit = std::min(a.dims()[ul], r);
    if (rk[ul] < 1 || rk[ul] > limit) {
      throw InvalidArgument("rhosvd: rank " + std::to_string(rk[ul]) + " incompatible with side matrix " +
                            std::to_string(l) + " (at most " + std::to_string(limit) + ")");
    }
    const MatrixXd u = l == 0 ? MatrixXd(a.factor(0) * a.weights().asDiagonal()) : a.factor(l);
    sides.push_back(detail::leading_left_vectors(u, rk[ul]));
  }
  DenseTensor core = project_core(a, sides);
  return TuckerTensor(std::move(core), std::move(sides));
}

TuckerTensor c2t(const CpTensor& a, const TruncationSpec& spec, int als_sweeps) {
  spec.validate();
  const int d = a.order();
  const CpTensor x = cp_normalize(a);
  const Index min_n = *std::min_element(x.dims().begin(), x.dims().end());
  if (x.rank() > kSketchRankThreshold ||
      (d > 2 && min_n >= kSketchMinGrid && x.rank() >= std::max(min_n, kSketchMinRank))) {
    return c2t_sketched(x, spec);
  }
  const double norm = cp_norm(x);
  if (x.rank() == 0 || norm == 0.0) return zero_tucker(a.dims(), Dims(static_cast<std::size_t>(d), 1));

  const std::vector<ModeBasis> bases = unfolding_bases(x);
  Dims ranks;
  for (const auto& b : bases) {
    TruncationSpec per_mode = spec;
    per_mode.tolerance = spec.tolerance / std::sqrt(static_cast<double>(d));
    ranks.push_back(std::clamp<Index>(per_mode.select(b.s, norm), 1, b.left.cols()));
  }

  // RHOSVD start, ALS sweeps on the CP representation.
  std::vector<MatrixXd> sides = rhosvd(x, ranks).sides();
  for (int sweep = 0; sweep < als_sweeps; ++sweep) {
    for (int l = 0; l < d; ++l) {
      std::vector<MatrixXd> proj;
      for (int m = 0; m < d; ++m) proj.push_back(sides[static_cast<std::size_t>(m)].transpose() * x.factor(m));
      const MatrixXd w = projected_unfolding(x, l, proj);
      sides[static_cast<std::size_t>(l)] = detail::leading_left_vectors(w, ranks[static_cast<std::size_t>(l)]);
    }
  }
  DenseTensor core = project_core(x, sides);

  // The truncated unfolding bases carry the tolerance guarantee; keep them
  // when the sweeps ended up with a worse fit.
  std::vector<MatrixXd> hsides;
  for (std::size_t l = 0; l < bases.size(); ++l) hsides.push_back(bases[l].left.leftCols(ranks[l]));
  DenseTensor hcore = project_core(x, hsides);
  if (hcore.norm() > core.norm()) {
    return TuckerTensor(std::move(hcore), std::move(hsides));
  }
  return TuckerTensor(std::move(core), std::move(sides));
}

CpTensor t2c(const TuckerTensor& t, const TruncationSpec& spec) {
  spec.validate();
  const int d = t.order();
  const Dims r = t.ranks();
  const DenseTensor& core = t.core();
  const double norm = core.norm();
  if (norm == 0.0) return CpTensor(t.dims());

  if (d == 2) {
    const MatrixXd c = Eigen::Map<const MatrixXd>(core.data().data(), r[0], r[1]);
    detail::ThinSvd svd = detail::thin_svd(c);
    const Index k = std::max<Index>(1, spec.select(svd.s, norm));
    return CpTensor(svd.s.head(k), {t.side(0) * svd.u.leftCols(k), t.side(1) * svd.v.leftCols(k)});
  }

  // Slice along the mode that gives the fewest terms.
  int s = 0;
  Index best = -1;
  for (int m = 0; m < 3; ++m) {
    const Index ra = r[static_cast<std::size_t>((m + 1) % 3)];
    const Index rb = r[static_cast<std::size_t>((m + 2) % 3)];
    const Index terms = r[static_cast<std::size_t>(m)] * std::min(ra, rb);
    if (best < 0 || terms < best) {
      best = terms;
      s = m;
    }
  }
  const int ma = std::min((s + 1) % 3, (s + 2) % 3);
  const int mb = std::max((s + 1) % 3, (s + 2) % 3);
  const Index rs = r[static_cast<std::size_t>(s)];
  const Index ra = r[static_cast<std::size_t>(ma)];
  const Index rb = r[static_cast<std::size_t>(mb)];

  struct Term {
    double sigma;
    Index slice;
    VectorXd a;
    VectorXd b;
  };
  std::vector<Term> terms;
  std::array<Index, 3> idx{};
  for (Index k = 0; k < rs; ++k) {
    MatrixXd c(ra, rb);
    idx[static_cast<std::size_t>(s)] = k;
    for (Index j = 0; j < rb; ++j) {
      idx[static_cast<std::size_t>(mb)] = j;
      for (Index i = 0; i < ra; ++i) {
        idx[static_cast<std::size_t>(ma)] = i;
        c(i, j) = core(idx);
      }
    }
    detail::ThinSvd svd = detail::thin_svd(c);
    for (Index j = 0; j < svd.s.size(); ++j) {
      if (svd.s(j) > 0.0) terms.push_back(Term{svd.s(j), k, svd.u.col(j), svd.v.col(j)});
    }
  }
  std::stable_sort(terms.begin(), terms.end(), [](const Term& x, const Term& y) { return x.sigma > y.sigma; });
  VectorXd sig(static_cast<Index>(terms.size()));
  for (std::size_t i = 0; i < terms.size(); ++i) sig(static_cast<Index>(i)) = terms[i].sigma;
  const Index keep = std::max<Index>(1, spec.select(sig, norm));

  VectorXd w = sig.head(keep);
  std::vector<MatrixXd> f(3);
  for (int l = 0; l < 3; ++l) f[static_cast<std::size_t>(l)].resize(t.dims()[static_cast<std::size_t>(l)], keep);
  for (Index i = 0; i < keep; ++i) {
    const Term& tm = terms[static_cast<std::size_t>(i)];
    f[static_cast<std::size_t>(s)].col(i) = t.side(s).col(tm.slice);
    f[static_cast<std::size_t>(ma)].col(i) = t.side(ma) * tm.a;
    f[static_cast<std::size_t>(mb)].col(i) = t.side(mb) * tm.b;
  }
  return CpTensor(std::move(w), std::move(f));
}

CpTensor trunc(const CpTensor& x, const TruncationSpec& spec) {
  spec.validate();
  if (x.rank() == 0) return x;
  if (x.order() == 2) {
    const MatrixXd q0 = detail::orthonormalize(x.factor(0));
    const MatrixXd q1 = detail::orthonormalize(x.factor(1));
    const MatrixXd small = (q0.transpose() * x.factor(0)) * x.weights().asDiagonal() *
                           (q1.transpose() * x.factor(1)).transpose();
    detail::ThinSvd svd = detail::thin_svd(small);
    const Index k = spec.select(svd.s, small.norm());
    if (k == 0) return CpTensor(x.dims());
    return CpTensor(svd.s.head(k), {q0 * svd.u.leftCols(k), q1 * svd.v.leftCols(k)});
  }

  const CpTensor y = x.rank() <= 512 ? merge_collinear(x) : cp_normalize(x);
  if (y.rank() == 0) return y;
  TruncationSpec half = spec;
  half.tolerance = spec.tolerance / std::sqrt(2.0);
  const TuckerTensor t = c2t(y, half);
  CpTensor out = t2c(t, half);
  if (out.rank() > y.rank()) return y;
  return out;
}

double cp_norm_projected(const CpTensor& x) {
  if (x.rank() == 0) return 0.0;
  double entries = 1.0;
  std::vector<MatrixXd> rf;
  for (int l = 0; l < x.order(); ++l) {
    const MatrixXd q = detail::orthonormalize(x.factor(l));
    rf.push_back(q.transpose() * x.factor(l));
    entries *= static_cast<double>(q.cols());
  }
  if (entries > double(1 << 22)) return cp_norm(x);
  return cp_to_dense(CpTensor(x.weights(), std::move(rf))).norm();
}

}  // namespace fraclap
