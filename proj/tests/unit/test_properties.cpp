// Randomized property suites with fixed seeds.
#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fraclap/decomp.hpp"
#include "fraclap/fracop.hpp"
#include "oracles.hpp"

using namespace fraclap;

namespace {

CoreFunctionKind make(CoreKind tag, double alpha) {
  CoreFunctionKind k;
  k.tag = tag;
  k.alpha = alpha;
  return k;
}

}  // namespace

TEST(Property, TruncIdempotent) {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> nd(4, 12), rd(1, 8);
  for (int rep = 0; rep < 20; ++rep) {
    const int d = rep % 2 ? 3 : 2;
    Dims dims;
    for (int l = 0; l < d; ++l) dims.push_back(nd(rng));
    const CpTensor a = oracle::random_cp(dims, rd(rng), rng);
    const TruncationSpec spec = TruncationSpec::relative(1e-3);
    const CpTensor once = trunc(a, spec);
    const CpTensor twice = trunc(once, spec);
    EXPECT_LE(twice.rank(), once.rank());
    const DenseTensor d1 = cp_to_dense(once), d2 = cp_to_dense(twice);
    EXPECT_LE((d1.data() - d2.data()).norm(), 1e-3 * d1.norm());
    const CpTensor exact = trunc(once, TruncationSpec::relative(1e-13));
    EXPECT_LE((cp_to_dense(exact).data() - d1.data()).norm(), 1e-11 * d1.norm());
  }
}

TEST(Property, EckartYoungTail) {
  std::mt19937_64 rng(102);
  std::uniform_int_distribution<int> nd(6, 20), rd(3, 10);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n1 = nd(rng), n2 = nd(rng), r = rd(rng);
    const CpTensor a = oracle::random_cp({n1, n2}, r, rng);
    const DenseTensor d = cp_to_dense(a);
    const VectorXd s = Eigen::JacobiSVD<MatrixXd>(d.unfold(0)).singularValues();
    const Index keep = std::uniform_int_distribution<Index>(1, std::min<Index>(r, s.size()))(rng);
    const CpTensor t = trunc(a, TruncationSpec::fixed(keep));
    const double err = (cp_to_dense(t).data() - d.data()).norm();
    const double tail = s.tail(s.size() - keep).norm();
    EXPECT_NEAR(err, tail, 1e-9 * d.norm());
  }
}

TEST(Property, OperatorSymmetry) {
  std::mt19937_64 rng(103);
  for (int rep = 0; rep < 12; ++rep) {
    const int d = rep % 2 ? 3 : 2;
    const Index n = 8 + rep;
    const EigenSpectrum s = EigenSpectrum::laplacian(d, n);
    const CoreKind tag = static_cast<CoreKind>(rep % 4);
    const CoreMethod m = d == 2 ? CoreMethod::DenseSvd : CoreMethod::MultigridTucker;
    const LowRankOperator op(build_core(make(tag, rep % 3 ? 0.5 : 0.1), s, TruncationSpec::relative(1e-10), m));
    const Dims dims = s.dims();
    const CpTensor x = oracle::random_cp(dims, 2, rng), y = oracle::random_cp(dims, 3, rng);
    const double lhs = cp_inner(op.apply(x), y), rhs = cp_inner(x, op.apply(y));
    EXPECT_NEAR(lhs, rhs, 1e-9 * std::max({std::abs(lhs), cp_norm(x) * cp_norm(y) * 1e-3, 1e-300}));
  }
}

TEST(Property, CorePositivity) {
  for (int d : {2, 3}) {
    const EigenSpectrum s = EigenSpectrum::laplacian(d, d == 2 ? 40 : 12);
    for (double alpha : {1.0, 0.5, 0.1, 0.01}) {
      for (CoreKind k : {CoreKind::G1, CoreKind::G2, CoreKind::G3, CoreKind::G4}) {
        EXPECT_GT(core_dense(make(k, alpha), s).data().minCoeff(), 0.0);
      }
    }
  }
}

TEST(Property, IndexPermutationSymmetry) {
  std::mt19937_64 rng(104);
  const EigenSpectrum s = EigenSpectrum::laplacian(3, 25);
  std::uniform_int_distribution<Index> id(0, 24);
  for (CoreKind k : {CoreKind::G1, CoreKind::G2, CoreKind::G3, CoreKind::G4}) {
    for (int rep = 0; rep < 200; ++rep) {
      std::array<Index, 3> idx{id(rng), id(rng), id(rng)};
      const double base = core_entry(make(k, 0.5), s, idx);
      std::sort(idx.begin(), idx.end());
      do {
        EXPECT_NEAR(core_entry(make(k, 0.5), s, idx), base, 1e-14 * base);
      } while (std::next_permutation(idx.begin(), idx.end()));
    }
  }
  // The compressed core keeps the symmetry to its accuracy.
  const DiagOpFunction op =
      build_core(make(CoreKind::G3, 0.5), s, TruncationSpec::relative(1e-9), CoreMethod::MultigridTucker);
  const DenseTensor g = cp_to_dense(op.core);
  for (int rep = 0; rep < 200; ++rep) {
    const Index i = id(rng), j = id(rng), k = id(rng);
    EXPECT_NEAR(g(i, j, k), g(k, i, j), 1e-8 * g.data().cwiseAbs().maxCoeff());
  }
}

TEST(Property, G2TimesG3IsOne) {
  std::mt19937_64 rng(105);
  std::uniform_real_distribution<double> ad(0.01, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    const double alpha = ad(rng);
    const EigenSpectrum s = EigenSpectrum::laplacian(2 + rep % 2, 10);
    const DenseTensor g2 = core_dense(make(CoreKind::G2, alpha), s);
    const DenseTensor g3 = core_dense(make(CoreKind::G3, alpha), s);
    EXPECT_LE((g2.data().cwiseProduct(g3.data()).array() - 1.0).abs().maxCoeff(), 1e-14);
  }
}

TEST(Property, G4EqualsInversePowerTimesG3) {
  std::mt19937_64 rng(106);
  std::uniform_real_distribution<double> ad(0.01, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    const double alpha = ad(rng);
    const EigenSpectrum s = EigenSpectrum::laplacian(2 + rep % 2, 10);
    const DenseTensor g3 = core_dense(make(CoreKind::G3, alpha), s);
    const DenseTensor g4 = core_dense(make(CoreKind::G4, alpha), s);
    const DenseTensor g1 = core_dense(make(CoreKind::G1, alpha), s);  // rho^-alpha
    const VectorXd rel = (g4.data() - g1.data().cwiseProduct(g3.data())).cwiseQuotient(g4.data());
    EXPECT_LE(rel.cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Property, CpDenseCommutation) {
  std::mt19937_64 rng(107);
  std::uniform_int_distribution<int> nd(1, 8), rd(0, 4);
  for (int rep = 0; rep < 30; ++rep) {
    Dims dims{nd(rng), nd(rng), nd(rng)};
    const CpTensor a = oracle::random_cp(dims, rd(rng), rng), b = oracle::random_cp(dims, rd(rng), rng);
    const VectorXd da = cp_to_dense(a).data(), db = cp_to_dense(b).data();
    EXPECT_LE((cp_to_dense(cp_add(a, b)).data() - da - db).norm(), 1e-10 * (1 + da.norm() + db.norm()));
    EXPECT_NEAR(cp_inner(a, b), da.dot(db), 1e-10 * (1 + da.norm() * db.norm()));
    EXPECT_LE((cp_to_dense(cp_normalize(a)).data() - da).norm(), 1e-10 * (1 + da.norm()));
  }
}
