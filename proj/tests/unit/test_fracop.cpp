#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "fraclap/errors.hpp"
#include "fraclap/fracop.hpp"
#include "oracles.hpp"

using namespace fraclap;

namespace {

EigenSpectrum constant_spectrum(int d, Index n, double v) {
  std::vector<Mode1D> modes;
  for (int l = 0; l < d; ++l) modes.push_back(laplacian_mode(n).with_eigenvalues(VectorXd::Constant(n, v)));
  return EigenSpectrum(std::move(modes));
}

CoreFunctionKind make(CoreKind tag, double alpha, Aggregation agg = Aggregation::SumThenPower) {
  CoreFunctionKind k;
  k.tag = tag;
  k.alpha = alpha;
  k.aggregation = agg;
  return k;
}

const char* tag_name(CoreKind k) {
  switch (k) {
    case CoreKind::G1: return "g1";
    case CoreKind::G2: return "g2";
    case CoreKind::G3: return "g3";
    case CoreKind::G4: return "g4";
    default: return "power";
  }
}

}  // namespace

TEST(CoreKind, TagsRoundTrip) {
  for (CoreKind k : {CoreKind::G1, CoreKind::G2, CoreKind::G3, CoreKind::G4, CoreKind::Power, CoreKind::State}) {
    EXPECT_EQ(parse_core_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_core_kind("g5"), InvalidArgument);
  EXPECT_EQ(parse_core_method("mg-tucker"), CoreMethod::MultigridTucker);
  EXPECT_THROW(parse_core_method("qr"), InvalidArgument);
}

TEST(CoreKind, Validation) {
  EXPECT_THROW(make(CoreKind::G1, 0.0).validate(), InvalidArgument);
  EXPECT_THROW(make(CoreKind::G1, 1.5).validate(), InvalidArgument);
  EXPECT_THROW(make(CoreKind::G1, 0.5, Aggregation::Generalized).validate(), InvalidArgument);
  EXPECT_NO_THROW(make(CoreKind::G1, 1.0).validate());
}

TEST(CoreKind, ReciprocalPairs) {
  for (double p : {0.3, 1.0, 7.5}) {
    for (CoreKind k : {CoreKind::G1, CoreKind::G2, CoreKind::G3, CoreKind::G4, CoreKind::Power, CoreKind::State}) {
      CoreFunctionKind f = make(k, 0.5);
      f.a = 2.0;
      f.b = 0.7;
      EXPECT_NEAR(f.evaluate(p) * f.reciprocal().evaluate(p), 1.0, 1e-14);
    }
  }
}

TEST(CoreEntry, FixedPointRhoOne) {
  const EigenSpectrum s = constant_spectrum(2, 3, 0.5);
  const Index idx[] = {1, 2};
  for (double alpha : {0.1, 0.5, 1.0}) {
    EXPECT_NEAR(core_entry(make(CoreKind::G2, alpha), s, idx), 2.0, 1e-14);
    EXPECT_NEAR(core_entry(make(CoreKind::G3, alpha), s, idx), 0.5, 1e-14);
    EXPECT_NEAR(core_entry(make(CoreKind::G4, alpha), s, idx), 0.5, 1e-14);
  }
}

TEST(CoreEntry, SmallLaplacianValues) {
  const EigenSpectrum s = EigenSpectrum::laplacian(2, 2);
  const Index i12[] = {0, 1};
  const Index i11[] = {0, 0};
  EXPECT_NEAR(core_entry(make(CoreKind::G1, 1.0), s, i12), 1.0 / 36.0, 1e-15);
  EXPECT_NEAR(core_entry(make(CoreKind::G4, 1.0), s, i11), 1.0 / 325.0, 1e-15);
  const Index bad[] = {0, 2};
  EXPECT_THROW(core_entry(make(CoreKind::G1, 1.0), s, bad), InvalidArgument);
}

TEST(CoreEntry, AgreesWithDenseMatrixFunction) {
  // Entry (i, j) of g equals the eigenvalue of f(A) on the (i, j) eigenvector.
  const Index n = 2;
  const MatrixXd lap = oracle::laplacian_2d(n);
  const EigenSpectrum s = EigenSpectrum::laplacian(2, n);
  const MatrixXd f = laplacian_mode(n).dense_transform();
  for (CoreKind k : {CoreKind::G1, CoreKind::G4}) {
    const MatrixXd fa = oracle::matrix_function(lap, oracle::g_of_rho(tag_name(k), 1.0));
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        VectorXd v(n * n);
        for (Index a = 0; a < n; ++a) {
          for (Index b = 0; b < n; ++b) v(a + n * b) = f(i, a) * f(j, b);
        }
        const Index idx[] = {i, j};
        EXPECT_NEAR(v.dot(fa * v), core_entry(make(k, 1.0), s, idx), 1e-12);
      }
    }
  }
}

TEST(CoreDense, MatchesEntries) {
  const EigenSpectrum s = EigenSpectrum::laplacian(3, 4);
  const CoreFunctionKind k = make(CoreKind::G3, 0.3);
  const DenseTensor g = core_dense(k, s);
  Index idx[3];
  for (idx[2] = 0; idx[2] < 4; ++idx[2]) {
    for (idx[1] = 0; idx[1] < 4; ++idx[1]) {
      for (idx[0] = 0; idx[0] < 4; ++idx[0]) EXPECT_EQ(g(idx), core_entry(k, s, idx));
    }
  }
}

TEST(SumCore, ExactRankD) {
  for (int d : {2, 3}) {
    const EigenSpectrum s = EigenSpectrum::laplacian(d, 6);
    const CpTensor c = sum_core_exact(s);
    EXPECT_EQ(c.rank(), d);
    CoreFunctionKind sum = make(CoreKind::Power, 1.0);
    const DenseTensor exact = core_dense(sum, s);
    EXPECT_LE((cp_to_dense(c).data() - exact.data()).norm(), 1e-12 * exact.norm());
  }
  const EigenSpectrum s = EigenSpectrum::laplacian(3, 5);
  const double l0 = s.mode(0).eigenvalues()(0);
  EXPECT_NEAR(cp_to_dense(sum_core_exact(s))(0, 0, 0), 3 * l0, 1e-12);
}

TEST(PlusPart, PowerThenSumExactRankD) {
  for (double alpha : {0.1, 0.5, 1.0}) {
    const EigenSpectrum s = EigenSpectrum::laplacian(3, 5);
    const CoreFunctionKind k = make(CoreKind::G2, alpha, Aggregation::PowerThenSum);
    const CpTensor c = plus_part_core(k, s);
    EXPECT_EQ(c.rank(), 3);
    const DenseTensor d = cp_to_dense(c);
    Index idx[3];
    for (idx[2] = 0; idx[2] < 5; ++idx[2]) {
      for (idx[1] = 0; idx[1] < 5; ++idx[1]) {
        for (idx[0] = 0; idx[0] < 5; ++idx[0]) {
          double want = 0.0;
          for (int l = 0; l < 3; ++l) want += std::pow(s.mode(l).eigenvalues()(idx[l]), alpha);
          EXPECT_NEAR(d(idx), want, 1e-12 * want);
        }
      }
    }
  }
}

TEST(Sinc, ErrorDecreasesWithM) {
  const EigenSpectrum s = EigenSpectrum::laplacian(2, 16);
  double prev = 1e300;
  for (int m : {4, 9, 16, 25}) {
    const DiagOpFunction op = sinc_inverse_power(s, 0.5, m);
    EXPECT_EQ(op.core.rank(), 2 * m + 1);
    EXPECT_LT(op.achieved_error, prev);
    prev = op.achieved_error;
  }
  EXPECT_THROW(sinc_inverse_power(s, 0.5, -1), InvalidArgument);
  EXPECT_THROW(sinc_inverse_power(s, make(CoreKind::G2, 0.5), 4), InvalidArgument);
}

TEST(Sinc, InverseOperatorAgainstDense) {
  const Index n = 16;
  const EigenSpectrum s = EigenSpectrum::laplacian(2, n);
  const DiagOpFunction op = sinc_inverse_power(s, 1.0, 36);
  const LowRankOperator lop(op);
  const MatrixXd inv = oracle::laplacian_2d(n).inverse();
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 5; ++rep) {
    const CpTensor x = oracle::random_cp({n, n}, 2, rng);
    const VectorXd xv = cp_to_dense(x).data();
    const VectorXd got = cp_to_dense(lop.apply(x)).data();
    EXPECT_LE(oracle::rel_diff(got, inv * xv), 10 * op.achieved_error);
  }
}

TEST(BuildCore, IncompatibleMethod) {
  const EigenSpectrum s2 = EigenSpectrum::laplacian(2, 8);
  const EigenSpectrum s3 = EigenSpectrum::laplacian(3, 8);
  EXPECT_THROW(build_core(make(CoreKind::G2, 0.5), s2, TruncationSpec::relative(1e-6), CoreMethod::Sinc),
               InvalidArgument);
  EXPECT_THROW(build_core(make(CoreKind::G2, 0.5), s3, TruncationSpec::relative(1e-6), CoreMethod::DenseSvd),
               InvalidArgument);
}

TEST(BuildCore, DenseSvdMeetsTolerance) {
  const EigenSpectrum s = EigenSpectrum::laplacian(2, 40);
  for (CoreKind k : {CoreKind::G1, CoreKind::G2, CoreKind::G3, CoreKind::G4}) {
    for (double eps : {1e-4, 1e-10}) {
      const DiagOpFunction op = build_core(make(k, 0.5), s, TruncationSpec::relative(eps), CoreMethod::DenseSvd);
      const CoreError e = core_error(make(k, 0.5), s, op.core);
      EXPECT_TRUE(e.exact);
      EXPECT_LE(e.frobenius, eps);
      EXPECT_NEAR(op.achieved_error, e.frobenius, 1e-12);
    }
  }
}

TEST(BuildCore, DenseSvdFixedRankIsEckartYoung) {
  const EigenSpectrum s = EigenSpectrum::laplacian(2, 30);
  const CoreFunctionKind k = make(CoreKind::G1, 0.5);
  const VectorXd sv = Eigen::JacobiSVD<MatrixXd>(core_dense(k, s).unfold(0)).singularValues();
  for (Index r : {1, 3, 6}) {
    const DiagOpFunction op = build_core(k, s, TruncationSpec::fixed(r), CoreMethod::DenseSvd);
    EXPECT_EQ(op.core.rank(), r);
    const double tail = sv.tail(sv.size() - r).norm() / sv.norm();
    EXPECT_NEAR(op.achieved_error, tail, 1e-9 * std::max(tail, 1e-300) + 1e-14);
  }
}

TEST(BuildCore, MultigridMeetsTolerance) {
  const EigenSpectrum s = EigenSpectrum::laplacian(3, 47);
  for (CoreKind k : {CoreKind::G1, CoreKind::G3, CoreKind::G4}) {
    const DiagOpFunction op =
        build_core(make(k, 0.5), s, TruncationSpec::relative(1e-6), CoreMethod::MultigridTucker);
    EXPECT_LE(core_error(make(k, 0.5), s, op.core).frobenius, 1e-6);
  }
}

TEST(BuildCore, SincMeetsTolerance) {
  const EigenSpectrum s = EigenSpectrum::laplacian(3, 20);
  const DiagOpFunction op = build_core(make(CoreKind::G1, 0.5), s, TruncationSpec::relative(1e-5), CoreMethod::Sinc);
  EXPECT_LE(core_error(make(CoreKind::G1, 0.5), s, op.core).frobenius, 1e-5);
}

TEST(BuildCore, ConstantSpectrumRankOne) {
  const EigenSpectrum s = constant_spectrum(2, 5, 0.5);
  const DiagOpFunction op = build_core(make(CoreKind::G3, 0.7), s, TruncationSpec::relative(1e-12), CoreMethod::DenseSvd);
  ASSERT_EQ(op.core.rank(), 1);
  EXPECT_LE((cp_to_dense(op.core).data() - VectorXd::Constant(25, 0.5)).norm(), 1e-13);
  const EigenSpectrum s3 = constant_spectrum(3, 4, 1.0 / 3.0);
  CoreBuildOptions o;
  o.tucker_rank = 1;
  const DiagOpFunction op3 =
      build_core(make(CoreKind::G1, 1.0), s3, TruncationSpec::relative(1e-12), CoreMethod::MultigridTucker, o);
  EXPECT_EQ(op3.core.rank(), 1);
  EXPECT_LE(core_error(make(CoreKind::G1, 1.0), s3, op3.core).frobenius, 1e-14);
}

TEST(BuildCore, PowerThenSumKinds) {
  const EigenSpectrum s = EigenSpectrum::laplacian(2, 32);
  const CoreFunctionKind k = make(CoreKind::G2, 0.3, Aggregation::PowerThenSum);
  const DiagOpFunction op = build_core(k, s, TruncationSpec::relative(1e-8), CoreMethod::DenseSvd);
  EXPECT_LE(core_error(k, s, op.core).frobenius, 1e-8);
}

TEST(BuildCore, GeneralizedMap) {
  CoreFunctionKind k = make(CoreKind::G1, 0.5, Aggregation::Generalized);
  k.map = [](double l) { return l + 1.0; };
  const EigenSpectrum s = EigenSpectrum::laplacian(2, 12);
  const DiagOpFunction op = build_core(k, s, TruncationSpec::relative(1e-9), CoreMethod::DenseSvd);
  const Index idx[] = {2, 5};
  const double rho = s.mode(0).eigenvalues()(2) + 1.0 + s.mode(1).eigenvalues()(5) + 1.0;
  EXPECT_NEAR(core_entry(k, s, idx), 1.0 / std::sqrt(rho), 1e-15);
  EXPECT_LE(core_error(k, s, op.core).frobenius, 1e-9);
}

TEST(BuildCoreTucker, ErrorDecreasesWithRank) {
  const EigenSpectrum s = EigenSpectrum::laplacian(3, 31);
  for (CoreKind k : {CoreKind::G2, CoreKind::G3}) {
    double prev = 1.0;
    for (Index r = 1; r <= 15; ++r) {
      const double e = tucker_core_error(make(k, 0.5), s, build_core_tucker(make(k, 0.5), s, r));
      EXPECT_LE(e, prev * (1 + 1e-6)) << "rank " << r;
      prev = e;
    }
  }
}

TEST(LowRankOperator, IdentityCore) {
  const EigenSpectrum s = EigenSpectrum::laplacian(3, 6);
  DiagOpFunction d{s, make(CoreKind::G1, 1.0),
                   CpTensor::rank_one({VectorXd::Ones(6), VectorXd::Ones(6), VectorXd::Ones(6)}), 0.0};
  const LowRankOperator op(d);
  std::mt19937_64 rng(4);
  const CpTensor x = oracle::random_cp({6, 6, 6}, 1, rng);
  const CpTensor y = op.apply(x);
  EXPECT_EQ(y.rank(), 1);
  EXPECT_LE(oracle::rel_diff(cp_to_dense(y).data(), cp_to_dense(x).data()), 1e-12);
  EXPECT_THROW(op.apply(oracle::random_cp({6, 6, 5}, 1, rng)), InvalidArgument);
}

TEST(LowRankOperator, MatchesDenseG4) {
  const Index n = 16;
  const EigenSpectrum s = EigenSpectrum::laplacian(2, n);
  const LowRankOperator op(build_core(make(CoreKind::G4, 0.5), s, TruncationSpec::relative(1e-12), CoreMethod::DenseSvd));
  const MatrixXd f = oracle::matrix_function(oracle::laplacian_2d(n), oracle::g_of_rho("g4", 0.5));
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const CpTensor x = oracle::random_cp({n, n}, 3, rng);
    const VectorXd want = f * cp_to_dense(x).data();
    EXPECT_LE(oracle::rel_diff(cp_to_dense(op.apply(x)).data(), want), 1e-9);
  }
}

TEST(LowRankOperator, TruncatedApplyEqualsTruncOfApply) {
  const EigenSpectrum s = EigenSpectrum::laplacian(3, 12);
  const LowRankOperator op(
      build_core(make(CoreKind::G1, 0.5), s, TruncationSpec::relative(1e-8), CoreMethod::MultigridTucker));
  std::mt19937_64 rng(6);
  const CpTensor x = oracle::random_cp({12, 12, 12}, 3, rng);
  const DenseTensor full = cp_to_dense(op.apply(x));
  const DenseTensor fused = cp_to_dense(op.apply_truncated(x, TruncationSpec::relative(1e-9)));
  EXPECT_LE((fused.data() - full.data()).norm() / full.norm(), 1e-9);
}

TEST(LowRankOperator, SpectralRoundTrip) {
  const EigenSpectrum s = EigenSpectrum::laplacian(2, 9);
  const LowRankOperator op(build_core(make(CoreKind::G1, 1.0), s, TruncationSpec::relative(1e-10), CoreMethod::DenseSvd));
  std::mt19937_64 rng(7);
  const CpTensor x = oracle::random_cp({9, 9}, 2, rng);
  EXPECT_LE(oracle::rel_diff(cp_to_dense(op.from_spectral(op.to_spectral(x))).data(), cp_to_dense(x).data()), 1e-12);
}

TEST(DiagOpIo, RoundTrip) {
  const EigenSpectrum s = EigenSpectrum::laplacian(2, 10);
  CoreFunctionKind k = make(CoreKind::G3, 0.25, Aggregation::PowerThenSum);
  k.a = 2.0;
  k.b = 0.5;
  const DiagOpFunction op = build_core(k, s, TruncationSpec::relative(1e-8), CoreMethod::DenseSvd);
  const auto path = std::filesystem::temp_directory_path() / "fraclap_dof_test.bin";
  save_diag_op(path, op);
  const DiagOpHeader h = load_diag_op(path);
  EXPECT_EQ(h.kind.tag, CoreKind::G3);
  EXPECT_EQ(h.kind.aggregation, Aggregation::PowerThenSum);
  EXPECT_EQ(h.kind.alpha, 0.25);
  EXPECT_EQ(h.kind.a, 2.0);
  EXPECT_EQ(h.kind.b, 0.5);
  EXPECT_EQ(h.achieved_error, op.achieved_error);
  EXPECT_EQ(h.core.weights(), op.core.weights());
  std::filesystem::remove(path);
  EXPECT_THROW(load_diag_op(path), std::runtime_error);
}

TEST(CoreError, SampledForLargeGrids) {
  const EigenSpectrum s = EigenSpectrum::laplacian(3, 200);
  const CoreFunctionKind k = make(CoreKind::G1, 1.0);
  const DiagOpFunction op = build_core(k, s, TruncationSpec::relative(1e-6), CoreMethod::Sinc);
  const CoreError e = core_error(k, s, op.core);
  EXPECT_FALSE(e.exact);
  EXPECT_LE(e.frobenius, 1e-5);
}
