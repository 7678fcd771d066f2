#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "fraclap/design.hpp"
#include "fraclap/fracop.hpp"
#include "fraclap/tensor_io.hpp"
#include "oracles.hpp"

using namespace fraclap;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "fraclap");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string l;
  while (std::getline(ss, l)) out.push_back(l);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("fraclap_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                        "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

}  // namespace

TEST(CliLists, Parse) {
  EXPECT_EQ(cli::parse_int_list("256,512"), (std::vector<long>{256, 512}));
  EXPECT_EQ(cli::parse_int_list("5..8"), (std::vector<long>{5, 6, 7, 8}));
  EXPECT_EQ(cli::parse_int_list("1..2,10"), (std::vector<long>{1, 2, 10}));
  EXPECT_EQ(cli::parse_real_list("1,0.5,0.1"), (std::vector<double>{1, 0.5, 0.1}));
  EXPECT_THROW(cli::parse_int_list("5..3"), std::invalid_argument);
  EXPECT_THROW(cli::parse_int_list("a"), std::invalid_argument);
}

TEST_F(CliTest, HelpDocumentsCsv) {
  const CliResult r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("kind,d,n,alpha,r,eps,iterations,final_residual,seconds_per_iteration"), std::string::npos);
  EXPECT_NE(r.out.find("FRACLAP_THREADS"), std::string::npos);
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kUsage);
}

TEST_F(CliTest, BuildCoreDenseSvd) {
  const std::string out = path("g1.dof");
  const CliResult r = run({"build-core", "--kind", "g1", "--d", "2", "--n", "8", "--alpha", "1", "--method", "dense-svd",
                     "--eps", "1e-10", "--out", out});
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(fs::exists(out));
  const DiagOpHeader h = load_diag_op(out);
  CoreFunctionKind k;
  k.alpha = 1.0;
  const CoreError e = core_error(k, EigenSpectrum::laplacian(2, 8), h.core);
  EXPECT_LE(e.frobenius, 1e-10);
  EXPECT_NE(r.out.find("rank="), std::string::npos);
}

TEST_F(CliTest, BuildCoreConstantSpectrumRankOne) {
  const CliResult r = run({"build-core", "--kind", "g1", "--d", "3", "--n", "4", "--alpha", "1", "--method", "mg-tucker",
                     "--tucker-rank", "1", "--spectrum", "constant", "--out", path("c.dof")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("rank=1 frobenius_error=0 max_relative_error=0"), std::string::npos) << r.out;
}

TEST_F(CliTest, BuildCoreUsageErrors) {
  EXPECT_EQ(run({"build-core", "--kind", "g1", "--d", "2", "--n", "8", "--out", path("x")}).code, cli::kUsage);
  EXPECT_EQ(run({"build-core", "--kind", "g2", "--d", "2", "--n", "8", "--alpha", "0.5", "--method", "sinc", "--out",
                 path("x")})
                .code,
            cli::kUsage);
  EXPECT_EQ(run({"build-core", "--kind", "g1", "--d", "3", "--n", "8", "--alpha", "0.5", "--method", "dense-svd",
                 "--out", path("x")})
                .code,
            cli::kUsage);
  EXPECT_EQ(run({"build-core", "--kind", "g1", "--d", "4", "--n", "8", "--alpha", "0.5", "--out", path("x")}).code,
            cli::kUsage);
  EXPECT_EQ(run({"build-core", "--kind", "g1", "--d", "2", "--n", "8", "--alpha", "0.5", "--out",
                 path("missing/dir/x")})
                .code,
            cli::kIo);
}

TEST_F(CliTest, SolveConvergesAndWritesDumps) {
  const std::string u = path("u.lrt"), y = path("y.lrt"), csv = path("runs.csv");
  const CliResult r = run({"solve", "--d", "2", "--n", "256", "--alpha", "0.5", "--rhs", "gaussian-bump", "--precond-rank",
                     "6", "--out", u, "--state-out", y, "--csv", csv});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(u));
  EXPECT_TRUE(fs::exists(y));
  std::ifstream f(csv);
  std::stringstream ss;
  ss << f.rdbuf();
  const auto ls = lines(ss.str());
  ASSERT_EQ(ls.size(), 2u);
  EXPECT_EQ(ls[0], "kind,d,n,alpha,r,eps,iterations,final_residual,seconds_per_iteration");
  std::vector<std::string> fields;
  std::stringstream row(ls[1]);
  for (std::string cell; std::getline(row, cell, ',');) fields.push_back(cell);
  ASSERT_EQ(fields.size(), 9u);
  const int iters = std::stoi(fields[6]);
  EXPECT_GE(iters, 1);
  EXPECT_LE(iters, 5);
}

TEST_F(CliTest, SolveToleranceOneIsImmediate) {
  const CliResult r = run({"solve", "--d", "2", "--n", "32", "--alpha", "0.5", "--tol", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find(",0,1,0"), std::string::npos) << r.out;
}

TEST_F(CliTest, SolveNonConvergenceExitsTwo) {
  const CliResult r = run({"solve", "--d", "2", "--n", "32", "--alpha", "0.5", "--tol", "1e-12", "--k-max", "1"});
  EXPECT_EQ(r.code, cli::kNotConverged);
  EXPECT_NE(r.out.find(",-1,"), std::string::npos);
}

TEST_F(CliTest, SolveIoFailureExitsThree) {
  EXPECT_EQ(run({"solve", "--d", "2", "--n", "16", "--alpha", "0.5", "--out", path("nope/u.lrt")}).code, cli::kIo);
  EXPECT_EQ(run({"solve", "--config", path("absent.cfg"), "--d", "2", "--n", "16", "--alpha", "0.5"}).code, cli::kIo);
}

TEST_F(CliTest, SolveMatchesDenseOracle) {
  const Index n = 16;
  for (const char* alpha : {"1", "0.5", "0.1", "0.25"}) {
    const std::string u = path("u.lrt");
    const CliResult r = run({"solve", "--d", "2", "--n", "16", "--alpha", alpha, "--eps", "1e-12", "--tol", "1e-12",
                       "--op-eps", "1e-13", "--out", u});
    ASSERT_EQ(r.code, 0) << r.err;
    const CpTensor got = std::get<CpTensor>(load_tensor(u));
    DesignFunction f;
    const VectorXd yd = cp_to_dense(design_tensor(f, {n, n})).data();
    const oracle::Kkt ref = oracle::dense_kkt(oracle::laplacian_2d(n), std::stod(alpha), 1.0, 1.0, yd);
    EXPECT_LE(oracle::rel_diff(cp_to_dense(got).data(), ref.u), 1e-8) << alpha;
  }
}

TEST_F(CliTest, ConfigFileWithOverrides) {
  const std::string cfg = path("run.cfg");
  std::ofstream(cfg) << "# defaults\nalpha = 0.1\nn=128\nd=2\ntarget=state\n";
  const CliResult r = run({"solve", "--config", cfg, "--n", "32"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("g4,2,32,0.1,"), std::string::npos) << r.out;
  std::ofstream(cfg) << "not a pair\n";
  EXPECT_EQ(run({"solve", "--config", cfg, "--n", "32", "--d", "2", "--alpha", "0.5"}).code, cli::kUsage);
}

TEST_F(CliTest, BenchSingleCell) {
  const CliResult r = run({"bench-precond", "--d", "2", "--alpha", "0.5", "--kinds", "g1", "--grid-list", "64", "--rank-list",
                     "6"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 2u);
  EXPECT_EQ(ls[0], "kind,r,64");
  EXPECT_EQ(ls[1].substr(0, 5), "g1,6,");
}

TEST_F(CliTest, BenchBlocksAndFailures) {
  setenv("FRACLAP_THREADS", "2", 1);
  const CliResult r = run({"bench-precond", "--d", "2", "--alpha", "0.5", "--kinds", "g1,g4,g3", "--grid-list", "32,64",
                     "--rank-list", "1..2", "--k-max", "1", "--tol", "1e-12"});
  unsetenv("FRACLAP_THREADS");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 3u * 3 + 2);
  EXPECT_EQ(ls[0], "kind,r,32,64");
  EXPECT_EQ(ls[1], "g1,1,-1,-1");
  EXPECT_EQ(ls[3], "");
  EXPECT_EQ(ls[4], "kind,r,32,64");
  EXPECT_EQ(run({"bench-precond", "--d", "2", "--alpha", "0.5", "--kinds", "g2", "--grid-list", "32", "--rank-list",
                 "1"})
                .code,
            cli::kUsage);
}

TEST_F(CliTest, BenchDeterministic) {
  const std::vector<std::string> args = {"bench-precond", "--d", "3", "--alpha", "0.5", "--kinds", "g4",
                                         "--grid-list", "16", "--rank-list", "2,3", "--seed", "5"};
  EXPECT_EQ(run(args).out, run(args).out);
}

TEST_F(CliTest, RankDecayTwoD) {
  const CliResult r = run({"rank-decay", "--kind", "g1", "--d", "2", "--n", "64", "--alpha-list", "1,0.5", "--max-rank", "8"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 1u + 2 * 9);
  EXPECT_EQ(ls[0], "alpha,rank,relative_error");
  EXPECT_EQ(ls[1], "1,0,1");
  double prev = 2.0;
  for (int k = 1; k <= 9; ++k) {
    const double e = std::stod(ls[k].substr(ls[k].rfind(',') + 1));
    EXPECT_LT(e, prev);
    prev = e;
  }
}

TEST_F(CliTest, RankDecayThreeD) {
  const CliResult r = run({"rank-decay", "--kind", "g3", "--d", "3", "--n", "31", "--alpha-list", "0.5", "--max-rank", "4",
                     "--out", path("rd.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream f(path("rd.csv"));
  std::stringstream ss;
  ss << f.rdbuf();
  EXPECT_EQ(lines(ss.str()).size(), 6u);
}

TEST_F(CliTest, TimingSchemaIndependentOfRepeats) {
  const CliResult a = run({"timing", "--d", "2", "--grid-list", "32,64", "--repeats", "1"});
  const CliResult b = run({"timing", "--d", "2", "--grid-list", "32,64", "--repeats", "5"});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const auto la = lines(a.out), lb = lines(b.out);
  ASSERT_EQ(la.size(), 3u);
  ASSERT_EQ(lb.size(), 3u);
  EXPECT_EQ(la[0], "n,median_seconds_per_iteration");
  EXPECT_EQ(la[0], lb[0]);
  EXPECT_EQ(la[1].substr(0, 3), "32,");
  EXPECT_EQ(lb[2].substr(0, 3), "64,");
}

TEST_F(CliTest, BadThreadEnv) {
  setenv("FRACLAP_THREADS", "0", 1);
  const CliResult r = run({"bench-precond", "--d", "2", "--alpha", "0.5", "--kinds", "g1", "--grid-list", "16,32",
                     "--rank-list", "2,3"});
  unsetenv("FRACLAP_THREADS");
  EXPECT_EQ(r.code, cli::kUsage);
}
