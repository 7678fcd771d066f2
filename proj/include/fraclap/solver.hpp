#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fraclap/fracop.hpp"

namespace fraclap {

struct SolverConfig {
  double alpha = 0.5;
  double beta = 1.0;
  double gamma = 1.0;
  double eps = 1e-8;  // trunc tolerance inside PCG (0 disables truncation)
  Index precond_rank = 6;
  double residual_tol = 1e-6;
  int k_max = 100;
  double op_eps = 1e-10;  // accuracy of the system operator's core
  std::optional<Index> max_rank;
  Aggregation aggregation = Aggregation::SumThenPower;
  CoreBuildOptions core_options;

  void validate() const;
  TruncationSpec truncation() const;
  /// Core function of `tag` with alpha, aggregation and the (beta, gamma / beta)
  /// scales of this configuration.
  CoreFunctionKind kind(CoreKind tag) const;
};

struct PcgReport {
  int iterations = 0;
  std::vector<double> residual_history;  // ||R^k|| / ||B||, k = 0..iterations
  Index final_rank = 0;
  Index max_rank_seen = 0;
  double seconds_per_iteration = 0.0;
  bool converged = false;
  double final_residual = 0.0;  // last recursive residual
};

struct PcgResult {
  CpTensor x;
  PcgReport report;
};

/// Preconditioned CG in low-rank format: trunc after every operator
/// application and vector update. Stops when ||R|| / ||B|| <= residual_tol
/// (checked for the initial residual as well) or after k_max iterations.
/// Throws NumericBreakdown when <P, S> <= 0.
PcgResult pcg(const LowRankOperator& fun, const LowRankOperator& precond, const CpTensor& b, const CpTensor& x0,
              const SolverConfig& cfg);

/// Default core construction route: dense SVD for d = 2, multigrid Tucker for
/// d = 3.
CoreMethod default_method(int d);

/// System operator of the given kind at accuracy cfg.op_eps.
LowRankOperator build_system_operator(const CoreFunctionKind& kind, const EigenSpectrum& spectrum,
                                      const SolverConfig& cfg);

/// Rank-r approximation of the entrywise reciprocal of `system`: SVD rank r
/// for d = 2, Tucker rank (r, r, r) converted to CP for d = 3.
LowRankOperator build_preconditioner(const CoreFunctionKind& system, const EigenSpectrum& spectrum, Index r,
                                     const CoreBuildOptions& options = {});

/// Optimal control: (beta A^-alpha + (gamma/beta) A^alpha) u = y_design by PCG.
PcgResult solve_control(const CpTensor& y_design, const SolverConfig& cfg, const EigenSpectrum& spectrum);

/// u = (beta A^-alpha + (gamma/beta) A^alpha)^-1 y_design by applying the g3
/// core directly.
CpTensor control_direct(const CpTensor& y_design, const SolverConfig& cfg, const EigenSpectrum& spectrum);

/// State: (I + (gamma/beta^2) A^(2 alpha)) y = y_design by PCG with the g4
/// preconditioner.
PcgResult solve_state(const CpTensor& y_design, const SolverConfig& cfg, const EigenSpectrum& spectrum);

/// y = beta A^-alpha u.
CpTensor state_from_control(const CpTensor& u, const SolverConfig& cfg, const EigenSpectrum& spectrum);

struct KktResidual {
  double r1 = 0.0;  // ||y + A^alpha p - y_design||
  double r2 = 0.0;  // ||gamma u - beta p||
  double r3 = 0.0;  // ||A^alpha y - beta u||
};

/// Block residuals of the KKT system (M = I), each divided by ||y_design||
/// (absolute when y_design = 0).
KktResidual kkt_residual(const CpTensor& y, const CpTensor& u, const CpTensor& p, const CpTensor& y_design,
                         const SolverConfig& cfg, const EigenSpectrum& spectrum);
/// Same with p = (gamma / beta) u.
KktResidual kkt_residual(const CpTensor& y, const CpTensor& u, const CpTensor& y_design, const SolverConfig& cfg,
                         const EigenSpectrum& spectrum);

/// CSV header and row for a PCG run:
/// kind,d,n,alpha,r,eps,iterations,final_residual,seconds_per_iteration
std::string pcg_csv_header();
std::string pcg_csv_row(std::string_view kind, int d, Index n, double alpha, Index r, double eps,
                        const PcgReport& report);

}  // namespace fraclap
