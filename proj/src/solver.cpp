#include "fraclap/solver.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

#include "fraclap/errors.hpp"

namespace fraclap {

void SolverConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("solver: alpha must lie in (0, 1]");
  if (!(beta > 0.0) || !(gamma > 0.0)) throw InvalidArgument("solver: beta and gamma must be positive");
  if (!(eps >= 0.0)) throw InvalidArgument("solver: eps must be non-negative");
  if (!(op_eps > 0.0)) throw InvalidArgument("solver: op_eps must be positive");
  if (precond_rank < 1) throw InvalidArgument("solver: preconditioner rank must be >= 1");
  if (!(residual_tol > 0.0 && residual_tol <= 1.0)) throw InvalidArgument("solver: residual tolerance must lie in (0, 1]");
  if (k_max < 1) throw InvalidArgument("solver: k_max must be >= 1");
  if (max_rank && *max_rank < 1) throw InvalidArgument("solver: max_rank must be >= 1");
}

TruncationSpec SolverConfig::truncation() const { return TruncationSpec::relative(eps, max_rank); }

CoreFunctionKind SolverConfig::kind(CoreKind tag) const {
  CoreFunctionKind k;
  k.tag = tag;
  k.alpha = alpha;
  k.aggregation = aggregation;
  k.a = beta;
  k.b = gamma / beta;
  return k;
}

PcgResult pcg(const LowRankOperator& fun, const LowRankOperator& precond, const CpTensor& b, const CpTensor& x0,
              const SolverConfig& cfg) {
  cfg.validate();
  if (fun.dims() != b.dims() || precond.dims() != b.dims() || x0.dims() != b.dims()) {
    throw InvalidArgument("pcg: operator, right-hand side and initial guess dims differ");
  }
  const TruncationSpec spec = cfg.truncation();
  PcgResult out{x0, {}};
  PcgReport& rep = out.report;
  const double bnorm = cp_norm(b);
  if (bnorm == 0.0) {
    out.x = CpTensor(b.dims());
    rep.residual_history.push_back(0.0);
    rep.converged = true;
    return out;
  }

  CpTensor x = x0;
  CpTensor r = x0.rank() == 0 ? b : cp_axpy(b, -1.0, fun.apply(x0));
  double res = cp_norm(r) / bnorm;
  rep.residual_history.push_back(res);
  rep.final_residual = res;
  if (res <= cfg.residual_tol) {
    rep.converged = true;
    rep.final_rank = x.rank();
    rep.max_rank_seen = x.rank();
    return out;
  }

  CpTensor z = precond.apply_truncated(r, spec);
  CpTensor p = z;
  double rz = cp_inner(r, z);
  Index max_seen = x.rank();

  const auto start = std::chrono::steady_clock::now();
  for (int k = 0; k < cfg.k_max; ++k) {
    const CpTensor s = fun.apply_truncated(p, spec);
    const double ps = cp_inner(p, s);
    if (!(ps > 0.0)) {
      throw NumericBreakdown("pcg: <P, S> = " + std::to_string(ps) + " is not positive at iteration " +
                                 std::to_string(k + 1) + " (operator or truncation lost definiteness)",
                             k + 1);
    }
    const double step = rz / ps;
    x = trunc(cp_axpy(x, step, p), spec);
    r = trunc(cp_axpy(r, -step, s), spec);
    rep.iterations = k + 1;
    max_seen = std::max({max_seen, x.rank(), r.rank(), p.rank()});
    res = cp_norm(r) / bnorm;
    rep.residual_history.push_back(res);
    if (res <= cfg.residual_tol) {
      rep.converged = true;
      break;
    }
    z = precond.apply_truncated(r, spec);
    const double rz_next = cp_inner(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    p = trunc(cp_axpy(z, beta, p), spec);
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  rep.seconds_per_iteration = rep.iterations > 0 ? elapsed.count() / rep.iterations : 0.0;
  rep.final_residual = res;
  rep.final_rank = x.rank();
  rep.max_rank_seen = max_seen;
  out.x = std::move(x);
  return out;
}

CoreMethod default_method(int d) { return d == 2 ? CoreMethod::DenseSvd : CoreMethod::MultigridTucker; }

namespace {

// p / a with p = sum of mode values: exact rank d.
std::optional<DiagOpFunction> exact_power(const CoreFunctionKind& kind, const EigenSpectrum& spectrum) {
  if (kind.tag != CoreKind::Power || kind.outer_power() != 1.0) return std::nullopt;
  return DiagOpFunction{spectrum, kind, cp_scale(plus_part_core(kind, spectrum), 1.0 / kind.a), 0.0};
}

}  // namespace

LowRankOperator build_system_operator(const CoreFunctionKind& kind, const EigenSpectrum& spectrum,
                                      const SolverConfig& cfg) {
  if (auto exact = exact_power(kind, spectrum)) return LowRankOperator(std::move(*exact));
  return LowRankOperator(build_core(kind, spectrum, TruncationSpec::relative(cfg.op_eps),
                                    default_method(spectrum.order()), cfg.core_options));
}

LowRankOperator build_preconditioner(const CoreFunctionKind& system, const EigenSpectrum& spectrum, Index r,
                                     const CoreBuildOptions& options) {
  if (r < 1) throw InvalidArgument("build_preconditioner: rank must be >= 1");
  const CoreFunctionKind inverse = system.reciprocal();
  if (auto exact = exact_power(inverse, spectrum)) return LowRankOperator(std::move(*exact));
  return LowRankOperator(
      build_core(inverse, spectrum, TruncationSpec::fixed(r), default_method(spectrum.order()), options));
}

PcgResult solve_control(const CpTensor& y_design, const SolverConfig& cfg, const EigenSpectrum& spectrum) {
  cfg.validate();
  if (y_design.dims() != spectrum.dims()) throw InvalidArgument("solve_control: design dims do not match the grid");
  const CoreFunctionKind kind = cfg.kind(CoreKind::G2);
  const LowRankOperator fun = build_system_operator(kind, spectrum, cfg);
  const LowRankOperator pre = build_preconditioner(kind, spectrum, cfg.precond_rank, cfg.core_options);
  return pcg(fun, pre, y_design, CpTensor(y_design.dims()), cfg);
}

CpTensor control_direct(const CpTensor& y_design, const SolverConfig& cfg, const EigenSpectrum& spectrum) {
  cfg.validate();
  if (y_design.dims() != spectrum.dims()) throw InvalidArgument("control_direct: design dims do not match the grid");
  const LowRankOperator op = build_system_operator(cfg.kind(CoreKind::G3), spectrum, cfg);
  return op.apply_truncated(y_design, cfg.truncation());
}

PcgResult solve_state(const CpTensor& y_design, const SolverConfig& cfg, const EigenSpectrum& spectrum) {
  cfg.validate();
  if (y_design.dims() != spectrum.dims()) throw InvalidArgument("solve_state: design dims do not match the grid");
  const CoreFunctionKind kind = cfg.kind(CoreKind::State);
  const LowRankOperator fun = build_system_operator(kind, spectrum, cfg);
  const LowRankOperator pre = build_preconditioner(kind, spectrum, cfg.precond_rank, cfg.core_options);
  return pcg(fun, pre, y_design, CpTensor(y_design.dims()), cfg);
}

CpTensor state_from_control(const CpTensor& u, const SolverConfig& cfg, const EigenSpectrum& spectrum) {
  cfg.validate();
  const LowRankOperator op = build_system_operator(cfg.kind(CoreKind::G1), spectrum, cfg);
  return op.apply_truncated(u, cfg.truncation());
}

KktResidual kkt_residual(const CpTensor& y, const CpTensor& u, const CpTensor& p, const CpTensor& y_design,
                         const SolverConfig& cfg, const EigenSpectrum& spectrum) {
  cfg.validate();
  for (const CpTensor* t : {&y, &u, &p, &y_design}) {
    if (t->dims() != spectrum.dims()) throw InvalidArgument("kkt_residual: operand dims do not match the grid");
  }
  CoreFunctionKind power = cfg.kind(CoreKind::Power);
  power.a = 1.0;
  const LowRankOperator a_pow = build_system_operator(power, spectrum, cfg);
  double scale = cp_norm(y_design);
  if (scale == 0.0) scale = 1.0;
  KktResidual out;
  out.r1 = cp_norm_projected(cp_axpy(cp_add(y, a_pow.apply(p)), -1.0, y_design)) / scale;
  out.r2 = cp_norm_projected(cp_axpy(cp_scale(u, cfg.gamma), -cfg.beta, p)) / scale;
  out.r3 = cp_norm_projected(cp_axpy(a_pow.apply(y), -cfg.beta, u)) / scale;
  return out;
}

KktResidual kkt_residual(const CpTensor& y, const CpTensor& u, const CpTensor& y_design, const SolverConfig& cfg,
                         const EigenSpectrum& spectrum) {
  return kkt_residual(y, u, cp_scale(u, cfg.gamma / cfg.beta), y_design, cfg, spectrum);
}

std::string pcg_csv_header() { return "kind,d,n,alpha,r,eps,iterations,final_residual,seconds_per_iteration"; }

std::string pcg_csv_row(std::string_view kind, int d, Index n, double alpha, Index r, double eps,
                        const PcgReport& report) {
  std::ostringstream os;
  os.precision(6);
  os << kind << ',' << d << ',' << n << ',' << alpha << ',' << r << ',' << eps << ','
     << (report.converged ? report.iterations : -1) << ',' << report.final_residual << ','
     << report.seconds_per_iteration;
  return os.str();
}

}  // namespace fraclap
