#pragma once

#include <gpr/alignment.hpp>
#include <gpr/ensemble.hpp>
#include <gpr/objective.hpp>
#include <gpr/rng.hpp>
#include <gpr/tangent.hpp>
#include <gpr/trs.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

// Iterative solvers: the tangent-constrained trust-region method (exact
// subproblem solves in the 2n-1 dimensional reduced space) and the fixed-step
// gradient-descent baseline, with per-iteration traces.

namespace gpr {

enum class Algo { trm_fixed, trm_adaptive, gd };

inline const char* to_string(Algo a) {
  switch (a) {
    case Algo::trm_fixed: return "trm-fixed";
    case Algo::trm_adaptive: return "trm-adaptive";
    case Algo::gd: return "gd";
  }
  return "?";
}

inline Algo algo_from_name(const std::string& s) {
  if (s == "trm-fixed") return Algo::trm_fixed;
  if (s == "trm-adaptive") return Algo::trm_adaptive;
  if (s == "gd") return Algo::gd;
  throw DataFormatError("unknown algorithm name: " + s);
}

struct SolverConfig {
  Algo algo = Algo::trm_adaptive;
  // trust-region geometry; zeros mean "derive from the data scale"
  double delta = 0.0;       // fixed mode: constant radius (default: theory radius)
  double delta_max = 0.0;   // adaptive cap (default: x_norm_est)
  double eta_accept = 0.1;  // accept a step when the actual/model ratio exceeds this
  double grow = 2.0;
  double shrink = 0.25;
  double step_mu = 0.05;    // first-order step, in units of 1 / x_norm_est^2
  double tol_grad = 0.0;    // 0 = auto: gd 1e-5 * x_norm_est^3 (half-gradient norm);
                            //          trm 1e-11 * x_norm_est^2 (stacked norm)
  double tol_eps_trs = 1e-10;
  int max_iters = 500;
};

inline void validate(const SolverConfig& c) {
  require<ContractError>(c.delta >= 0.0 && c.delta_max >= 0.0,
                         "solver config: radii must be nonnegative");
  require<ContractError>(0.0 < c.shrink && c.shrink < 1.0 && c.grow > 1.0,
                         "solver config: need 0 < shrink < 1 < grow");
  require<ContractError>(0.0 <= c.eta_accept && c.eta_accept < 1.0,
                         "solver config: need 0 <= eta_accept < 1");
  require<ContractError>(c.step_mu > 0.0, "solver config: step_mu must be positive");
  require<ContractError>(c.tol_grad >= 0.0 && c.tol_eps_trs > 0.0,
                         "solver config: tolerances must be positive");
  require<ContractError>(c.max_iters >= 1, "solver config: max_iters must be positive");
}

enum class StepKind { gd, trm_constrained, trm_unconstrained, rejected };

inline const char* to_string(StepKind k) {
  switch (k) {
    case StepKind::gd: return "gd";
    case StepKind::trm_constrained: return "trm-constrained";
    case StepKind::trm_unconstrained: return "trm-unconstrained";
    case StepKind::rejected: return "rejected";
  }
  return "?";
}

struct TraceRow {
  int iter = 0;
  double f = 0.0;
  double grad_norm = 0.0;  // stacked-norm convention, sqrt(2)||grad_z f||
  double dist = std::numeric_limits<double>::quiet_NaN();  // NaN when x unknown
  StepKind step_kind = StepKind::gd;
  double delta_used = 0.0;
  double model_decrease = 0.0;
  bool fallback_2n = false;  // degenerate-point full-dimensional basis used
};

struct RunTrace {
  std::vector<TraceRow> rows;
  bool diverged = false;
  bool converged = false;  // stopping predicate met before max_iters
  bool stalled = false;    // adaptive radius collapsed without meeting the predicate
};

struct SolveResult {
  CVec z;
  RunTrace trace;
};

// theory-mode radius ||x_est|| / (n^{7/2} log^{7/2} m), the regime in which
// every step of the fixed-radius method is provably effective
inline double theory_delta(Eigen::Index n, Eigen::Index m, double x_norm_est) {
  const double nn = static_cast<double>(n);
  const double lm = std::log(static_cast<double>(m));
  return x_norm_est / (std::pow(nn, 3.5) * std::pow(lm, 3.5));
}

// guard radius of the initial sublevel set, 3 sqrt(n log m) R0
inline double guard_radius(const Ensemble& e) {
  const NormEstimate est = estimate_norm_and_radius(e);
  const double nlogm =
      static_cast<double>(e.n()) * std::log(static_cast<double>(e.m()));
  return 3.0 * std::sqrt(nlogm) * est.R0;
}

namespace detail {

inline double fill_dist(const CVec* x_opt, const CVec& z) {
  if (x_opt == nullptr) return std::numeric_limits<double>::quiet_NaN();
  return dist_to_target(*x_opt, z);
}

}  // namespace detail

// Trust-region iteration z <- z + U xi*, with xi* the exact minimizer of the
// reduced quadratic model on the radius-Delta ball.  Fixed mode applies every
// step at constant radius; adaptive mode uses the standard actual-vs-model
// acceptance ratio.  Stops when the stacked gradient norm falls below
// tol_grad and the reduced Hessian is not meaningfully indefinite.
inline SolveResult trm_solve(const Ensemble& e, const SolverConfig& cfg_in, const CVec& z0,
                             const CVec* x_opt = nullptr) {
  validate(cfg_in);
  require<ContractError>(cfg_in.algo == Algo::trm_fixed || cfg_in.algo == Algo::trm_adaptive,
                         "trm_solve: config.algo must be a trust-region mode");
  require<DimensionError>(z0.size() == e.n(), "trm_solve: z0 has wrong length");

  const NormEstimate est = estimate_norm_and_radius(e);
  const double x2_est = sq(est.x_norm_est);
  require<ContractError>(z0.norm() <= guard_radius(e),
                         "trm_solve: z0 outside the guard radius");

  SolverConfig cfg = cfg_in;
  if (cfg.tol_grad == 0.0) cfg.tol_grad = 1e-11 * x2_est;
  if (cfg.delta_max == 0.0) cfg.delta_max = est.x_norm_est;
  const bool fixed = cfg.algo == Algo::trm_fixed;
  double delta = cfg.delta;
  if (delta == 0.0)
    delta = fixed ? theory_delta(e.n(), e.m(), est.x_norm_est) : est.x_norm_est / 10.0;

  SolveResult out;
  out.z = z0;
  const double f0 = eval_f(e, out.z);
  const double f_guard = 1e6 * std::max({f0, sq(x2_est), 1e-300});

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const double f = eval_f(e, out.z);
    const CVec g = wirtinger_grad(e, out.z);
    const double gnorm = stacked_grad_norm(g);

    TraceRow row;
    row.iter = iter;
    row.f = f;
    row.grad_norm = gnorm;
    row.dist = detail::fill_dist(x_opt, out.z);
    row.delta_used = delta;

    if (f > f_guard) {
      row.step_kind = StepKind::rejected;
      out.trace.rows.push_back(row);
      out.trace.diverged = true;
      return out;
    }

    // reduced model and exact subproblem at the current point
    TangentBasis basis;
    try {
      basis = build_tangent_basis(out.z);
    } catch (const DegeneratePointError&) {
      basis = identity_basis_2n(e.n());
      row.fallback_2n = true;
    }
    const RealTrsProblem prob = reduce_subproblem(e, out.z, basis, delta);
    const TrsSolution sol = solve_trs_exact(prob, cfg.tol_eps_trs);
    row.step_kind = sol.kind == TrsCase::interior ? StepKind::trm_unconstrained
                                                  : StepKind::trm_constrained;
    row.model_decrease = -sol.q_value;

    // stopping test: small gradient and no meaningful negative curvature
    if (gnorm <= cfg.tol_grad && sol.lambda_min_A >= -cfg.tol_grad * est.x_norm_est) {
      out.trace.rows.push_back(row);
      out.trace.converged = true;
      return out;
    }

    const CVec step = from_basis(basis, sol.w);
    if (fixed) {
      out.z += step;
      out.trace.rows.push_back(row);
      continue;
    }

    // adaptive: actual-vs-model ratio
    const double f_new = eval_f(e, CVec(out.z + step));
    const double actual = f - f_new;
    const double model = std::max(-sol.q_value, 1e-300);
    const double rho = actual / model;
    if (rho >= cfg.eta_accept) {
      out.z += step;
    } else {
      row.step_kind = StepKind::rejected;
    }
    if (rho < 0.25) {
      delta *= cfg.shrink;
    } else if (rho > 0.75 && sol.w.norm() >= 0.99 * delta) {
      delta = std::min(cfg.grow * delta, cfg.delta_max);
    }
    out.trace.rows.push_back(row);

    // Radius collapse means the model decrease has fallen below the rounding
    // noise of f (e.g. a near-degenerate critical point of an undersampled
    // instance): no further step can be evaluated meaningfully, so stop and
    // report the stall instead of shrinking toward denormals.
    if (delta < 1e-14 * est.x_norm_est) {
      out.trace.stalled = true;
      break;
    }
  }

  // iteration budget exhausted (or stalled): record the final state
  TraceRow last;
  last.iter = out.trace.stalled ? static_cast<int>(out.trace.rows.size()) : cfg.max_iters;
  last.f = eval_f(e, out.z);
  last.grad_norm = stacked_grad_norm(wirtinger_grad(e, out.z));
  last.dist = detail::fill_dist(x_opt, out.z);
  last.step_kind = StepKind::trm_unconstrained;
  last.delta_used = delta;
  out.trace.rows.push_back(last);
  return out;
}

// Fixed-step gradient descent z <- z - mu grad_z f; the stopping test uses
// the half-gradient norm ||grad_z f|| (the trace still records the stacked
// norm, a factor sqrt(2) larger).
inline SolveResult gradient_descent(const Ensemble& e, const SolverConfig& cfg_in,
                                    const CVec& z0, const CVec* x_opt = nullptr) {
  validate(cfg_in);
  require<ContractError>(cfg_in.algo == Algo::gd, "gradient_descent: config.algo must be gd");
  require<DimensionError>(z0.size() == e.n(), "gradient_descent: z0 has wrong length");

  // The quartic's curvature grows like ||x||^2, so a constant step is only
  // stable at one scale. step_mu is therefore dimensionless: the update uses
  // mu / x_est^2, and the auto stopping tolerance 1e-5 scales by x_est^3. At
  // a unit-norm target both reduce to the plain constants.
  const double x_est = estimate_norm_and_radius(e).x_norm_est;
  const double mu_eff = cfg_in.step_mu / std::max(x_est * x_est, 1e-300);

  SolverConfig cfg = cfg_in;
  if (cfg.tol_grad == 0.0) cfg.tol_grad = 1e-5 * x_est * x_est * x_est;

  SolveResult out;
  out.z = z0;
  const double f0 = eval_f(e, out.z);
  const double f_guard = 1e6 * std::max(f0, 1e-300);

  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    const double f = eval_f(e, out.z);
    const CVec g = wirtinger_grad(e, out.z);
    const double half_norm = g.norm();

    TraceRow row;
    row.iter = iter;
    row.f = f;
    row.grad_norm = stacked_grad_norm(g);
    row.dist = detail::fill_dist(x_opt, out.z);
    row.step_kind = StepKind::gd;
    row.delta_used = mu_eff;
    row.model_decrease = 2.0 * mu_eff * g.squaredNorm();
    out.trace.rows.push_back(row);

    if (f > f_guard) {
      out.trace.diverged = true;
      return out;
    }
    if (half_norm <= cfg.tol_grad) {
      out.trace.converged = true;
      return out;
    }
    out.z -= mu_eff * g;
  }

  TraceRow last;
  last.iter = cfg.max_iters;
  last.f = eval_f(e, out.z);
  last.grad_norm = stacked_grad_norm(wirtinger_grad(e, out.z));
  last.dist = detail::fill_dist(x_opt, out.z);
  last.step_kind = StepKind::gd;
  last.delta_used = mu_eff;
  out.trace.rows.push_back(last);
  return out;
}

struct HessianBandProbe {
  double m_emp = 0.0;  // global minimum of the sampled forms
  double M_emp = 0.0;  // global maximum
  RVec point_min;      // per-point minima over the sampled directions
  RVec point_max;
};

// Samples points close to the target circle and random unit directions in the
// admissible (phase-orthogonal) subspace, recording extremes of the Hessian
// quadratic form; near the minimizers these concentrate inside the
// [22/25, 9/2] ||x||^2 band.
inline HessianBandProbe hessian_bound_probe(const Ensemble& e, const CVec& x,
                                            int num_points, std::uint64_t seed) {
  require<ContractError>(num_points >= 1, "hessian_bound_probe: need at least one point");
  require<DimensionError>(x.size() == e.n(), "hessian_bound_probe: size mismatch");
  constexpr int kDirections = 8;
  const double xn = x.norm();
  Rng rng(seed, Stream::direction, 0);
  HessianBandProbe probe;
  probe.point_min.resize(num_points);
  probe.point_max.resize(num_points);
  probe.m_emp = std::numeric_limits<double>::infinity();
  probe.M_emp = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < num_points; ++i) {
    const double phi = 2.0 * std::numbers::pi * rng.uniform();
    const CVec z = x * std::exp(cxd(0.0, phi)) + rng.ball(x.size(), xn / 20.0);
    const TangentBasis basis = build_tangent_basis(z);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < kDirections; ++k) {
      RVec xi = rng.normal_vec(basis.U.cols());
      const double nrm = xi.norm();
      if (nrm == 0.0) continue;
      xi /= nrm;
      const double form = hessian_quadratic_form(e, z, from_basis(basis, xi));
      lo = std::min(lo, form);
      hi = std::max(hi, form);
    }
    probe.point_min[i] = lo;
    probe.point_max[i] = hi;
    probe.m_emp = std::min(probe.m_emp, lo);
    probe.M_emp = std::max(probe.M_emp, hi);
  }
  return probe;
}

// CSV trace export: one row per iteration.
inline void write_trace_csv(const std::string& path, const RunTrace& trace) {
  std::ofstream out(path);
  require<DataFormatError>(out.good(), "write_trace_csv: cannot open " + path);
  out << "iter,f,grad_norm,dist,step_kind,delta,model_decrease\n";
  char buf[512];
  for (const TraceRow& r : trace.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%s,%.17g,%.17g\n", r.iter, r.f,
                  r.grad_norm, r.dist, to_string(r.step_kind), r.delta_used,
                  r.model_decrease);
    out << buf;
  }
  out.flush();
  require<DataFormatError>(out.good(), "write_trace_csv: write failed " + path);
}

}  // namespace gpr
