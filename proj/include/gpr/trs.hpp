#pragma once

#include <gpr/objective.hpp>
#include <gpr/prelude.hpp>
#include <gpr/sym_eig.hpp>
#include <gpr/tangent.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <string>

// Reduction of the tangent-constrained trust-region subproblem to a real
// symmetric one, and its exact solution: interior Newton point when the model
// is convex with an interior minimizer, bisection on the multiplier
// otherwise, with an explicit hard-case completion along the bottom
// eigenvector.

namespace gpr {

struct RealTrsProblem {
  RMat A;  // d x d symmetric
  RVec b;  // length d
  double r = 0.0;
};

enum class TrsCase { interior, boundary, hard };

inline const char* to_string(TrsCase c) {
  switch (c) {
    case TrsCase::interior: return "interior";
    case TrsCase::boundary: return "boundary";
    case TrsCase::hard: return "hard";
  }
  return "?";
}

struct TrsSolution {
  RVec w;
  double lambda = 0.0;
  TrsCase kind = TrsCase::interior;
  double kkt_residual = 0.0;  // ||(A + lambda I) w + b||
  double q_value = 0.0;       // (1/2) w^T A w + b^T w
  double lambda_min_A = 0.0;  // smallest eigenvalue of A (free byproduct)
  double lambda_lo = 0.0;     // final bisection bracket
  double lambda_hi = 0.0;
  int bisect_iters = 0;
  bool nudged = false;        // a near-singular shift adjustment fired
};

// b and A of the reduced model f(z + U xi) ~ f(z) + xi^T b + (1/2) xi^T A xi.
// Both are real by symmetry of the stacked derivative products; the imaginary
// residue is checked before being discarded.
inline RealTrsProblem reduce_subproblem(const Ensemble& e, const CVec& z,
                                        const TangentBasis& basis, double delta) {
  require<ContractError>(delta > 0.0, "reduce_subproblem: radius must be positive");
  require<DimensionError>(z.size() == e.n(), "reduce_subproblem: z has wrong length");
  require<DimensionError>(basis.U.rows() == e.n(),
                          "reduce_subproblem: basis anchored at wrong dimension");
  const CVec g = wirtinger_grad(e, z);
  const CVec bc = basis.U.adjoint() * g;
  const CVec bfull = bc + bc.conjugate();
  const WirtingerHessian H = hessian_dense(e, z);
  const CMat M = basis.U.adjoint() * H.B * basis.U +
                 basis.U.adjoint() * H.C * basis.U.conjugate();
  const CMat afull = M + M.conjugate();

  const double bscale = std::max(1.0, bfull.cwiseAbs().maxCoeff());
  const double ascale = std::max(1.0, afull.cwiseAbs().maxCoeff());
  require<NumericalError>(bfull.imag().cwiseAbs().maxCoeff() <= 1e-10 * bscale,
                          "reduce_subproblem: gradient imaginary residue");
  require<NumericalError>(afull.imag().cwiseAbs().maxCoeff() <= 1e-10 * ascale,
                          "reduce_subproblem: hessian imaginary residue");
  RealTrsProblem out;
  out.b = bfull.real();
  RMat ar = afull.real();
  require<NumericalError>((ar - ar.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * ascale,
                          "reduce_subproblem: hessian asymmetry residue");
  out.A = 0.5 * (ar + ar.transpose());
  out.r = delta;
  return out;
}

// Exact solve.  Procedure: positive-definite interior test first; otherwise
// bisection on the multiplier over [0, ||b||/r + d*max|A_ij|], halving while
// the bracket is wider than eps.  A shift whose smallest eigenvalue is
// negative raises the lower end; otherwise the shifted Newton step decides
// the side, with the shift nudged up by eps/10 when it sits within the
// singularity tolerance.  Reconstruction uses the PD solve when safely
// regular, else the floored pseudo-inverse plus a bottom-eigenvector
// completion to the sphere (hard case).
inline TrsSolution solve_trs_exact(const RealTrsProblem& p, double eps) {
  check_symmetric_finite(p.A, "solve_trs_exact");
  require<DataFormatError>(p.b.allFinite(), "solve_trs_exact: non-finite b");
  require<ContractError>(p.b.size() == p.A.rows(), "solve_trs_exact: b length mismatch");
  require<ContractError>(p.r > 0.0, "solve_trs_exact: radius must be positive");
  require<ContractError>(eps > 0.0, "solve_trs_exact: eps must be positive");
  const Eigen::Index d = p.A.rows();
  const double inf = std::numeric_limits<double>::infinity();

  // one-time tridiagonalization A = Q T Q^T; every shifted solve is then O(d)
  RMat Q = 0.5 * (p.A + p.A.transpose());
  RVec tdiag, te;
  householder_tridiagonalize(Q, tdiag, te);
  RVec tsub(d > 1 ? d - 1 : 0);
  for (Eigen::Index i = 0; i + 1 < d; ++i) tsub[i] = te[i + 1];
  const double lmin0 = tridiag_eigenvalues(tdiag, tsub)[0];
  const RVec qtb = Q.transpose() * p.b;

  // ||(T + lam I)^{-1} qtb||; equals the norm in original coordinates
  const auto shifted_norm = [&](double lam, RVec* coords) -> double {
    TridiagLU lu(RVec(tdiag.array() + lam), tsub, tsub);
    RVec u = -qtb;
    if (!lu.solve(u)) return inf;
    const double nrm = u.norm();
    if (coords != nullptr) *coords = u;
    return std::isfinite(nrm) ? nrm : inf;
  };

  TrsSolution sol;
  sol.lambda_min_A = lmin0;
  const double sing_tol = 10.0 * eps;

  const auto finalize = [&](RVec w, double lambda, TrsCase kind) {
    sol.w = std::move(w);
    sol.lambda = lambda;
    sol.kind = kind;
    sol.q_value = 0.5 * sol.w.dot(p.A * sol.w) + p.b.dot(sol.w);
    sol.kkt_residual = ((p.A * sol.w + lambda * sol.w) + p.b).norm();
    return sol;
  };

  if (lmin0 > 0.0) {
    RVec u;
    if (shifted_norm(0.0, &u) <= p.r) return finalize(Q * u, 0.0, TrsCase::interior);
  }

  double lam_lo = 0.0;
  double lam_hi = p.b.norm() / p.r + static_cast<double>(d) * p.A.cwiseAbs().maxCoeff();
  // at large multiplier scale the absolute eps can fall below the spacing of
  // doubles; floor the width tolerance at a few ulps of the bracket endpoints
  const auto width_tol = [&] {
    return std::max(eps, 4.0 * std::numeric_limits<double>::epsilon() *
                             std::max(std::abs(lam_lo), std::abs(lam_hi)));
  };
  // Monotone halving from any representable bracket down to the >= 4-ulp width
  // floor needs at most ~log2(DBL_MAX / (4 eps DBL_MIN-scale)) ~ 1100 steps,
  // so the guard only trips on genuine non-termination.
  while (lam_hi - lam_lo >= width_tol()) {
    require<NumericalError>(++sol.bisect_iters <= 1500,
                            "solve_trs_exact: bisection failed to converge");
    double lm = 0.5 * (lam_lo + lam_hi);
    if (lmin0 + lm < 0.0) {
      lam_lo = lm;
      continue;
    }
    if (lmin0 + lm < sing_tol) {
      lm += eps / 10.0;
      sol.nudged = true;
    }
    if (shifted_norm(lm, nullptr) >= p.r)
      lam_lo = lm;
    else
      lam_hi = lm;
  }
  const double lam_hat = lam_hi;
  sol.lambda_lo = lam_lo;
  sol.lambda_hi = lam_hi;

  if (lmin0 + lam_hat > sing_tol) {
    RVec u;
    require<NumericalError>(std::isfinite(shifted_norm(lam_hat, &u)),
                            "solve_trs_exact: shifted solve failed unexpectedly");
    return finalize(Q * u, lam_hat, TrsCase::boundary);
  }

  // near-singular shift: full eigensystem (reusing the tridiagonal form),
  // pseudo-inverse with eigenvalues under eps treated as null, and sphere
  // completion when the solve is interior
  RMat V = Q;
  RVec evals = tdiag, ee = te;
  ql_implicit_shift(evals, ee, &V);
  const RVec beta = V.transpose() * p.b;
  RVec wp = RVec::Zero(d);
  for (Eigen::Index i = 0; i < d; ++i)
    if (evals[i] + lam_hat > sing_tol) wp -= (beta[i] / (evals[i] + lam_hat)) * V.col(i);
  const double wpn = wp.norm();
  if (wpn < p.r) {
    const double c = wp.dot(V.col(0));
    const double t = -c + std::sqrt(std::max(0.0, c * c + p.r * p.r - wpn * wpn));
    return finalize(wp + t * V.col(0), lam_hat, TrsCase::hard);
  }
  if (wpn > p.r) wp *= p.r / wpn;
  return finalize(std::move(wp), lam_hat, TrsCase::boundary);
}

// failure-triage dump of a subproblem and (optionally) its solution
inline std::string dump_trs_json(const RealTrsProblem& p, const TrsSolution* sol) {
  nlohmann::ordered_json j;
  j["d"] = p.A.rows();
  j["r"] = p.r;
  j["A"] = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < p.A.rows(); ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index k = 0; k < p.A.cols(); ++k) row.push_back(p.A(i, k));
    j["A"].push_back(std::move(row));
  }
  j["b"] = std::vector<double>(p.b.data(), p.b.data() + p.b.size());
  if (sol != nullptr) {
    j["w"] = std::vector<double>(sol->w.data(), sol->w.data() + sol->w.size());
    j["lambda"] = sol->lambda;
    j["case"] = to_string(sol->kind);
    j["kkt_residual"] = sol->kkt_residual;
    j["q_value"] = sol->q_value;
    j["lambda_min_A"] = sol->lambda_min_A;
    j["bisect_iters"] = sol->bisect_iters;
    j["nudged"] = sol->nudged;
  }
  return j.dump(2);
}

}  // namespace gpr
