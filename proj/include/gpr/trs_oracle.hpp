#pragma once

#include <gpr/prelude.hpp>
#include <gpr/trs.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <vector>

// Independent verifier for the trust-region subproblem: full dense
// eigendecomposition (library-provided, deliberately a different spectral
// route than the production solver) plus safeguarded Newton root-finding on
// the secular equation.  Test-support code; capped at modest dimensions.

namespace gpr {

inline TrsSolution trs_eigen_oracle(const RealTrsProblem& p) {
  require<CapacityError>(p.A.rows() <= 200, "trs_eigen_oracle: dimension above cap");
  check_symmetric_finite(p.A, "trs_eigen_oracle");
  require<DataFormatError>(p.b.allFinite(), "trs_eigen_oracle: non-finite b");
  require<ContractError>(p.b.size() == p.A.rows(), "trs_eigen_oracle: b length mismatch");
  require<ContractError>(p.r > 0.0, "trs_eigen_oracle: radius must be positive");
  const Eigen::Index d = p.A.rows();

  Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (p.A + p.A.transpose()));
  require<NumericalError>(es.info() == Eigen::Success, "trs_eigen_oracle: eigensolver failed");
  const RVec lam = es.eigenvalues();  // ascending
  const RMat V = es.eigenvectors();
  const RVec beta = V.transpose() * p.b;

  TrsSolution sol;
  sol.lambda_min_A = lam[0];

  const auto assemble = [&](const RVec& coef) { return RVec(V * coef); };
  const auto finalize = [&](RVec w, double lambda, TrsCase kind) {
    sol.w = std::move(w);
    sol.lambda = lambda;
    sol.kind = kind;
    sol.q_value = 0.5 * sol.w.dot(p.A * sol.w) + p.b.dot(sol.w);
    sol.kkt_residual = ((p.A * sol.w + lambda * sol.w) + p.b).norm();
    return sol;
  };
  const auto coords_at = [&](double mu) {
    RVec c(d);
    for (Eigen::Index i = 0; i < d; ++i) c[i] = -beta[i] / (lam[i] + mu);
    return c;
  };

  if (lam[0] > 0.0) {
    const RVec c = coords_at(0.0);
    if (c.norm() <= p.r) return finalize(assemble(c), 0.0, TrsCase::interior);
  }

  const double mu_lo = std::max(0.0, -lam[0]);
  const double scale = std::max({1.0, std::abs(lam[0]), std::abs(lam[d - 1])});
  const double null_tol = 1e-12 * scale;

  // bottom eigenspace at the exact boundary shift, and b's component there
  std::vector<bool> bottom(static_cast<std::size_t>(d), false);
  double b_bottom = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    if (lam[i] + mu_lo <= null_tol) {
      bottom[static_cast<std::size_t>(i)] = true;
      b_bottom = std::max(b_bottom, std::abs(beta[i]));
    }
  }
  if (b_bottom <= 1e-12 * std::max(1.0, p.b.norm())) {
    RVec c = RVec::Zero(d);
    for (Eigen::Index i = 0; i < d; ++i)
      if (!bottom[static_cast<std::size_t>(i)]) c[i] = -beta[i] / (lam[i] + mu_lo);
    const double cn = c.norm();
    if (cn <= p.r) {
      if (mu_lo == 0.0) return finalize(assemble(c), 0.0, TrsCase::interior);
      const double t = std::sqrt(std::max(0.0, p.r * p.r - cn * cn));
      return finalize(assemble(c) + t * V.col(0), mu_lo, TrsCase::hard);
    }
  }

  // boundary case: psi(mu) = 1/||w(mu)|| - 1/r is increasing on (mu_lo, inf);
  // psi(mu_lo + ||b||/r) >= 0, so the root is bracketed
  double lo = mu_lo;
  double hi = mu_lo + p.b.norm() / p.r;
  double mu = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    double nw2 = 0.0, dphi = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double den = lam[i] + mu;
      const double wi = beta[i] / den;
      nw2 += wi * wi;
      dphi += wi * wi / den;
    }
    const double nw = std::sqrt(nw2);
    if (std::abs(nw - p.r) <= 1e-13 * p.r || hi - lo <= 1e-16 * std::max(1.0, hi)) break;
    const double psi = 1.0 / nw - 1.0 / p.r;
    if (psi < 0.0)
      lo = mu;
    else
      hi = mu;
    const double dpsi = dphi / (nw2 * nw);
    const double newton = mu - psi / dpsi;
    mu = (newton > lo && newton < hi) ? newton : 0.5 * (lo + hi);
  }
  return finalize(assemble(coords_at(mu)), mu, TrsCase::boundary);
}

}  // namespace gpr
