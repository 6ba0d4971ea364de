#include <gpr/ensemble.hpp>
#include <gpr/objective.hpp>
#include <gpr/rng.hpp>
#include <gpr/sym_eig.hpp>
#include <gpr/tangent.hpp>
#include <gpr/trs.hpp>
#include <gpr/trs_oracle.hpp>

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include <cmath>
#include <vector>

using namespace gpr;

namespace {

RMat random_symmetric(Rng& rng, Eigen::Index d, double scale = 1.0) {
  RMat G(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) G(i, j) = rng.normal();
  return scale * 0.5 * (G + G.transpose());
}

RMat random_orthogonal(Rng& rng, Eigen::Index d) {
  RMat G(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) G(i, j) = rng.normal();
  Eigen::HouseholderQR<RMat> qr(G);
  return qr.householderQ() * RMat::Identity(d, d);
}

RVec random_rvec(Rng& rng, Eigen::Index d) {
  RVec v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("symmetric eigensolver basics") {
  RMat A = RMat::Zero(3, 3);
  A(0, 0) = 3.0;
  A(1, 1) = -2.0;
  A(2, 2) = 7.0;
  const MinEig me = min_eig_sym(A);
  REQUIRE(me.value == Catch::Approx(-2.0).margin(1e-14));
  REQUIRE(std::abs(me.vector[1]) == Catch::Approx(1.0).margin(1e-14));
  REQUIRE(std::abs(me.vector[0]) < 1e-14);
  REQUIRE(std::abs(me.vector[2]) < 1e-14);
}

TEST_CASE("symmetric eigensolver agrees with the library route") {
  Rng rng(1001, Stream::generic, 0);
  for (int rep = 0; rep < 12; ++rep) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.uniform() * 49);
    const RMat A = random_symmetric(rng, d, 1.0 + 3.0 * rng.uniform());
    const double anorm = std::max(1.0, A.cwiseAbs().maxCoeff() * static_cast<double>(d));
    const SymEig eig = sym_eig(A);
    // residual contract per eigenpair
    for (Eigen::Index i = 0; i < d; ++i) {
      const RVec r = A * eig.vectors.col(i) - eig.values[i] * eig.vectors.col(i);
      REQUIRE(r.norm() <= 1e-10 * anorm);
    }
    // orthonormality
    const RMat gram = eig.vectors.transpose() * eig.vectors;
    REQUIRE((gram - RMat::Identity(d, d)).cwiseAbs().maxCoeff() <= 1e-12);
    // ascending order and agreement with an independent decomposition
    Eigen::SelfAdjointEigenSolver<RMat> es(A);
    for (Eigen::Index i = 0; i < d; ++i) {
      if (i > 0) REQUIRE(eig.values[i] >= eig.values[i - 1]);
      REQUIRE(std::abs(eig.values[i] - es.eigenvalues()[i]) <= 1e-11 * anorm);
    }
  }
}

TEST_CASE("smallest eigenvalue: shift equivariance and Rayleigh domination") {
  Rng rng(1002, Stream::generic, 0);
  const Eigen::Index d = 24;
  const RMat A = random_symmetric(rng, d);
  const MinEig me = min_eig_sym(A);
  const double shift = 3.75;
  const MinEig ms = min_eig_sym(RMat(A + shift * RMat::Identity(d, d)));
  REQUIRE(ms.value == Catch::Approx(me.value + shift).margin(1e-11));
  for (int it = 0; it < 100; ++it) {
    RVec x = random_rvec(rng, d);
    x /= x.norm();
    REQUIRE(me.value <= x.dot(A * x) + 1e-12);
  }
}

TEST_CASE("repeated eigenvalues keep the residual contract") {
  Rng rng(1003, Stream::generic, 0);
  const Eigen::Index d = 5;
  const RMat V = random_orthogonal(rng, d);
  RVec lam(d);
  lam << 1.0, 1.0, 1.0, 5.0, 9.0;
  const RMat A = V * lam.asDiagonal() * V.transpose();
  const SymEig eig = sym_eig(A);
  const double anorm = 9.0 * d;
  for (Eigen::Index i = 0; i < d; ++i) {
    REQUIRE((A * eig.vectors.col(i) - eig.values[i] * eig.vectors.col(i)).norm() <=
            1e-10 * anorm);
    REQUIRE(eig.values[i] == Catch::Approx(lam[i]).margin(1e-12 * anorm));
  }
}

TEST_CASE("tridiagonal eigenvalues match the dense path") {
  Rng rng(1004, Stream::generic, 0);
  const Eigen::Index d = 30;
  RVec diag = random_rvec(rng, d), sub = random_rvec(rng, d - 1);
  RMat T = RMat::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) T(i, i) = diag[i];
  for (Eigen::Index i = 0; i + 1 < d; ++i) T(i, i + 1) = T(i + 1, i) = sub[i];
  const RVec ev = tridiag_eigenvalues(diag, sub);
  Eigen::SelfAdjointEigenSolver<RMat> es(T);
  for (Eigen::Index i = 0; i < d; ++i)
    REQUIRE(ev[i] == Catch::Approx(es.eigenvalues()[i]).margin(1e-11 * 30.0));
}

TEST_CASE("pivoted tridiagonal solver") {
  Rng rng(1005, Stream::generic, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.uniform() * 40);
    RVec diag = random_rvec(rng, d);
    RVec sub = d > 1 ? RVec(5.0 * random_rvec(rng, d - 1)) : RVec(0);
    if (rep % 3 == 0 && d > 1) diag[d / 2] = 0.0;  // force a pivot swap mid-stream
    RMat T = RMat::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) T(i, i) = diag[i];
    for (Eigen::Index i = 0; i + 1 < d; ++i) T(i, i + 1) = T(i + 1, i) = sub[i];
    const RVec rhs = random_rvec(rng, d);
    TridiagLU lu(diag, sub, sub);
    RVec x = rhs;
    REQUIRE(lu.solve(x));
    REQUIRE((T * x - rhs).norm() <= 1e-9 * std::max(1.0, rhs.norm()) *
                                        std::max(1.0, T.cwiseAbs().maxCoeff()));
  }
  // exactly singular 1x1
  TridiagLU sing((RVec(1) << 0.0).finished(), RVec(0), RVec(0));
  REQUIRE(sing.singular());
  RVec one = RVec::Ones(1);
  REQUIRE_FALSE(sing.solve(one));
}

TEST_CASE("tangent basis construction") {
  // n = 1, z = 1: the imaginary axis is removed, the real axis remains
  CVec z1(1);
  z1 << cxd(1.0, 0.0);
  const TangentBasis b1 = build_tangent_basis(z1);
  REQUIRE(b1.U.rows() == 1);
  REQUIRE(b1.U.cols() == 1);
  REQUIRE(std::abs(b1.U(0, 0) - cxd(1.0, 0.0)) < 1e-15);

  Rng rng(1006, Stream::generic, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.uniform() * 12);
    const CVec z = rng.cnormal_vec(n);
    const TangentBasis tb = build_tangent_basis(z);
    REQUIRE(tb.U.cols() == 2 * n - 1);
    // real-orthonormal columns
    RMat W(2 * n, 2 * n - 1);
    for (Eigen::Index j = 0; j < tb.U.cols(); ++j) W.col(j) = to_real_vec(tb.U.col(j));
    REQUIRE((W.transpose() * W - RMat::Identity(2 * n - 1, 2 * n - 1))
                .cwiseAbs()
                .maxCoeff() <= 1e-14);
    // tangency: each column is orthogonal to the iz direction
    for (Eigen::Index j = 0; j < tb.U.cols(); ++j) {
      const cxd ip = (z * cxd(0.0, 1.0)).dot(tb.U.col(j));  // (iz)^* u_j
      REQUIRE(std::abs(ip.real()) <= 1e-14 * z.norm());
    }
    // round trip: norms preserved, constraint satisfied
    const RVec xi = random_rvec(rng, 2 * n - 1);
    const CVec delta = from_basis(tb, xi);
    REQUIRE(std::abs(delta.norm() - xi.norm()) <= 1e-12 * xi.norm());
    REQUIRE(std::abs(delta.dot(z).imag()) <= 1e-12 * delta.norm() * z.norm());
  }

  REQUIRE_THROWS_AS(build_tangent_basis(CVec::Zero(3)), DegeneratePointError);

  const TangentBasis id2 = identity_basis_2n(3);
  RVec xi(6);
  xi << 1, 2, 3, 4, 5, 6;
  const CVec delta = from_basis(id2, xi);
  REQUIRE(std::abs(delta[0] - cxd(1, 4)) < 1e-15);
  REQUIRE(std::abs(delta[2] - cxd(3, 6)) < 1e-15);
  RMat W(6, 6);
  for (Eigen::Index j = 0; j < 6; ++j) W.col(j) = to_real_vec(id2.U.col(j));
  REQUIRE((W.transpose() * W - RMat::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("subproblem reduction reproduces the local model") {
  Rng rng(1007, Stream::generic, 0);
  for (int rep = 0; rep < 8; ++rep) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.uniform() * 6);
    const Eigen::Index m = 6 * n;
    const CVec x = rng.cnormal_vec(n);
    const Ensemble e = gen_gaussian_ensemble(n, m, x, 7100 + rep);
    const CVec z = rng.ball(n, 2.0 * x.norm()) + 0.05 * rng.cnormal_vec(n);
    const TangentBasis tb = build_tangent_basis(z);
    const RealTrsProblem p = reduce_subproblem(e, z, tb, 0.5);
    REQUIRE(p.r == 0.5);
    REQUIRE((p.A - p.A.transpose()).cwiseAbs().maxCoeff() <=
            1e-12 * std::max(1.0, p.A.cwiseAbs().maxCoeff()));

    const CVec g = wirtinger_grad(e, z);
    const double f0 = eval_f(e, z);
    for (int probe = 0; probe < 6; ++probe) {
      RVec xi = random_rvec(rng, 2 * n - 1);
      xi *= 0.3 / xi.norm();
      const CVec delta = from_basis(tb, xi);
      // gradient part matches the stacked directional derivative
      const double lin = xi.dot(p.b);
      const double lin_direct = 2.0 * delta.dot(g).real();
      REQUIRE(std::abs(lin - lin_direct) <= 1e-10 * std::max(1.0, std::abs(lin_direct)));
      // quadratic part matches the streamed quadratic form
      const double quad = xi.dot(p.A * xi);
      const double quad_direct = hessian_quadratic_form(e, z, delta);
      REQUIRE(std::abs(quad - quad_direct) <=
              1e-9 * std::max(1.0, std::abs(quad_direct)));
      // assembled model equals the direct Taylor model
      const double model = f0 + lin + 0.5 * quad;
      const double taylor = f0 + lin_direct + 0.5 * quad_direct;
      REQUIRE(std::abs(model - taylor) <= 1e-9 * std::max(1.0, std::abs(taylor)));
    }
  }
}

TEST_CASE("model error decays at cubic order in the step") {
  Rng rng(1008, Stream::generic, 0);
  const Eigen::Index n = 6, m = 48;
  const CVec x = rng.cnormal_vec(n);
  const Ensemble e = gen_gaussian_ensemble(n, m, x, 7200);
  const CVec z = rng.ball(n, 1.5 * x.norm());
  const TangentBasis tb = build_tangent_basis(z);
  const RealTrsProblem p = reduce_subproblem(e, z, tb, 1.0);
  const double f0 = eval_f(e, z);

  const auto model_err = [&](const RVec& xi) {
    const double model = f0 + xi.dot(p.b) + 0.5 * xi.dot(p.A * xi);
    return std::abs(eval_f(e, CVec(z + from_basis(tb, xi))) - model);
  };
  // fit the cubic constant at one scale, verify at half the scale
  const double tau = 1e-2 * z.norm();
  double lhat = 0.0;
  for (int it = 0; it < 50; ++it) {
    RVec xi = random_rvec(rng, 2 * n - 1);
    xi *= tau / xi.norm();
    lhat = std::max(lhat, 3.0 * model_err(xi) / (tau * tau * tau));
  }
  REQUIRE(lhat > 0.0);
  const double tau2 = 0.5 * tau;
  for (int it = 0; it < 50; ++it) {
    RVec xi = random_rvec(rng, 2 * n - 1);
    xi *= tau2 / xi.norm();
    REQUIRE(model_err(xi) <= (1.0 / 3.0) * (2.0 * lhat) * tau2 * tau2 * tau2);
  }
}

namespace {

struct SuiteStats {
  int hard = 0, interior = 0, boundary = 0;
};

void check_against_oracle(const RealTrsProblem& p, double eps, SuiteStats& stats,
                          bool expect_hard = false) {
  const TrsSolution sol = solve_trs_exact(p, eps);
  const TrsSolution ora = trs_eigen_oracle(p);
  const double scale = std::max(1.0, p.A.cwiseAbs().maxCoeff());

  REQUIRE(sol.w.norm() <= p.r * (1.0 + 1e-10));
  REQUIRE(sol.lambda >= 0.0);
  REQUIRE(sol.kkt_residual <= 1e-8);
  REQUIRE(sol.lambda_min_A + sol.lambda >= -1e-8 * scale);
  // primal value agreement with the independent route
  REQUIRE(std::abs(sol.q_value - ora.q_value) <= 1e-8);
  REQUIRE(ora.kkt_residual <= 1e-8);
  REQUIRE(ora.lambda >= std::max(0.0, -ora.lambda_min_A) - 1e-12);
  // multiplier uniqueness on constrained solutions
  if (sol.kind != TrsCase::interior && ora.kind != TrsCase::interior)
    REQUIRE(std::abs(sol.lambda - ora.lambda) <= 1e-9 * std::max(1.0, ora.lambda));
  if (expect_hard) {
    REQUIRE(sol.kind == TrsCase::hard);
    REQUIRE(sol.w.norm() == Catch::Approx(p.r).margin(1e-8));
  }
  switch (sol.kind) {
    case TrsCase::interior: ++stats.interior; break;
    case TrsCase::boundary: ++stats.boundary; break;
    case TrsCase::hard: ++stats.hard; break;
  }
}

RealTrsProblem constructed_hard_case(Rng& rng, Eigen::Index d, bool degenerate_bottom) {
  const RMat V = random_orthogonal(rng, d);
  RVec lam(d);
  const double a = 0.5 + 2.0 * rng.uniform();
  lam[0] = -a;
  Eigen::Index bottom = 1;
  if (degenerate_bottom && d >= 3) {
    lam[1] = -a;
    bottom = 2;
  }
  for (Eigen::Index i = bottom; i < d; ++i) lam[i] = -a + 0.3 + 3.0 * rng.uniform();
  RVec beta = random_rvec(rng, d);
  for (Eigen::Index i = 0; i < bottom; ++i) beta[i] = 0.0;  // b orthogonal to bottom space
  RealTrsProblem p;
  p.r = 0.5 + rng.uniform();
  // scale the interior part so the pseudo-solve lands strictly inside the ball
  double wp2 = 0.0;
  for (Eigen::Index i = bottom; i < d; ++i) wp2 += sq(beta[i] / (lam[i] + a));
  if (wp2 > 0.0) beta *= 0.5 * p.r / std::sqrt(wp2);
  p.A = V * lam.asDiagonal() * V.transpose();
  p.b = V * beta;
  return p;
}

}  // namespace

TEST_CASE("subproblem solver handbook cases") {
  SuiteStats stats;
  // unconstrained minimum inside the ball
  RealTrsProblem interior;
  interior.A = RMat::Identity(2, 2);
  interior.b = -RVec::Unit(2, 0);
  interior.r = 10.0;
  const TrsSolution si = solve_trs_exact(interior, 1e-12);
  REQUIRE(si.kind == TrsCase::interior);
  REQUIRE(si.lambda == 0.0);
  REQUIRE((si.w - RVec::Unit(2, 0)).norm() <= 1e-12);

  // pure negative curvature: sphere point along the bottom eigenvector
  RealTrsProblem hard;
  hard.A = RMat::Zero(2, 2);
  hard.A(0, 0) = -1.0;
  hard.A(1, 1) = 2.0;
  hard.b = RVec::Zero(2);
  hard.r = 1.0;
  const TrsSolution sh = solve_trs_exact(hard, 1e-12);
  REQUIRE(sh.kind == TrsCase::hard);
  REQUIRE(std::abs(sh.lambda - 1.0) <= 1e-9);
  REQUIRE(std::abs(std::abs(sh.w[0]) - 1.0) <= 1e-10);
  REQUIRE(std::abs(sh.w[1]) <= 1e-10);
  REQUIRE(sh.q_value == Catch::Approx(-0.5).margin(1e-10));

  // oracle: zero gradient with a positive semidefinite model stays at zero
  RealTrsProblem psd;
  psd.A = RMat::Zero(2, 2);
  psd.A(1, 1) = 1.0;
  psd.b = RVec::Zero(2);
  psd.r = 1.0;
  const TrsSolution so = trs_eigen_oracle(psd);
  REQUIRE(so.kind == TrsCase::interior);
  REQUIRE(so.w.norm() <= 1e-14);
  REQUIRE(so.lambda == 0.0);

  check_against_oracle(interior, 1e-12, stats);
  check_against_oracle(hard, 1e-12, stats, true);
}

TEST_CASE("randomized subproblem suite agrees with the eigen oracle") {
  Rng rng(1009, Stream::generic, 0);
  SuiteStats stats;
  int count = 0;
  // constructed hard cases (including degenerate bottom eigenspaces)
  for (int it = 0; it < 25; ++it) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.uniform() * 20);
    RealTrsProblem p = constructed_hard_case(rng, d, it % 3 == 0);
    check_against_oracle(p, 1e-12, stats, true);
    ++count;
  }
  REQUIRE(stats.hard >= 25);
  // generic randomized instances
  for (int it = 0; it < 120; ++it) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.uniform() * 20);
    RealTrsProblem p;
    p.A = random_symmetric(rng, d, 0.5 + 2.0 * rng.uniform());
    p.b = random_rvec(rng, d);
    p.r = 0.05 + 3.0 * rng.uniform();
    check_against_oracle(p, 1e-12, stats);
    ++count;
  }
  // forced interior instances
  for (int it = 0; it < 30; ++it) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.uniform() * 20);
    RMat G(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) G(i, j) = rng.normal();
    RealTrsProblem p;
    p.A = G.transpose() * G + RMat::Identity(d, d);
    p.b = 0.1 * random_rvec(rng, d);
    p.r = 5.0;
    check_against_oracle(p, 1e-12, stats);
    ++count;
  }
  // forced boundary instances
  for (int it = 0; it < 30; ++it) {
    const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.uniform() * 20);
    RealTrsProblem p;
    p.A = random_symmetric(rng, d);
    p.b = 20.0 * random_rvec(rng, d);
    p.r = 0.2;
    check_against_oracle(p, 1e-12, stats);
    ++count;
  }
  REQUIRE(count >= 200);
  REQUIRE(stats.interior > 0);
  REQUIRE(stats.boundary > 0);
}

TEST_CASE("subproblem debug dump is parseable json") {
  Rng rng(1010, Stream::generic, 0);
  RealTrsProblem p;
  p.A = random_symmetric(rng, 3);
  p.b = random_rvec(rng, 3);
  p.r = 1.0;
  const TrsSolution sol = solve_trs_exact(p, 1e-10);
  const auto j = nlohmann::json::parse(dump_trs_json(p, &sol));
  REQUIRE(j.at("d").get<int>() == 3);
  REQUIRE(j.at("A").size() == 3);
  REQUIRE(j.at("b").size() == 3);
  REQUIRE(j.at("w").size() == 3);
  REQUIRE(j.contains("lambda"));
  REQUIRE(j.contains("case"));
  const auto jp = nlohmann::json::parse(dump_trs_json(p, nullptr));
  REQUIRE_FALSE(jp.contains("w"));
}
