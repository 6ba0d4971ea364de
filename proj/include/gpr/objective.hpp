#pragma once

#include <gpr/ensemble.hpp>

#include <cmath>
#include <numbers>

namespace gpr {

// f(z) = (1/2m) sum_k (y_k^2 - |a_k^* z|^2)^2
inline double eval_f(const Ensemble& e, const CVec& z) {
  require<DimensionError>(z.size() == e.n(), "eval_f: z has wrong dimension");
  const CVec c = e.A * z;
  const double s =
      pairwise_sum(e.m(), [&](std::ptrdiff_t k) { return sq(e.ysq[k] - std::norm(c[k])); });
  return s / (2.0 * static_cast<double>(e.m()));
}

// grad_z f = (1/m) sum_k (|a_k^* z|^2 - y_k^2) (a_k^* z) a_k.
// The z-bar half of the stacked gradient is the conjugate of this vector, so
// the stacked norm is sqrt(2) times the norm returned here.
inline CVec wirtinger_grad(const Ensemble& e, const CVec& z) {
  require<DimensionError>(z.size() == e.n(), "wirtinger_grad: z has wrong dimension");
  const CVec c = e.A * z;
  CVec w(e.m());
  for (Eigen::Index k = 0; k < e.m(); ++k) w[k] = (std::norm(c[k]) - e.ysq[k]) * c[k];
  return e.A.adjoint() * w / static_cast<double>(e.m());
}

inline double stacked_grad_norm(const CVec& grad_z) { return std::numbers::sqrt2 * grad_z.norm(); }

// [delta; conj delta]^* Hessian [delta; conj delta]
//   = (2/m) sum_k ( (2|c_k|^2 - y_k^2)|d_k|^2 + Re(c_k^2 conj(d_k)^2) ),
// with c = A z and d = A delta.
inline double hessian_quadratic_form(const Ensemble& e, const CVec& z, const CVec& delta) {
  require<DimensionError>(z.size() == e.n() && delta.size() == e.n(),
                          "hessian_quadratic_form: wrong dimension");
  const CVec c = e.A * z;
  const CVec d = e.A * delta;
  const double s = pairwise_sum(e.m(), [&](std::ptrdiff_t k) {
    const double curv = (2.0 * std::norm(c[k]) - e.ysq[k]) * std::norm(d[k]);
    const cxd cross = c[k] * c[k] * std::conj(d[k]) * std::conj(d[k]);
    return curv + cross.real();
  });
  return 2.0 * s / static_cast<double>(e.m());
}

// Wirtinger Hessian blocks [[B, C], [conj C, conj B]]:
//   B = (1/m) sum_k (2|a_k^* z|^2 - y_k^2) a_k a_k^*   (Hermitian)
//   C = (1/m) sum_k (a_k^* z)^2 a_k a_k^T              (complex symmetric)
struct WirtingerHessian {
  CMat B, C;
};

constexpr Eigen::Index kHessianDenseCap = 2048;

inline WirtingerHessian hessian_dense(const Ensemble& e, const CVec& z,
                                      Eigen::Index cap = kHessianDenseCap) {
  require<DimensionError>(z.size() == e.n(), "hessian_dense: z has wrong dimension");
  if (e.n() > cap)
    throw CapacityError("hessian_dense: n = " + std::to_string(e.n()) + " exceeds cap " +
                        std::to_string(cap) + "; use hessian_quadratic_form instead");
  const CVec c = e.A * z;
  CVec w1(e.m()), w2(e.m());
  for (Eigen::Index k = 0; k < e.m(); ++k) {
    w1[k] = 2.0 * std::norm(c[k]) - e.ysq[k];
    w2[k] = c[k] * c[k];
  }
  const double m = static_cast<double>(e.m());
  WirtingerHessian H;
  H.B = e.A.adjoint() * (w1.asDiagonal() * e.A) / m;
  H.C = e.A.adjoint() * (w2.asDiagonal() * e.A.conjugate()) / m;
  H.B = (H.B + H.B.adjoint()).eval() / 2.0;    // Hermitian up to rounding
  H.C = (H.C + H.C.transpose()).eval() / 2.0;  // symmetric up to rounding
  return H;
}

// same quadratic form evaluated through the dense blocks (cross-check path)
inline double hessian_form_from_blocks(const WirtingerHessian& H, const CVec& delta) {
  const cxd bb = delta.adjoint() * H.B * delta;
  const cxd cc = delta.adjoint() * H.C * delta.conjugate();
  return 2.0 * bb.real() + 2.0 * cc.real();
}

}  // namespace gpr
