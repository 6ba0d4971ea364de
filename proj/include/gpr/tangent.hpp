#pragma once

#include <gpr/prelude.hpp>

#include <cmath>

// Real-coordinates view of C^n and the tangent basis used by the constrained
// trust-region step.  At an anchor z the admissible directions are
// {w : Im(w^* z) = 0}; under the identification C^n ~ R^{2n} this is the
// orthogonal complement of the vector corresponding to iz, a (2n-1)-plane.

namespace gpr {

// the anchor is numerically zero, so no phase direction exists to quotient out
class DegeneratePointError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

inline RVec to_real_vec(const CVec& w) {
  const Eigen::Index n = w.size();
  RVec v(2 * n);
  v.head(n) = w.real();
  v.tail(n) = w.imag();
  return v;
}

inline CVec to_complex_vec(const RVec& v) {
  require<ContractError>(v.size() % 2 == 0, "to_complex_vec: length must be even");
  const Eigen::Index n = v.size() / 2;
  CVec w(n);
  w.real() = v.head(n);
  w.imag() = v.tail(n);
  return w;
}

struct TangentBasis {
  CMat U;        // n x d complex; columns real-orthonormal under <a,b> = Re(a^* b)
  CVec z_anchor; // point the basis was built at (empty for the fallback basis)
};

// Householder basis of the tangent plane at z: reflect e_1 onto the unit
// normal n_hat = iz/||z|| in R^{2n} and keep the remaining 2n-1 columns.
// Columns are sign-normalized so that for n=1, z=1 the basis is {+1}.
inline TangentBasis build_tangent_basis(const CVec& z) {
  const Eigen::Index n = z.size();
  require<ContractError>(n > 0, "build_tangent_basis: empty anchor");
  const double zn = z.norm();
  require<DegeneratePointError>(zn > 1e-150,
                                "build_tangent_basis: anchor too close to zero");
  RVec nhat = to_real_vec(CVec(z * cxd(0.0, 1.0))) / zn;
  const double s = (nhat[0] >= 0.0) ? 1.0 : -1.0;
  RVec u = nhat;
  u[0] += s;
  const double unorm2 = u.squaredNorm();
  // W = columns 2..2n of H = I - 2 u u^T / ||u||^2; column 1 of H is -s*nhat
  const Eigen::Index d = 2 * n - 1;
  RMat W(2 * n, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double coef = 2.0 * u[j + 1] / unorm2;
    W.col(j) = -coef * u;
    W(j + 1, j) += 1.0;
  }
  if (s > 0.0) W = -W;
  TangentBasis out;
  out.z_anchor = z;
  out.U.resize(n, d);
  out.U.real() = W.topRows(n);
  out.U.imag() = W.bottomRows(n);
  return out;
}

// Fallback chart at a degenerate anchor: all of C^n as R^{2n}, i.e. the
// mapping xi -> xi_head + i xi_tail.  Used when no tangent plane exists.
inline TangentBasis identity_basis_2n(Eigen::Index n) {
  require<ContractError>(n > 0, "identity_basis_2n: n must be positive");
  TangentBasis out;
  out.U = CMat::Zero(n, 2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.U(i, i) = cxd(1.0, 0.0);
    out.U(i, n + i) = cxd(0.0, 1.0);
  }
  return out;
}

// delta = U xi for real coordinates xi
inline CVec from_basis(const TangentBasis& basis, const RVec& xi) {
  require<DimensionError>(xi.size() == basis.U.cols(),
                          "from_basis: coordinate length mismatch");
  return basis.U * xi.cast<cxd>();
}

}  // namespace gpr
