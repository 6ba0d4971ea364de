#pragma once

#include <gpr/alignment.hpp>

#include <cmath>

namespace gpr {

// Expectation of the objective over complex-Gaussian measurements:
//   E f = ||x||^4 + ||z||^4 - ||x||^2 ||z||^2 - |x^* z|^2
inline double population_f(const CVec& x, const CVec& z) {
  require<DimensionError>(x.size() == z.size(), "population_f: sizes differ");
  const double xn = x.squaredNorm(), zn = z.squaredNorm();
  return sq(xn) + sq(zn) - xn * zn - std::norm(x.dot(z));
}

// grad_z E f = (2||z||^2 I - ||x||^2 I - x x^*) z
inline CVec population_grad(const CVec& x, const CVec& z) {
  require<DimensionError>(x.size() == z.size(), "population_grad: sizes differ");
  return (2.0 * z.squaredNorm() - x.squaredNorm()) * z - x * x.dot(z);
}

// [d; conj d]^* Hessian(E f) [d; conj d] with blocks
//   B = 2 z z^* - x x^* + (2||z||^2 - ||x||^2) I,  C = 2 z z^T:
//   4|z^* d|^2 - 2|x^* d|^2 + 2(2||z||^2 - ||x||^2)||d||^2 + 4 Re((z^* d)^2)
inline double population_hessian_form(const CVec& x, const CVec& z, const CVec& d) {
  require<DimensionError>(x.size() == z.size() && x.size() == d.size(),
                          "population_hessian_form: sizes differ");
  const cxd zd = z.dot(d);
  return 4.0 * std::norm(zd) - 2.0 * std::norm(x.dot(d)) +
         2.0 * (2.0 * z.squaredNorm() - x.squaredNorm()) * d.squaredNorm() +
         4.0 * (zd * zd).real();
}

// Closed form of the population Hessian form along x e^{i phi(z)}; uses
// z^* x e^{i phi(z)} = |x^* z|:
//   8|x^* z|^2 + 4||x||^2 ||z||^2 - 4||x||^4
inline double population_curvature_along_target(const CVec& x, const CVec& z) {
  require<DimensionError>(x.size() == z.size(), "population_curvature_along_target: sizes differ");
  const double xn = x.squaredNorm(), zn = z.squaredNorm();
  return 8.0 * std::norm(x.dot(z)) + 4.0 * xn * zn - 4.0 * sq(xn);
}

// Real-Gaussian population objective for real signals (2D landscape mode):
//   (3/2)||x||^4 + (3/2)||z||^4 - ||x||^2 ||z||^2 - 2 (x^T z)^2
// Differs from the complex formula through the real fourth moment E g^4 = 3.
inline double population_f_real(const RVec& x, const RVec& z) {
  require<DimensionError>(x.size() == z.size(), "population_f_real: sizes differ");
  const double xn = x.squaredNorm(), zn = z.squaredNorm();
  return 1.5 * sq(xn) + 1.5 * sq(zn) - xn * zn - 2.0 * sq(x.dot(z));
}

}  // namespace gpr
