#pragma once

#include <gpr/prelude.hpp>

#include <cmath>
#include <limits>
#include <utility>
#include <vector>

// Dense symmetric eigenvalue machinery: Householder tridiagonalization,
// implicit-shift QL iteration, and a partial-pivot tridiagonal LU solver.
// This is the production spectral path; tests check it against an
// independently implemented oracle.

namespace gpr {

// Householder reduction of the symmetric matrix stored in V to tridiagonal
// form T = Q^T A Q.  On exit V holds the accumulated orthogonal Q,
// d the diagonal of T, and e the subdiagonal with the convention
// e[i] = T(i, i-1) for i >= 1 (e[0] = 0).
inline void householder_tridiagonalize(RMat& V, RVec& d, RVec& e) {
  const Eigen::Index n = V.rows();
  require<ContractError>(n > 0 && V.cols() == n, "tridiagonalize: matrix must be square");
  d.resize(n);
  e.resize(n);
  for (Eigen::Index i = n - 1; i > 0; --i) {
    const Eigen::Index l = i - 1;
    double h = 0.0;
    if (l > 0) {
      double scale = 0.0;
      for (Eigen::Index k = 0; k <= l; ++k) scale += std::abs(V(i, k));
      if (scale == 0.0) {
        e[i] = V(i, l);
      } else {
        for (Eigen::Index k = 0; k <= l; ++k) {
          V(i, k) /= scale;
          h += V(i, k) * V(i, k);
        }
        double f = V(i, l);
        double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        V(i, l) = f - g;
        f = 0.0;
        for (Eigen::Index j = 0; j <= l; ++j) {
          V(j, i) = V(i, j) / h;
          g = 0.0;
          for (Eigen::Index k = 0; k <= j; ++k) g += V(j, k) * V(i, k);
          for (Eigen::Index k = j + 1; k <= l; ++k) g += V(k, j) * V(i, k);
          e[j] = g / h;
          f += e[j] * V(i, j);
        }
        const double hh = f / (h + h);
        for (Eigen::Index j = 0; j <= l; ++j) {
          f = V(i, j);
          e[j] = g = e[j] - hh * f;
          for (Eigen::Index k = 0; k <= j; ++k) V(j, k) -= f * e[k] + g * V(i, k);
        }
      }
    } else {
      e[i] = V(i, l);
    }
    d[i] = h;
  }
  d[0] = 0.0;
  e[0] = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index l = i - 1;
    if (d[i] != 0.0) {
      for (Eigen::Index j = 0; j <= l; ++j) {
        double g = 0.0;
        for (Eigen::Index k = 0; k <= l; ++k) g += V(i, k) * V(k, j);
        for (Eigen::Index k = 0; k <= l; ++k) V(k, j) -= g * V(k, i);
      }
    }
    d[i] = V(i, i);
    V(i, i) = 1.0;
    for (Eigen::Index j = 0; j <= l; ++j) V(j, i) = V(i, j) = 0.0;
  }
}

// QL iteration with implicit shifts on the tridiagonal (d, e) produced by
// householder_tridiagonalize.  On exit d holds the eigenvalues in ascending
// order; if V is non-null its columns are rotated along (so passing the
// accumulated Q yields eigenvectors of the original matrix).
inline void ql_implicit_shift(RVec& d, RVec& e, RMat* V) {
  const Eigen::Index n = d.size();
  for (Eigen::Index i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (Eigen::Index l = 0; l < n; ++l) {
    int iter = 0;
    Eigen::Index m = l;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= std::numeric_limits<double>::epsilon() * dd) break;
      }
      if (m != l) {
        require<NumericalError>(iter++ < 64, "symmetric QL iteration failed to converge");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        Eigen::Index i = m - 1;
        for (; i >= l; --i) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          if (V != nullptr) {
            for (Eigen::Index k = 0; k < n; ++k) {
              f = (*V)(k, i + 1);
              (*V)(k, i + 1) = s * (*V)(k, i) + c * f;
              (*V)(k, i) = c * (*V)(k, i) - s * f;
            }
          }
        }
        if (r == 0.0 && i >= l) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
  // ascending sort (selection), carrying eigenvectors
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    Eigen::Index k = i;
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (d[j] < d[k]) k = j;
    if (k != i) {
      std::swap(d[i], d[k]);
      if (V != nullptr) V->col(i).swap(V->col(k));
    }
  }
}

// Eigenvalues (ascending) of the tridiagonal matrix given by diagonal d and
// subdiagonal sub, where sub[i] couples rows i and i+1.
inline RVec tridiag_eigenvalues(const RVec& d, const RVec& sub) {
  const Eigen::Index n = d.size();
  require<ContractError>(sub.size() == (n > 0 ? n - 1 : 0),
                         "tridiag_eigenvalues: subdiagonal length must be n-1");
  RVec dd = d, e(n);
  e[0] = 0.0;
  for (Eigen::Index i = 1; i < n; ++i) e[i] = sub[i - 1];
  ql_implicit_shift(dd, e, nullptr);
  return dd;
}

struct SymEig {
  RVec values;  // ascending
  RMat vectors; // columns match values
};

inline void check_symmetric_finite(const RMat& A, const char* who) {
  require<ContractError>(A.rows() == A.cols() && A.rows() > 0,
                         std::string(who) + ": matrix must be square");
  require<DataFormatError>(A.allFinite(), std::string(who) + ": non-finite entries");
  const double scale = A.cwiseAbs().maxCoeff();
  const double asym = (A - A.transpose()).cwiseAbs().maxCoeff();
  require<ContractError>(asym <= 1e-12 * std::max(1.0, scale),
                         std::string(who) + ": matrix is not symmetric");
}

inline SymEig sym_eig(const RMat& A) {
  check_symmetric_finite(A, "sym_eig");
  SymEig out;
  out.vectors = 0.5 * (A + A.transpose());
  RVec e;
  householder_tridiagonalize(out.vectors, out.values, e);
  ql_implicit_shift(out.values, e, &out.vectors);
  return out;
}

struct MinEig {
  double value = 0.0;
  RVec vector;
};

// Smallest eigenvalue and a unit eigenvector; residual ||Av - lambda v|| is
// bounded by 1e-10 ||A|| (checked in tests against an independent oracle).
inline MinEig min_eig_sym(const RMat& A) {
  const SymEig eig = sym_eig(A);
  MinEig out;
  out.value = eig.values[0];
  out.vector = eig.vectors.col(0);
  return out;
}

// Partial-pivot LU factorization of a tridiagonal matrix (diag, sub, super);
// symmetric callers pass super == sub.  Row swaps introduce a second
// superdiagonal of fill-in.  solve() returns false on an exactly zero pivot.
class TridiagLU {
 public:
  TridiagLU(RVec diag, RVec sub, RVec super)
      : d_(std::move(diag)), dl_(std::move(sub)), du_(std::move(super)) {
    const Eigen::Index n = d_.size();
    require<ContractError>(dl_.size() == n - 1 && du_.size() == n - 1,
                           "TridiagLU: off-diagonal length must be n-1");
    du2_ = RVec::Zero(n > 2 ? n - 2 : 0);
    swap_.assign(static_cast<std::size_t>(n > 1 ? n - 1 : 0), false);
    singular_ = false;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      if (std::abs(d_[i]) >= std::abs(dl_[i])) {
        if (d_[i] == 0.0) {
          singular_ = true;
          continue;  // dl_[i] == 0 too; row already reduced
        }
        const double fact = dl_[i] / d_[i];
        dl_[i] = fact;
        d_[i + 1] -= fact * du_[i];
        if (i + 2 < n) du2_[i] = 0.0;
      } else {
        const double fact = d_[i] / dl_[i];
        d_[i] = dl_[i];
        dl_[i] = fact;
        const double tmp = du_[i];
        du_[i] = d_[i + 1];
        d_[i + 1] = tmp - fact * d_[i + 1];
        if (i + 2 < n) {
          du2_[i] = du_[i + 1];
          du_[i + 1] = -fact * du_[i + 1];
        }
        swap_[static_cast<std::size_t>(i)] = true;
      }
    }
    if (n > 0 && d_[n - 1] == 0.0) singular_ = true;
  }

  bool singular() const { return singular_; }

  // Solves the factored system in place; false if a zero pivot blocks it.
  bool solve(RVec& b) const {
    const Eigen::Index n = d_.size();
    require<ContractError>(b.size() == n, "TridiagLU::solve: size mismatch");
    if (singular_) return false;
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
      if (!swap_[static_cast<std::size_t>(i)]) {
        b[i + 1] -= dl_[i] * b[i];
      } else {
        const double tmp = b[i];
        b[i] = b[i + 1];
        b[i + 1] = tmp - dl_[i] * b[i];
      }
    }
    b[n - 1] /= d_[n - 1];
    if (n > 1) b[n - 2] = (b[n - 2] - du_[n - 2] * b[n - 1]) / d_[n - 2];
    for (Eigen::Index i = n - 3; i >= 0; --i)
      b[i] = (b[i] - du_[i] * b[i + 1] - du2_[i] * b[i + 2]) / d_[i];
    return true;
  }

 private:
  RVec d_, dl_, du_, du2_;
  std::vector<bool> swap_;
  bool singular_ = false;
};

}  // namespace gpr
