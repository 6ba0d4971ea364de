#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace gpr {

using cxd = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using RMat = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// data-class failures: exit code 3 at the CLI
class DimensionError : public Error {
 public:
  using Error::Error;
};
class ModelMismatchError : public Error {
 public:
  using Error::Error;
};
class DataFormatError : public Error {
 public:
  using Error::Error;
};

// numerical-class failures: exit code 4 at the CLI
class NumericalError : public Error {
 public:
  using Error::Error;
};
class CapacityError : public Error {
 public:
  using Error::Error;
};
// caller violated an interface precondition (programming error, not data)
class ContractError : public Error {
 public:
  using Error::Error;
};

template <class E = Error>
inline void require(bool cond, const std::string& what) {
  if (!cond) throw E(what);
}

inline double sq(double v) { return v * v; }

// Deterministic pairwise reduction. The tree shape depends only on the index
// range, never on scheduling, so accumulated sums are bit-stable.
template <class F>
double pairwise_sum(std::ptrdiff_t lo, std::ptrdiff_t hi, F&& term) {
  const std::ptrdiff_t count = hi - lo;
  if (count <= 64) {
    double acc = 0.0;
    for (std::ptrdiff_t k = lo; k < hi; ++k) acc += term(k);
    return acc;
  }
  const std::ptrdiff_t mid = lo + count / 2;
  return pairwise_sum(lo, mid, term) + pairwise_sum(mid, hi, term);
}

template <class F>
double pairwise_sum(std::ptrdiff_t count, F&& term) {
  return pairwise_sum(0, count, std::forward<F>(term));
}

}  // namespace gpr
