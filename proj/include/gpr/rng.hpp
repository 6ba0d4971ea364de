#pragma once

#include <gpr/prelude.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace gpr {

// splitmix64 finalizer (Steele/Lea/Flood constants).
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream-assignment rule: every random draw comes from a child stream keyed by
// (seed, purpose, index). A unit of work (one measurement row, one mask, one
// trial) owns its stream, so regeneration is bit-identical regardless of
// evaluation order or thread count.
enum class Stream : std::uint64_t {
  signal = 1,
  ensemble_row = 2,
  mask = 3,
  trial_init = 4,
  sample = 5,
  direction = 6,
  generic = 7,
};

class Rng {
 public:
  Rng(std::uint64_t seed, Stream purpose, std::uint64_t index) {
    const std::uint64_t tag = (static_cast<std::uint64_t>(purpose) << 56) ^ index;
    std::uint64_t s = mix64(seed ^ 0x5851f42d4c957f2dULL);
    s = mix64(s ^ tag);
    const std::uint64_t s1 = mix64(s + 1), s2 = mix64(s + 2);
    std::seed_seq seq{static_cast<std::uint32_t>(s),        static_cast<std::uint32_t>(s >> 32),
                      static_cast<std::uint32_t>(s1),       static_cast<std::uint32_t>(s1 >> 32),
                      static_cast<std::uint32_t>(s2),       static_cast<std::uint32_t>(s2 >> 32)};
    engine_.seed(seq);
  }

  // uniform on [0, 1) with 53-bit resolution
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Box-Muller rather than std::normal_distribution: the latter's algorithm is
  // implementation-defined, which would break bit-reproducibility of seeds.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    const double u2 = uniform();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 2.0 * std::numbers::pi * u2;
    spare_ = rad * std::sin(ang);
    have_spare_ = true;
    return rad * std::cos(ang);
  }

  // standard complex normal, E|c|^2 = 1
  cxd cnormal() {
    const double re = normal();
    const double im = normal();
    return cxd(re / std::numbers::sqrt2, im / std::numbers::sqrt2);
  }

  RVec normal_vec(Eigen::Index n) {
    RVec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  CVec cnormal_vec(Eigen::Index n) {
    CVec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = cnormal();
    return v;
  }

  // uniform over the complex n-ball of the given radius (a real 2n-ball)
  CVec ball(Eigen::Index n, double radius) {
    CVec dir = cnormal_vec(n);
    const double nrm = dir.norm();
    if (nrm == 0.0) return CVec::Zero(n);
    const double scale = radius * std::pow(uniform(), 1.0 / (2.0 * static_cast<double>(n)));
    return dir * (scale / nrm);
  }

  // unit vector uniform on the complex n-sphere
  CVec sphere(Eigen::Index n) {
    CVec dir = cnormal_vec(n);
    const double nrm = dir.norm();
    if (nrm == 0.0) {
      CVec e = CVec::Zero(n);
      e[0] = 1.0;
      return e;
    }
    return dir / nrm;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace gpr
