#pragma once

#include <gpr/prelude.hpp>

#include <cmath>
#include <numbers>

namespace gpr {

// phase minimizes ||z - x e^{i phi}|| over phi; h is the residual, dist = ||h||.
// By construction z^* x e^{i phi} has zero imaginary part and real part |x^* z|.
struct PhaseAlignment {
  double phi = 0.0;       // in [0, 2 pi)
  cxd phase{1.0, 0.0};    // e^{i phi}, formed as (x^* z)/|x^* z| to avoid trig
  CVec h;
  double dist = 0.0;
};

inline PhaseAlignment align_phase(const CVec& x, const CVec& z) {
  require<DimensionError>(x.size() == z.size(), "align_phase: x and z sizes differ");
  PhaseAlignment out;
  const cxd w = x.dot(z);  // x^* z
  const double aw = std::abs(w);
  if (aw > 0.0) {
    out.phase = w / aw;
    out.phi = std::arg(w);
    if (out.phi < 0.0) out.phi += 2.0 * std::numbers::pi;
  }  // x^* z = 0: phi 0 by convention, any phase is a minimizer
  out.h = z - x * out.phase;
  out.dist = out.h.norm();
  return out;
}

inline double dist_to_target(const CVec& x, const CVec& z) { return align_phase(x, z).dist; }

}  // namespace gpr
