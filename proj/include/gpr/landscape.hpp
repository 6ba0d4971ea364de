#pragma once

#include <gpr/alignment.hpp>
#include <gpr/ensemble.hpp>
#include <gpr/objective.hpp>
#include <gpr/population.hpp>
#include <gpr/rng.hpp>

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>

// Landscape geometry: region membership of a point relative to the planted
// signal (negative-curvature region, the two large-gradient regions, and the
// strong-convexity neighborhood of the target set), certificates of those
// properties on finite samples, coverage scans, and 2D landscape grids.

namespace gpr {

// A unit direction g with Im(g^* z) = 0, pointing from the target set toward
// z when z is away from it.  At (or numerically on) the target set the
// direction is the first viable coordinate axis projected off the phase
// direction iz, a deterministic representative of the admissible set.
inline CVec tangent_unit_at(const CVec& x, const CVec& z) {
  require<DimensionError>(x.size() == z.size(), "tangent_unit_at: size mismatch");
  const PhaseAlignment al = align_phase(x, z);
  if (al.dist > 1e-9 * x.norm()) return al.h / al.dist;
  const double zn2 = z.squaredNorm();
  if (zn2 == 0.0) {
    CVec g = CVec::Zero(x.size());
    g[0] = cxd(1.0, 0.0);
    return g;
  }
  // candidate axes e_0 .. e_{n-1}, i e_0 .. i e_{n-1}; projecting off the
  // phase direction iz leaves at least one candidate with norm >= 1/sqrt(2)
  const CVec iz = z * cxd(0.0, 1.0);
  const Eigen::Index n = z.size();
  for (Eigen::Index k = 0; k < 2 * n; ++k) {
    CVec g = CVec::Zero(n);
    g[k % n] = (k < n) ? cxd(1.0, 0.0) : cxd(0.0, 1.0);
    g -= iz * (iz.dot(g).real() / zn2);
    const double gn = g.norm();
    if (gn > 0.5) return g / gn;
  }
  throw NumericalError("tangent_unit_at: no viable coordinate direction");
}

struct RegionCertificate {
  bool in_R1 = false;
  bool in_R2z = false;
  bool in_R2h = false;
  bool in_R3 = false;
  // population-quantity scalars behind the memberships
  double curvature_along_target = 0.0;  // E-Hessian form along the unit target direction
  double radial_grad = 0.0;             // Re<h(z), grad E>
  double z_grad = 0.0;                  // Re<z, grad E>
  double rsc_form = 0.0;                // E-Hessian form along g(z)
  double dist = 0.0;
  double znorm = 0.0;
};

inline bool any_region(const RegionCertificate& c) {
  return c.in_R1 || c.in_R2z || c.in_R2h || c.in_R3;
}

// Membership per the region definitions, evaluated on the infinite-sample
// objective (this is an analysis tool with oracle access to x).
inline RegionCertificate classify_region(const CVec& x, const CVec& z) {
  require<DimensionError>(x.size() == z.size(), "classify_region: size mismatch");
  const double x2 = x.squaredNorm();
  require<ContractError>(x2 > 0.0, "classify_region: target must be nonzero");
  const double z2 = z.squaredNorm();
  const double ip = std::abs(x.dot(z));  // |x^* z|
  RegionCertificate c;
  c.znorm = std::sqrt(z2);
  c.dist = std::sqrt(std::max(0.0, x2 + z2 - 2.0 * ip));

  // curvature along x e^{i phi(z)} (closed form), reported per unit direction
  const double curv = population_curvature_along_target(x, z);
  c.curvature_along_target = curv / x2;
  c.in_R1 = curv <= -(1.0 / 100.0) * x2 * z2 - (1.0 / 50.0) * x2 * x2;

  c.in_R3 = c.dist <= std::sqrt(x2 / 7.0);

  // Re<z, grad E> = 2||z||^4 - ||x||^2 ||z||^2 - |x^* z|^2
  c.z_grad = 2.0 * z2 * z2 - x2 * z2 - ip * ip;
  c.in_R2z = c.z_grad >= (1.0 / 100.0) * z2 * z2 + (1.0 / 500.0) * x2 * z2;

  // Re<h, grad E> = (2||z||^2 - ||x||^2)||z||^2 - |x^*z|^2 + 2(||x||^2 - ||z||^2)|x^*z|
  c.radial_grad = (2.0 * z2 - x2) * z2 - ip * ip + 2.0 * (x2 - z2) * ip;
  const double xn = std::sqrt(x2);
  c.in_R2h = c.radial_grad >= (1.0 / 250.0) * x2 * c.znorm * c.dist &&
             c.znorm >= (11.0 / 20.0) * xn && c.znorm <= xn && c.dist >= xn / 3.0;

  c.rsc_form = population_hessian_form(x, z, tangent_unit_at(x, z));
  return c;
}

struct CoverageReport {
  std::int64_t samples = 0;
  std::int64_t uncovered = 0;
  std::int64_t r1 = 0, r2z = 0, r2h = 0, r3 = 0;
};

// random point of the orthogonal-complement sphere S (saddles of the
// population objective); requires n >= 2
inline CVec sample_saddle_point(const CVec& x, Rng& rng) {
  require<DimensionError>(x.size() >= 2, "sample_saddle_point: need n >= 2");
  CVec u = rng.cnormal_vec(x.size());
  u -= x * (x.dot(u) / x.squaredNorm());
  const double un = u.norm();
  require<NumericalError>(un > 1e-12, "sample_saddle_point: degenerate draw");
  return u * (x.norm() / std::numbers::sqrt2 / un);
}

// Scans a mixture of scales for points no region claims; the covering
// property says the uncovered count is zero.
inline CoverageReport coverage_scan(const CVec& x, std::int64_t num_samples,
                                    std::uint64_t seed) {
  require<ContractError>(num_samples >= 1, "coverage_scan: need at least one sample");
  const Eigen::Index n = x.size();
  const double xn = x.norm();
  Rng rng(seed, Stream::sample, 0);
  CoverageReport rep;
  for (std::int64_t i = 0; i < num_samples; ++i) {
    CVec z;
    switch (i % 6) {
      case 0: z = rng.ball(n, 2.0 * xn); break;
      case 1: {  // sphere shells across the interesting radii
        static constexpr double kShell[] = {0.25, 0.55, 0.75, 1.0, 1.25, 1.8};
        z = rng.sphere(n) * (kShell[(i / 6) % 6] * xn);
        break;
      }
      case 2: {  // perturbations of the target circle
        const double phi = 2.0 * std::numbers::pi * rng.uniform();
        z = x * std::exp(cxd(0.0, phi)) + rng.ball(n, 0.6 * xn);
        break;
      }
      case 3:  // perturbations of the saddle sphere
        z = (n >= 2 ? CVec(sample_saddle_point(x, rng) + rng.ball(n, 0.3 * xn))
                    : rng.ball(n, 0.8 * xn));
        break;
      case 4: z = rng.ball(n, 0.5 * xn); break;
      default:
        z = rng.sphere(n) * ((0.5 + 0.6 * rng.uniform()) * xn);
        break;
    }
    const RegionCertificate c = classify_region(x, z);
    ++rep.samples;
    if (c.in_R1) ++rep.r1;
    if (c.in_R2z) ++rep.r2z;
    if (c.in_R2h) ++rep.r2h;
    if (c.in_R3) ++rep.r3;
    if (!any_region(c)) ++rep.uncovered;
  }
  return rep;
}

enum class Region { R1, R2z, R2h, R3 };

inline const char* to_string(Region r) {
  switch (r) {
    case Region::R1: return "R1";
    case Region::R2z: return "R2z";
    case Region::R2h: return "R2h";
    case Region::R3: return "R3";
  }
  return "?";
}

// Rejection sampler for points certified to lie in a given region.
inline CVec sample_region_point(const CVec& x, Region which, Rng& rng,
                                int max_tries = 20000) {
  const Eigen::Index n = x.size();
  const double xn = x.norm();
  for (int t = 0; t < max_tries; ++t) {
    CVec z;
    switch (which) {
      case Region::R1:
        z = (t % 2 == 0) ? rng.ball(n, 0.5 * xn) : rng.ball(n, 2.0 * xn);
        break;
      case Region::R2z:
        z = rng.ball(n, 2.2 * xn);
        break;
      case Region::R2h:
        z = rng.ball(n, xn);
        break;
      case Region::R3: {
        const double phi = 2.0 * std::numbers::pi * rng.uniform();
        z = x * std::exp(cxd(0.0, phi)) + rng.ball(n, xn / std::sqrt(7.0));
        break;
      }
    }
    const RegionCertificate c = classify_region(x, z);
    const bool ok = (which == Region::R1 && c.in_R1) || (which == Region::R2z && c.in_R2z) ||
                    (which == Region::R2h && c.in_R2h) || (which == Region::R3 && c.in_R3);
    if (ok) return z;
  }
  throw NumericalError(std::string("sample_region_point: rejection failed for ") +
                       to_string(which));
}

struct EmpiricalCertificates {
  double neg_curv = 0.0;    // form along x e^{i phi(z)}, per ||x||^2
  double grad_lb = 0.0;     // stacked gradient norm (large-gradient witness)
  double rsc = 0.0;         // form along g(z)
  double z_grad = 0.0;      // Re(z^* grad_z f)
  double radial_grad = 0.0; // Re(h(z)^* grad_z f)
};

// Finite-sample counterparts of the certified quantities at z.
inline EmpiricalCertificates empirical_certificates(const Ensemble& e, const CVec& x,
                                                    const CVec& z) {
  require<DimensionError>(x.size() == e.n() && z.size() == e.n(),
                          "empirical_certificates: size mismatch");
  EmpiricalCertificates out;
  const PhaseAlignment al = align_phase(x, z);
  const CVec g = wirtinger_grad(e, z);
  out.neg_curv = hessian_quadratic_form(e, z, CVec(x * al.phase)) / x.squaredNorm();
  out.grad_lb = stacked_grad_norm(g);
  out.rsc = hessian_quadratic_form(e, z, tangent_unit_at(x, z));
  out.z_grad = z.dot(g).real();
  out.radial_grad = al.h.dot(g).real();
  return out;
}

enum class GridMode { population_complex, population_real_gaussian, empirical };

inline const char* to_string(GridMode m) {
  switch (m) {
    case GridMode::population_complex: return "population-complex";
    case GridMode::population_real_gaussian: return "population-real-gaussian";
    case GridMode::empirical: return "empirical";
  }
  return "?";
}

inline GridMode grid_mode_from_name(const std::string& s) {
  if (s == "population-complex") return GridMode::population_complex;
  if (s == "population-real-gaussian") return GridMode::population_real_gaussian;
  if (s == "empirical") return GridMode::empirical;
  throw DataFormatError("unknown landscape grid mode: " + s);
}

struct GridAxis {
  double lo = -1.5;
  double hi = 1.5;
  Eigen::Index steps = 61;  // number of grid points along the axis
};

struct GridSpec {
  GridAxis a1, a2;
};

struct LandscapeGrid {
  GridMode mode = GridMode::population_complex;
  GridSpec spec;
  CVec x;
  std::uint64_t seed = 0;
  int num_masks = 0;      // empirical mode only
  RMat values;            // values(i, j) = value at (a1[i], a2[j])
};

inline double grid_coord(const GridAxis& ax, Eigen::Index i) {
  if (ax.steps == 1) return ax.lo;
  return ax.lo + (ax.hi - ax.lo) * static_cast<double>(i) / static_cast<double>(ax.steps - 1);
}

// 2D landscape over real (z1, z2) for a length-2 target.
inline LandscapeGrid landscape_grid_2d(GridMode mode, const CVec& x, const GridSpec& spec,
                                       std::uint64_t seed = 0, int num_masks = 256) {
  require<DimensionError>(x.size() == 2, "landscape_grid_2d: target must have length 2");
  require<ContractError>(spec.a1.steps >= 1 && spec.a2.steps >= 1,
                         "landscape_grid_2d: axis steps must be positive");
  LandscapeGrid grid;
  grid.mode = mode;
  grid.spec = spec;
  grid.x = x;
  grid.seed = seed;
  grid.values.resize(spec.a1.steps, spec.a2.steps);

  if (mode == GridMode::population_real_gaussian || mode == GridMode::empirical) {
    require<ModelMismatchError>(x.imag().cwiseAbs().maxCoeff() == 0.0,
                                "landscape_grid_2d: real modes need a real target");
  }
  Ensemble masked;
  if (mode == GridMode::empirical) {
    require<ContractError>(num_masks >= 1, "landscape_grid_2d: need at least one mask");
    grid.num_masks = num_masks;
    masked = gen_masked_dct_ensemble(2, num_masks, x, seed);
  }

  for (Eigen::Index i = 0; i < spec.a1.steps; ++i) {
    for (Eigen::Index j = 0; j < spec.a2.steps; ++j) {
      CVec z(2);
      z << cxd(grid_coord(spec.a1, i), 0.0), cxd(grid_coord(spec.a2, j), 0.0);
      double v = 0.0;
      switch (mode) {
        case GridMode::population_complex: v = population_f(x, z); break;
        case GridMode::population_real_gaussian:
          v = population_f_real(x.real(), z.real());
          break;
        case GridMode::empirical: v = eval_f(masked, z); break;
      }
      grid.values(i, j) = v;
    }
  }
  require<NumericalError>(grid.values.allFinite(), "landscape_grid_2d: non-finite values");
  return grid;
}

// CSV: two axis header rows, then row-major values; JSON sidecar with the
// generation metadata.
inline void write_landscape_grid(const LandscapeGrid& grid, const std::string& csv_path,
                                 const std::string& json_path) {
  std::ofstream csv(csv_path);
  require<DataFormatError>(csv.good(), "write_landscape_grid: cannot open " + csv_path);
  char buf[64];
  const auto fmt = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  csv << "axis1," << fmt(grid.spec.a1.lo) << ',' << fmt(grid.spec.a1.hi) << ','
      << grid.spec.a1.steps << "\n";
  csv << "axis2," << fmt(grid.spec.a2.lo) << ',' << fmt(grid.spec.a2.hi) << ','
      << grid.spec.a2.steps << "\n";
  for (Eigen::Index i = 0; i < grid.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < grid.values.cols(); ++j) {
      if (j > 0) csv << ',';
      csv << fmt(grid.values(i, j));
    }
    csv << "\n";
  }
  csv.flush();
  require<DataFormatError>(csv.good(), "write_landscape_grid: write failed " + csv_path);

  nlohmann::ordered_json meta;
  meta["format"] = "landscape-grid";
  meta["version"] = 1;
  meta["mode"] = to_string(grid.mode);
  meta["x_re"] = std::vector<double>{grid.x[0].real(), grid.x[1].real()};
  meta["x_im"] = std::vector<double>{grid.x[0].imag(), grid.x[1].imag()};
  meta["seed"] = grid.seed;
  meta["num_masks"] = grid.num_masks;
  meta["axis1"] = {{"lo", grid.spec.a1.lo}, {"hi", grid.spec.a1.hi}, {"steps", grid.spec.a1.steps}};
  meta["axis2"] = {{"lo", grid.spec.a2.lo}, {"hi", grid.spec.a2.hi}, {"steps", grid.spec.a2.steps}};
  std::ofstream js(json_path);
  require<DataFormatError>(js.good(), "write_landscape_grid: cannot open " + json_path);
  js << meta.dump(2) << "\n";
  js.flush();
  require<DataFormatError>(js.good(), "write_landscape_grid: write failed " + json_path);
}

}  // namespace gpr
