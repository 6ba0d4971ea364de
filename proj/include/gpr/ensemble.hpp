#pragma once

#include <gpr/prelude.hpp>
#include <gpr/rng.hpp>

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

namespace gpr {

enum class Model { gaussian, masked_dct };

inline const char* model_name(Model m) { return m == Model::gaussian ? "gaussian" : "masked-dct"; }

inline Model model_from_name(const std::string& s) {
  if (s == "gaussian") return Model::gaussian;
  if (s == "masked-dct") return Model::masked_dct;
  throw DataFormatError("unknown measurement model: " + s);
}

// Row k of A stores a_k^*, so (A z)(k) = a_k^* z and A.adjoint() * s = sum_k s_k a_k.
struct Ensemble {
  Model model = Model::gaussian;
  std::uint64_t seed = 0;
  CMat A;    // m x n
  RVec y;    // magnitudes |a_k^* x|
  RVec ysq;  // cached y.^2

  Eigen::Index n() const { return A.cols(); }
  Eigen::Index m() const { return A.rows(); }
};

inline void set_magnitudes(Ensemble& e, const CVec& x) {
  require<DimensionError>(x.size() == e.n(), "set_magnitudes: x has wrong dimension");
  e.y = (e.A * x).cwiseAbs();
  e.ysq = e.y.cwiseProduct(e.y);
}

// rows i.i.d. standard complex normal; one child stream per row
inline Ensemble gen_gaussian_ensemble(Eigen::Index n, Eigen::Index m, const CVec& x,
                                      std::uint64_t seed) {
  require<DimensionError>(n >= 1 && m >= 1, "gen_gaussian_ensemble: need n >= 1 and m >= 1");
  require<DimensionError>(x.size() == n, "gen_gaussian_ensemble: x has wrong dimension");
  Ensemble e;
  e.model = Model::gaussian;
  e.seed = seed;
  e.A.resize(m, n);
  for (Eigen::Index k = 0; k < m; ++k) {
    Rng rng(seed, Stream::ensemble_row, static_cast<std::uint64_t>(k));
    for (Eigen::Index j = 0; j < n; ++j) e.A(k, j) = rng.cnormal();
  }
  set_magnitudes(e, x);
  return e;
}

// Orthonormal type-II DCT row t: c_t cos(pi (2s+1) t / (2n)), c_0 = sqrt(1/n),
// c_t = sqrt(2/n) otherwise. Rows form an orthonormal basis of R^n.
inline RVec dct2_row(Eigen::Index n, Eigen::Index t) {
  require<DimensionError>(n >= 1 && t >= 0 && t < n, "dct2_row: index out of range");
  const double c = t == 0 ? std::sqrt(1.0 / static_cast<double>(n))
                          : std::sqrt(2.0 / static_cast<double>(n));
  RVec row(n);
  for (Eigen::Index s = 0; s < n; ++s)
    row[s] = c * std::cos(std::numbers::pi * (2.0 * static_cast<double>(s) + 1.0) *
                          static_cast<double>(t) / (2.0 * static_cast<double>(n)));
  return row;
}

// i.i.d. mask entries: +1 w.p. 1/4, -1 w.p. 1/4, 0 w.p. 1/2; one stream per mask
inline RMat draw_masks(Eigen::Index n, Eigen::Index num_masks, std::uint64_t seed) {
  RMat masks(num_masks, n);
  for (Eigen::Index j = 0; j < num_masks; ++j) {
    Rng rng(seed, Stream::mask, static_cast<std::uint64_t>(j));
    for (Eigen::Index s = 0; s < n; ++s) {
      const double u = rng.uniform();
      masks(j, s) = u < 0.25 ? 1.0 : (u < 0.5 ? -1.0 : 0.0);
    }
  }
  return masks;
}

// Measurement row (j, t) is the t-th DCT basis row masked entrywise by mask j.
// The model applies to real signals only.
inline Ensemble masked_dct_ensemble_from_masks(const RMat& masks, const CVec& x,
                                               std::uint64_t seed = 0) {
  const Eigen::Index n = masks.cols();
  const Eigen::Index num_masks = masks.rows();
  require<DimensionError>(n >= 1 && num_masks >= 1, "masked_dct: need n >= 1 and one mask");
  require<DimensionError>(x.size() == n, "masked_dct: x has wrong dimension");
  const double imag_max = x.size() > 0 ? x.imag().cwiseAbs().maxCoeff() : 0.0;
  require<ModelMismatchError>(imag_max == 0.0,
                              "masked-dct model requires a real signal; max |Im x_i| = " +
                                  std::to_string(imag_max));
  Ensemble e;
  e.model = Model::masked_dct;
  e.seed = seed;
  e.A.resize(num_masks * n, n);
  for (Eigen::Index j = 0; j < num_masks; ++j)
    for (Eigen::Index t = 0; t < n; ++t)
      e.A.row(j * n + t) =
          dct2_row(n, t).cwiseProduct(masks.row(j).transpose()).transpose().cast<cxd>();
  set_magnitudes(e, x);
  return e;
}

inline Ensemble gen_masked_dct_ensemble(Eigen::Index n, Eigen::Index num_masks, const CVec& x,
                                        std::uint64_t seed) {
  return masked_dct_ensemble_from_masks(draw_masks(n, num_masks, seed), x, seed);
}

struct NormEstimate {
  double x_norm_est = 0.0;  // sqrt of mean squared magnitude, concentrates at ||x||
  double R0 = 0.0;          // 3 * x_norm_est; >= ||x|| w.h.p., the init ball radius
};

inline NormEstimate estimate_norm_and_radius(const Ensemble& e) {
  const double msq =
      pairwise_sum(e.m(), [&](std::ptrdiff_t k) { return e.ysq[k]; }) / static_cast<double>(e.m());
  NormEstimate out;
  out.x_norm_est = std::sqrt(std::max(msq, 0.0));
  out.R0 = 3.0 * out.x_norm_est;
  return out;
}

inline CVec random_ball_init(Eigen::Index n, double R0, Rng& rng) { return rng.ball(n, R0); }

// m for the standard sampling-complexity rule, 5 n log n; natural log by default
inline Eigen::Index default_m(Eigen::Index n, double log_base = std::numbers::e) {
  require<DimensionError>(n >= 2, "default_m: need n >= 2");
  const double lg = std::log(static_cast<double>(n)) / std::log(log_base);
  return static_cast<Eigen::Index>(std::llround(5.0 * static_cast<double>(n) * lg));
}

// ---------------------------------------------------------------------------
// Serialization. One JSON header line terminated by '\n', then a raw
// little-endian payload: m*n float64 (re, im) pairs of the rows a_k^* in
// row-major order, followed by the m float64 magnitudes. See docs/formats.md.
// ---------------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little,
              "ensemble serializer assumes a little-endian host");

inline void write_ensemble(const std::string& path, const Ensemble& e) {
  nlohmann::ordered_json h;
  h["format"] = "gpr-ensemble";
  h["version"] = 1;
  h["model"] = model_name(e.model);
  h["n"] = static_cast<std::int64_t>(e.n());
  h["m"] = static_cast<std::int64_t>(e.m());
  h["seed"] = e.seed;
  h["payload"] = {{"vectors", "float64 (re,im) interleaved, row-major"},
                  {"magnitudes", "float64"},
                  {"byte_order", "little-endian"}};
  std::ofstream out(path, std::ios::binary);
  require<DataFormatError>(static_cast<bool>(out), "cannot open for writing: " + path);
  out << h.dump() << '\n';
  std::vector<double> buf;
  buf.reserve(2 * static_cast<std::size_t>(e.n()));
  for (Eigen::Index k = 0; k < e.m(); ++k) {
    buf.clear();
    for (Eigen::Index j = 0; j < e.n(); ++j) {
      buf.push_back(e.A(k, j).real());
      buf.push_back(e.A(k, j).imag());
    }
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(double)));
  }
  out.write(reinterpret_cast<const char*>(e.y.data()),
            static_cast<std::streamsize>(e.y.size() * sizeof(double)));
  require<DataFormatError>(static_cast<bool>(out), "short write: " + path);
}

inline Ensemble read_ensemble(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require<DataFormatError>(static_cast<bool>(in), "cannot open: " + path);
  std::string line;
  std::getline(in, line);
  require<DataFormatError>(static_cast<bool>(in), "missing ensemble header: " + path);
  const nlohmann::json h = nlohmann::json::parse(line, nullptr, false);
  require<DataFormatError>(!h.is_discarded(), "ensemble header is not valid JSON: " + path);
  require<DataFormatError>(h.value("format", "") == "gpr-ensemble",
                           "not a gpr-ensemble file: " + path);
  require<DataFormatError>(h.value("version", 0) == 1, "unsupported ensemble version: " + path);
  require<DataFormatError>(h.contains("model") && h.contains("n") && h.contains("m"),
                           "ensemble header missing fields: " + path);
  const auto n = static_cast<Eigen::Index>(h["n"].get<std::int64_t>());
  const auto m = static_cast<Eigen::Index>(h["m"].get<std::int64_t>());
  require<DataFormatError>(n >= 1 && m >= 1, "ensemble header has invalid shape: " + path);
  Ensemble e;
  e.model = model_from_name(h["model"].get<std::string>());
  e.seed = h.value("seed", std::uint64_t{0});
  e.A.resize(m, n);
  std::vector<double> buf(2 * static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < m; ++k) {
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(double)));
    require<DataFormatError>(static_cast<bool>(in), "truncated ensemble payload: " + path);
    for (Eigen::Index j = 0; j < n; ++j)
      e.A(k, j) = cxd(buf[2 * static_cast<std::size_t>(j)], buf[2 * static_cast<std::size_t>(j) + 1]);
  }
  e.y.resize(m);
  in.read(reinterpret_cast<char*>(e.y.data()), static_cast<std::streamsize>(m * sizeof(double)));
  require<DataFormatError>(static_cast<bool>(in), "truncated magnitude payload: " + path);
  require<DataFormatError>(e.A.allFinite() && e.y.allFinite(),
                           "ensemble payload contains non-finite values: " + path);
  require<DataFormatError>((e.y.array() >= 0.0).all(),
                           "ensemble magnitudes must be nonnegative: " + path);
  e.ysq = e.y.cwiseProduct(e.y);
  return e;
}

}  // namespace gpr
