#pragma once

// Experiment harness: named, reproducible experiment runs (recovery
// histograms, success-probability sweeps, landscape grids, certificate scans,
// single solves, subproblem benchmarks) emitting plot-ready CSV tables plus a
// JSON run summary per run. All randomness flows through per-unit child
// streams of one seed, so results are byte-identical across repeats and
// independent of the worker-pool size.

#include <gpr/ensemble.hpp>
#include <gpr/landscape.hpp>
#include <gpr/solver.hpp>
#include <gpr/trs.hpp>
#include <gpr/trs_oracle.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace gpr {

// ---------------------------------------------------------------------------
// work pool
// ---------------------------------------------------------------------------

// PR_THREADS caps the pool; otherwise the hardware concurrency is used.
inline int worker_count() {
  if (const char* env = std::getenv("PR_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<int>(std::min<long>(v, 1024));
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw >= 1 ? static_cast<int>(hw) : 1;
}

// Runs fn(i) for i in [0, count). Units must be independent; callers write
// results into slots indexed by i, so output order is scheduling-free. The
// first exception thrown by a unit is rethrown after the pool drains.
template <class Fn>
inline void parallel_for_indices(std::int64_t count, Fn&& fn) {
  const int workers =
      static_cast<int>(std::min<std::int64_t>(worker_count(), std::max<std::int64_t>(count, 1)));
  if (workers <= 1) {
    for (std::int64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr first_error;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::int64_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          const std::scoped_lock lock(err_mu);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// output plumbing
// ---------------------------------------------------------------------------

enum class OutputFormat { csv, json };

inline const char* to_string(OutputFormat f) {
  return f == OutputFormat::csv ? "csv" : "json";
}

inline OutputFormat format_from_name(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  throw DataFormatError("unknown output format: " + s);
}

// shortest round-trip decimal for doubles; NaN/inf print as nan/inf
inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf);
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // binary: byte-identical across platforms
  require<DataFormatError>(static_cast<bool>(out), "cannot open for writing: " + path);
  return out;
}

// strips a trailing .csv/.json so `--out runs/fig1.csv` and `--out runs/fig1`
// produce the same file family
inline std::string out_base(const std::string& out) {
  for (const char* ext : {".csv", ".json"}) {
    const std::string e(ext);
    if (out.size() > e.size() && out.compare(out.size() - e.size(), e.size(), e) == 0)
      return out.substr(0, out.size() - e.size());
  }
  return out;
}

// Every run writes <base>.summary.json: {format, version, kind, params,
// results, outputs}; see schemas/run_summary.schema.json.
inline void write_run_summary(const std::string& path, const std::string& kind,
                              nlohmann::ordered_json params, nlohmann::ordered_json results,
                              nlohmann::ordered_json outputs) {
  nlohmann::ordered_json j;
  j["format"] = "run-summary";
  j["version"] = 1;
  j["kind"] = kind;
  j["params"] = std::move(params);
  j["results"] = std::move(results);
  j["outputs"] = std::move(outputs);
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
  require<DataFormatError>(static_cast<bool>(out), "write failed: " + path);
}

struct CsvTable {
  std::string header;                       // comma-joined column names
  std::vector<std::vector<std::string>> rows;
};

inline void write_csv(const std::string& path, const CsvTable& t) {
  std::ofstream out = open_out(path);
  out << t.header << "\n";
  for (const std::vector<std::string>& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  require<DataFormatError>(static_cast<bool>(out), "write failed: " + path);
}

// format=json embeds the table in the summary instead of a CSV side file
inline nlohmann::ordered_json table_as_json(const CsvTable& t) {
  nlohmann::ordered_json j;
  j["columns"] = nlohmann::ordered_json::array();
  std::size_t start = 0;
  for (std::size_t i = 0; i <= t.header.size(); ++i)
    if (i == t.header.size() || t.header[i] == ',') {
      j["columns"].push_back(t.header.substr(start, i - start));
      start = i + 1;
    }
  j["rows"] = nlohmann::ordered_json::array();
  for (const std::vector<std::string>& row : t.rows) j["rows"].push_back(row);
  return j;
}

// ---------------------------------------------------------------------------
// experiment specification
// ---------------------------------------------------------------------------

enum class ExperimentKind { figure1, sweep, landscape, certify, solve, trs_bench };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::figure1: return "figure1";
    case ExperimentKind::sweep: return "sweep";
    case ExperimentKind::landscape: return "landscape";
    case ExperimentKind::certify: return "certify";
    case ExperimentKind::solve: return "solve";
    case ExperimentKind::trs_bench: return "trs-bench";
  }
  return "?";
}

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::solve;
  Eigen::Index n = 0;          // 0 = per-kind default
  Eigen::Index m = 0;          // 0 = default_m(n, log_base)
  std::vector<double> ratios;  // sweep; empty = 4,5,...,10
  int trials = 0;              // 0 = per-kind default
  std::uint64_t seed = 1;
  Model model = Model::gaussian;
  Algo algo = Algo::trm_adaptive;  // figure1 always runs the first-order method
  double delta = 0.0;              // 0 = solver default
  double mu = 0.05;
  double tol = 0.0;  // 0 = solver default
  int max_iters = 0; // 0 = per-kind default
  std::string out;   // output base path; required for every run
  OutputFormat format = OutputFormat::csv;
  double log_base = std::numbers::e;
  // landscape
  GridMode grid_mode = GridMode::population_real_gaussian;
  double lo = -1.5;
  double hi = 1.5;
  Eigen::Index steps = 61;
  Eigen::Index num_masks = 256;
  // certify
  int region_samples = 200;
  std::int64_t coverage_samples = 20000;
  // trs-bench
  int instances = 200;
  Eigen::Index d_max = 20;
  double trs_eps = 1e-12;
  // solve
  std::string in_path;          // load a measurement file instead of generating
  bool init_at_target = false;  // start at the generated signal (diagnostics)
};

inline void validate_spec(const ExperimentSpec& s) {
  require<ContractError>(!s.out.empty(), "experiment: output path required");
  require<ContractError>(s.trials >= 0, "experiment: trials must be >= 1 (or 0 for default)");
  for (std::size_t i = 1; i < s.ratios.size(); ++i)
    require<ContractError>(s.ratios[i] > s.ratios[i - 1],
                           "experiment: ratios must be strictly increasing");
  for (const double r : s.ratios)
    require<ContractError>(r > 0.0, "experiment: ratios must be positive");
  require<ContractError>(s.log_base > 1.0, "experiment: log base must exceed 1");
}

// independent per-unit base seed (distinct seeds give unrelated child streams)
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return mix64(seed ^ (0x9e3779b97f4a7c15ULL * (salt + 1)));
}

// one generated problem: secret signal, measurement ensemble, scale estimates
struct ProblemInstance {
  CVec x;
  Ensemble e;
  NormEstimate est;
};

inline ProblemInstance make_problem(Model model, Eigen::Index n, Eigen::Index m,
                                    std::uint64_t seed, bool unit_norm) {
  require<DimensionError>(n >= 1 && m >= 1, "make_problem: need n >= 1 and m >= 1");
  ProblemInstance p;
  Rng sig(seed, Stream::signal, 0);
  if (model == Model::gaussian) {
    p.x = sig.cnormal_vec(n);
  } else {
    p.x = sig.normal_vec(n).cast<cxd>();  // masked transform measures real signals
  }
  if (unit_norm) p.x /= p.x.norm();
  if (model == Model::gaussian) {
    p.e = gen_gaussian_ensemble(n, m, p.x, seed);
  } else {
    const Eigen::Index num_masks = (m + n - 1) / n;  // round the budget up to full masks
    p.e = gen_masked_dct_ensemble(n, num_masks, p.x, seed);
  }
  p.est = estimate_norm_and_radius(p.e);
  return p;
}

// ---------------------------------------------------------------------------
// recovery histogram: one fixed instance, many random inits, first-order
// method with constant step
// ---------------------------------------------------------------------------

struct Figure1Row {
  int trial = 0;
  int iters = 0;
  bool converged = false;
  double final_f = 0.0;
  double final_dist = 0.0;
};

struct Figure1Result {
  Eigen::Index n = 0, m = 0;
  std::uint64_t seed = 0;
  double mu = 0.0;
  double x_norm = 0.0;
  std::vector<Figure1Row> rows;
  int success_count = 0;     // dist <= 1e-4 ||x||
  bool all_success = false;  // every trial recovered
  std::string table_path, summary_path;
};

inline Figure1Result run_figure1(const ExperimentSpec& spec) {
  require<ContractError>(spec.kind == ExperimentKind::figure1, "run_figure1: wrong kind");
  validate_spec(spec);
  const Eigen::Index n = spec.n > 0 ? spec.n : 100;
  const Eigen::Index m = spec.m > 0 ? spec.m : default_m(n, spec.log_base);
  const int trials = spec.trials > 0 ? spec.trials : 100;
  const int max_iters = spec.max_iters > 0 ? spec.max_iters : 20000;

  const ProblemInstance p = make_problem(spec.model, n, m, spec.seed, /*unit_norm=*/true);

  Figure1Result res;
  res.n = n;
  res.m = p.e.m();
  res.seed = spec.seed;
  res.mu = spec.mu;
  res.x_norm = p.x.norm();
  res.rows.resize(static_cast<std::size_t>(trials));

  parallel_for_indices(trials, [&](std::int64_t t) {
    Rng init(spec.seed, Stream::trial_init, static_cast<std::uint64_t>(t));
    const CVec z0 = spec.init_at_target ? p.x : init.ball(n, p.est.R0);
    SolverConfig cfg;
    cfg.algo = Algo::gd;
    cfg.step_mu = spec.mu;
    cfg.tol_grad = spec.tol;
    cfg.max_iters = max_iters;
    const SolveResult run = gradient_descent(p.e, cfg, z0, &p.x);
    Figure1Row& row = res.rows[static_cast<std::size_t>(t)];
    row.trial = static_cast<int>(t);
    row.iters = run.trace.rows.back().iter;
    row.converged = run.trace.converged;
    row.final_f = eval_f(p.e, run.z);
    row.final_dist = dist_to_target(p.x, run.z);
  });

  for (const Figure1Row& row : res.rows)
    if (row.final_dist <= 1e-4 * res.x_norm) ++res.success_count;
  res.all_success = res.success_count == trials;

  CsvTable t;
  t.header = "trial,iters,converged,final_f,final_dist,neg_log10_f,neg_log10_dist";
  for (const Figure1Row& row : res.rows)
    t.rows.push_back({std::to_string(row.trial), std::to_string(row.iters),
                      row.converged ? "1" : "0", g17(row.final_f), g17(row.final_dist),
                      g17(-std::log10(row.final_f)), g17(-std::log10(row.final_dist))});

  const std::string base = out_base(spec.out);
  nlohmann::ordered_json params{{"n", n},
                                {"m", res.m},
                                {"trials", trials},
                                {"seed", spec.seed},
                                {"model", model_name(spec.model)},
                                {"algo", "gd"},
                                {"mu", spec.mu},
                                {"max_iters", max_iters},
                                {"grad_norm_convention", "stacked"}};
  nlohmann::ordered_json results{{"x_norm", res.x_norm},
                                 {"success_count", res.success_count},
                                 {"all_success", res.all_success},
                                 {"success_threshold", "dist <= 1e-4 * ||x||"}};
  nlohmann::ordered_json outputs = nlohmann::ordered_json::object();
  if (spec.format == OutputFormat::csv) {
    res.table_path = base + ".csv";
    write_csv(res.table_path, t);
    outputs["table"] = res.table_path;
  } else {
    results["table"] = table_as_json(t);
  }
  res.summary_path = base + ".summary.json";
  outputs["summary"] = res.summary_path;
  write_run_summary(res.summary_path, "figure1", std::move(params), std::move(results),
                    std::move(outputs));
  return res;
}

// ---------------------------------------------------------------------------
// success-probability sweep over the sampling ratio m/n
// ---------------------------------------------------------------------------

struct SweepRow {
  double ratio = 0.0;
  Eigen::Index m = 0;
  int successes = 0;
  int trials = 0;
  double probability = 0.0;
};

struct SweepResult {
  Eigen::Index n = 0;
  std::uint64_t seed = 0;
  Algo algo = Algo::trm_adaptive;
  std::vector<SweepRow> rows;
  double injectivity_reference_ratio = 4.0;  // m >= 4n makes magnitudes injective
  std::string table_path, summary_path;
};

inline SweepResult run_sweep(const ExperimentSpec& spec) {
  require<ContractError>(spec.kind == ExperimentKind::sweep, "run_sweep: wrong kind");
  validate_spec(spec);
  const Eigen::Index n = spec.n > 0 ? spec.n : 128;
  const int trials = spec.trials > 0 ? spec.trials : 25;
  const int max_iters = spec.max_iters > 0 ? spec.max_iters : 500;
  std::vector<double> ratios = spec.ratios;
  if (ratios.empty()) ratios = {4, 5, 6, 7, 8, 9, 10};

  SweepResult res;
  res.n = n;
  res.seed = spec.seed;
  res.algo = spec.algo;
  res.rows.resize(ratios.size());

  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const Eigen::Index m = static_cast<Eigen::Index>(std::llround(ratios[i] * static_cast<double>(n)));
    const std::uint64_t sub = mix_seed(spec.seed, i);
    const ProblemInstance p = make_problem(spec.model, n, m, sub, /*unit_norm=*/false);

    std::vector<int> ok(static_cast<std::size_t>(trials), 0);
    parallel_for_indices(trials, [&](std::int64_t t) {
      Rng init(sub, Stream::trial_init, static_cast<std::uint64_t>(t));
      const CVec z0 = init.ball(n, p.est.R0);
      SolverConfig cfg;
      cfg.algo = spec.algo;
      cfg.delta = spec.delta;
      cfg.step_mu = spec.mu;
      cfg.tol_grad = spec.tol;
      cfg.max_iters = max_iters;
      const SolveResult run = spec.algo == Algo::gd ? gradient_descent(p.e, cfg, z0, &p.x)
                                                    : trm_solve(p.e, cfg, z0, &p.x);
      const double eps_rel = dist_to_target(p.x, run.z) / p.x.norm();
      ok[static_cast<std::size_t>(t)] = eps_rel <= 1e-3 ? 1 : 0;
    });

    SweepRow& row = res.rows[i];
    row.ratio = ratios[i];
    row.m = p.e.m();
    row.trials = trials;
    for (const int s : ok) row.successes += s;
    row.probability = static_cast<double>(row.successes) / static_cast<double>(trials);
  }

  CsvTable t;
  t.header = "ratio,m,successes,trials,probability";
  for (const SweepRow& row : res.rows)
    t.rows.push_back({g17(row.ratio), std::to_string(row.m), std::to_string(row.successes),
                      std::to_string(row.trials), g17(row.probability)});

  const std::string base = out_base(spec.out);
  nlohmann::ordered_json params{{"n", n},
                                {"trials", trials},
                                {"seed", spec.seed},
                                {"model", model_name(spec.model)},
                                {"algo", to_string(spec.algo)},
                                {"max_iters", max_iters},
                                {"success_threshold", "eps_rel <= 1e-3"},
                                {"grad_norm_convention", "stacked"}};
  nlohmann::ordered_json results{{"injectivity_reference_ratio", res.injectivity_reference_ratio}};
  nlohmann::ordered_json outputs = nlohmann::ordered_json::object();
  if (spec.format == OutputFormat::csv) {
    res.table_path = base + ".csv";
    write_csv(res.table_path, t);
    outputs["table"] = res.table_path;
  } else {
    results["table"] = table_as_json(t);
  }
  res.summary_path = base + ".summary.json";
  outputs["summary"] = res.summary_path;
  write_run_summary(res.summary_path, "sweep", std::move(params), std::move(results),
                    std::move(outputs));
  return res;
}

// ---------------------------------------------------------------------------
// 2D landscape grid (n = 2 slice)
// ---------------------------------------------------------------------------

struct LandscapeRunResult {
  LandscapeGrid grid;
  std::string csv_path, sidecar_path, summary_path;
};

inline LandscapeRunResult run_landscape(const ExperimentSpec& spec) {
  require<ContractError>(spec.kind == ExperimentKind::landscape, "run_landscape: wrong kind");
  validate_spec(spec);
  CVec x(2);
  x << cxd(1.0, 0.0), cxd(0.0, 0.0);  // canonical unit slice target
  GridSpec gs;
  gs.a1 = GridAxis{spec.lo, spec.hi, spec.steps};
  gs.a2 = GridAxis{spec.lo, spec.hi, spec.steps};

  LandscapeRunResult res;
  res.grid = landscape_grid_2d(spec.grid_mode, x, gs, spec.seed, spec.num_masks);

  const std::string base = out_base(spec.out);
  res.csv_path = base + ".csv";
  res.sidecar_path = base + ".json";
  write_landscape_grid(res.grid, res.csv_path, res.sidecar_path);

  nlohmann::ordered_json params{{"mode", to_string(spec.grid_mode)},
                                {"lo", spec.lo},
                                {"hi", spec.hi},
                                {"steps", spec.steps},
                                {"seed", spec.seed},
                                {"num_masks", spec.num_masks}};
  nlohmann::ordered_json results{
      {"min_value", *std::min_element(res.grid.values.data(),
                                      res.grid.values.data() + res.grid.values.size())},
      {"max_value", *std::max_element(res.grid.values.data(),
                                      res.grid.values.data() + res.grid.values.size())}};
  nlohmann::ordered_json outputs{{"table", res.csv_path}, {"grid_meta", res.sidecar_path}};
  res.summary_path = base + ".summary.json";
  outputs["summary"] = res.summary_path;
  write_run_summary(res.summary_path, "landscape", std::move(params), std::move(results),
                    std::move(outputs));
  return res;
}

// ---------------------------------------------------------------------------
// certificate scan: region coverage plus finite-sample certificate margins
// ---------------------------------------------------------------------------

struct CertifyRegionStats {
  Region region = Region::R1;
  int samples = 0;
  int passes = 0;
  double pass_rate = 0.0;
};

struct CertifyResult {
  Eigen::Index n = 0, m = 0;
  std::uint64_t seed = 0;
  CoverageReport coverage;
  std::vector<CertifyRegionStats> regions;
  std::string table_path, summary_path;
};

// finite-sample pass predicate per region (fixed certificate thresholds)
inline bool certificate_pass(Region r, const CVec& x, const RegionCertificate& pop,
                             const EmpiricalCertificates& emp) {
  const double x2 = x.squaredNorm();
  switch (r) {
    case Region::R1: return emp.neg_curv <= -(1.0 / 100.0) * x2;
    case Region::R2z: return emp.z_grad >= (1.0 / 1000.0) * x2 * pop.znorm * pop.znorm;
    case Region::R2h: return emp.radial_grad >= (1.0 / 1000.0) * x2 * pop.znorm * pop.dist;
    case Region::R3: return emp.rsc >= 0.25 * x2;
  }
  return false;
}

inline CertifyResult run_certify(const ExperimentSpec& spec) {
  require<ContractError>(spec.kind == ExperimentKind::certify, "run_certify: wrong kind");
  validate_spec(spec);
  const Eigen::Index n = spec.n > 0 ? spec.n : 64;
  const Eigen::Index m = spec.m > 0 ? spec.m : default_m(n, spec.log_base);
  const int per_region = spec.region_samples;
  require<ContractError>(per_region >= 1, "run_certify: region_samples must be >= 1");

  const ProblemInstance p = make_problem(spec.model, n, m, spec.seed, /*unit_norm=*/false);

  CertifyResult res;
  res.n = n;
  res.m = p.e.m();
  res.seed = spec.seed;
  res.coverage = coverage_scan(p.x, spec.coverage_samples, spec.seed);

  const Region all[] = {Region::R1, Region::R2z, Region::R2h, Region::R3};
  CsvTable t;
  t.header =
      "region,sample,znorm,dist,pop_curvature_along_target,pop_z_grad,pop_radial_grad,"
      "emp_neg_curv,emp_z_grad,emp_radial_grad,emp_rsc,pass";
  for (std::size_t ri = 0; ri < 4; ++ri) {
    const Region r = all[ri];
    Rng rng(spec.seed, Stream::sample, 100 + ri);
    CertifyRegionStats stats;
    stats.region = r;
    stats.samples = per_region;
    for (int s = 0; s < per_region; ++s) {
      const CVec z = sample_region_point(p.x, r, rng);
      const RegionCertificate pop = classify_region(p.x, z);
      const EmpiricalCertificates emp = empirical_certificates(p.e, p.x, z);
      const bool pass = certificate_pass(r, p.x, pop, emp);
      if (pass) ++stats.passes;
      t.rows.push_back({to_string(r), std::to_string(s), g17(pop.znorm), g17(pop.dist),
                        g17(pop.curvature_along_target), g17(pop.z_grad), g17(pop.radial_grad),
                        g17(emp.neg_curv), g17(emp.z_grad), g17(emp.radial_grad), g17(emp.rsc),
                        pass ? "1" : "0"});
    }
    stats.pass_rate = static_cast<double>(stats.passes) / static_cast<double>(per_region);
    res.regions.push_back(stats);
  }

  const std::string base = out_base(spec.out);
  nlohmann::ordered_json params{{"n", n},
                                {"m", res.m},
                                {"seed", spec.seed},
                                {"model", model_name(spec.model)},
                                {"region_samples", per_region},
                                {"coverage_samples", spec.coverage_samples}};
  nlohmann::ordered_json coverage{{"samples", res.coverage.samples},
                                  {"uncovered", res.coverage.uncovered},
                                  {"r1", res.coverage.r1},
                                  {"r2z", res.coverage.r2z},
                                  {"r2h", res.coverage.r2h},
                                  {"r3", res.coverage.r3}};
  nlohmann::ordered_json regions = nlohmann::ordered_json::array();
  for (const CertifyRegionStats& st : res.regions)
    regions.push_back({{"region", to_string(st.region)},
                       {"samples", st.samples},
                       {"passes", st.passes},
                       {"pass_rate", st.pass_rate}});
  nlohmann::ordered_json results{{"coverage", std::move(coverage)},
                                 {"regions", std::move(regions)}};
  nlohmann::ordered_json outputs = nlohmann::ordered_json::object();
  if (spec.format == OutputFormat::csv) {
    res.table_path = base + ".csv";
    write_csv(res.table_path, t);
    outputs["table"] = res.table_path;
  } else {
    results["table"] = table_as_json(t);
  }
  res.summary_path = base + ".summary.json";
  outputs["summary"] = res.summary_path;
  write_run_summary(res.summary_path, "certify", std::move(params), std::move(results),
                    std::move(outputs));
  return res;
}

// ---------------------------------------------------------------------------
// single solve: generated instance or measurement file
// ---------------------------------------------------------------------------

struct SolveRunResult {
  Eigen::Index n = 0, m = 0;
  bool x_known = false;
  bool converged = false, diverged = false;
  int iters = 0;
  double final_f = 0.0;
  double final_grad = 0.0;  // stacked norm
  double eps_rel = std::numeric_limits<double>::quiet_NaN();
  RunTrace trace;
  std::string table_path, summary_path;
};

inline SolveRunResult run_solve(const ExperimentSpec& spec) {
  require<ContractError>(spec.kind == ExperimentKind::solve, "run_solve: wrong kind");
  validate_spec(spec);

  Ensemble e;
  CVec x;
  bool x_known = false;
  if (!spec.in_path.empty()) {
    e = read_ensemble(spec.in_path);
  } else {
    const Eigen::Index n = spec.n > 0 ? spec.n : 64;
    const Eigen::Index m = spec.m > 0 ? spec.m : default_m(n, spec.log_base);
    ProblemInstance p = make_problem(spec.model, n, m, spec.seed, /*unit_norm=*/false);
    e = std::move(p.e);
    x = std::move(p.x);
    x_known = true;
  }
  const NormEstimate est = estimate_norm_and_radius(e);

  Rng init(spec.seed, Stream::trial_init, 0);
  const CVec z0 = (spec.init_at_target && x_known) ? x : init.ball(e.n(), est.R0);

  SolverConfig cfg;
  cfg.algo = spec.algo;
  cfg.delta = spec.delta;
  cfg.step_mu = spec.mu;
  cfg.tol_grad = spec.tol;
  if (spec.max_iters > 0) cfg.max_iters = spec.max_iters;
  const SolveResult run = spec.algo == Algo::gd
                              ? gradient_descent(e, cfg, z0, x_known ? &x : nullptr)
                              : trm_solve(e, cfg, z0, x_known ? &x : nullptr);

  SolveRunResult res;
  res.n = e.n();
  res.m = e.m();
  res.x_known = x_known;
  res.converged = run.trace.converged;
  res.diverged = run.trace.diverged;
  res.iters = run.trace.rows.back().iter;
  res.final_f = run.trace.rows.back().f;
  res.final_grad = run.trace.rows.back().grad_norm;
  if (x_known) res.eps_rel = dist_to_target(x, run.z) / x.norm();
  res.trace = run.trace;

  const std::string base = out_base(spec.out);
  nlohmann::ordered_json params{{"n", res.n},
                                {"m", res.m},
                                {"seed", spec.seed},
                                {"model", model_name(spec.model)},
                                {"algo", to_string(spec.algo)},
                                {"max_iters", cfg.max_iters},
                                {"grad_norm_convention", "stacked"}};
  if (!spec.in_path.empty()) params["in"] = spec.in_path;
  nlohmann::ordered_json results{{"converged", res.converged},
                                 {"diverged", res.diverged},
                                 {"iters", res.iters},
                                 {"final_f", res.final_f},
                                 {"final_grad_norm", res.final_grad}};
  if (x_known) results["eps_rel"] = res.eps_rel;
  nlohmann::ordered_json outputs = nlohmann::ordered_json::object();
  res.table_path = base + ".csv";
  write_trace_csv(res.table_path, run.trace);
  outputs["trace"] = res.table_path;
  res.summary_path = base + ".summary.json";
  outputs["summary"] = res.summary_path;
  write_run_summary(res.summary_path, "solve", std::move(params), std::move(results),
                    std::move(outputs));
  return res;
}

// ---------------------------------------------------------------------------
// subproblem benchmark: randomized instances incl. constructed degenerate
// ("hard") cases, checked against the independent eigendecomposition route
// ---------------------------------------------------------------------------

struct TrsBenchRow {
  int instance = 0;
  Eigen::Index d = 0;
  bool constructed_hard = false;
  TrsCase kind = TrsCase::interior;
  double kkt = 0.0;
  double q_gap = 0.0;  // |q - q_oracle|
  double lambda = 0.0;
  int bisect_iters = 0;
};

struct TrsBenchResult {
  std::vector<TrsBenchRow> rows;
  double kkt_p50 = 0.0, kkt_p90 = 0.0, kkt_p99 = 0.0, kkt_max = 0.0;
  double q_gap_max = 0.0;
  int hard_count = 0;
  std::string table_path, summary_path;
};

namespace detail {

inline RMat random_orthogonal_mat(Rng& rng, Eigen::Index d) {
  RMat gauss(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) gauss(i, j) = rng.normal();
  return Eigen::HouseholderQR<RMat>(gauss).householderQ();
}

// b orthogonal to the bottom eigenspace with the pseudo-inverse point strictly
// inside the sphere, forcing the degenerate completion branch
inline RealTrsProblem bench_hard_case(Rng& rng, Eigen::Index d) {
  const RMat V = random_orthogonal_mat(rng, d);
  RVec lam(d);
  lam[0] = -1.0 - rng.uniform();
  if (d > 1) lam[1] = rng.uniform() < 0.5 ? lam[0] : lam[0] + 0.5 + rng.uniform();
  for (Eigen::Index i = 2; i < d; ++i) lam[i] = lam[1] + 0.2 * static_cast<double>(i) + rng.uniform();
  RealTrsProblem p;
  p.A = V * lam.asDiagonal() * V.transpose();
  p.A = 0.5 * (p.A + RMat(p.A.transpose()));
  RVec beta(d);
  for (Eigen::Index i = 0; i < d; ++i) beta[i] = rng.normal();
  beta[0] = 0.0;
  if (d > 1 && lam[1] == lam[0]) beta[1] = 0.0;
  p.b = V * beta;
  // pseudo-inverse point at the critical shift
  RVec wp = RVec::Zero(d);
  for (Eigen::Index i = 0; i < d; ++i)
    if (lam[i] > lam[0]) wp -= (beta[i] / (lam[i] - lam[0])) * V.col(i);
  p.r = wp.norm() * (1.2 + rng.uniform()) + 0.1;
  return p;
}

inline RealTrsProblem bench_random_case(Rng& rng, Eigen::Index d) {
  const RMat V = random_orthogonal_mat(rng, d);
  RVec lam(d);
  for (Eigen::Index i = 0; i < d; ++i) lam[i] = 4.0 * rng.uniform() - 2.0;
  const double scale = std::pow(10.0, 4.0 * rng.uniform() - 2.0);
  RealTrsProblem p;
  p.A = scale * V * lam.asDiagonal() * V.transpose();
  p.A = 0.5 * (p.A + RMat(p.A.transpose()));
  RVec b(d);
  for (Eigen::Index i = 0; i < d; ++i) b[i] = rng.normal();
  p.b = scale * b;
  p.r = 0.1 + 1.9 * rng.uniform();
  return p;
}

}  // namespace detail

inline TrsBenchResult run_trs_bench(const ExperimentSpec& spec) {
  require<ContractError>(spec.kind == ExperimentKind::trs_bench, "run_trs_bench: wrong kind");
  validate_spec(spec);
  require<ContractError>(spec.instances >= 1, "run_trs_bench: need instances >= 1");
  require<ContractError>(spec.d_max >= 2, "run_trs_bench: need d_max >= 2");

  TrsBenchResult res;
  res.rows.resize(static_cast<std::size_t>(spec.instances));
  parallel_for_indices(spec.instances, [&](std::int64_t i) {
    Rng rng(spec.seed, Stream::generic, static_cast<std::uint64_t>(i));
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(i) % (spec.d_max - 1);
    const bool hard = (i % 10) >= 8;  // every 9th and 10th instance
    const RealTrsProblem prob =
        hard ? detail::bench_hard_case(rng, d) : detail::bench_random_case(rng, d);
    const TrsSolution sol = solve_trs_exact(prob, spec.trs_eps);
    const TrsSolution ora = trs_eigen_oracle(prob);
    TrsBenchRow& row = res.rows[static_cast<std::size_t>(i)];
    row.instance = static_cast<int>(i);
    row.d = d;
    row.constructed_hard = hard;
    row.kind = sol.kind;
    row.kkt = sol.kkt_residual;
    row.q_gap = std::abs(sol.q_value - ora.q_value);
    row.lambda = sol.lambda;
    row.bisect_iters = sol.bisect_iters;
  });

  std::vector<double> kkt;
  kkt.reserve(res.rows.size());
  for (const TrsBenchRow& row : res.rows) {
    kkt.push_back(row.kkt);
    res.q_gap_max = std::max(res.q_gap_max, row.q_gap);
    if (row.constructed_hard) ++res.hard_count;
  }
  std::sort(kkt.begin(), kkt.end());
  const auto pct = [&](double q) {
    const std::size_t idx = static_cast<std::size_t>(q * static_cast<double>(kkt.size() - 1));
    return kkt[idx];
  };
  res.kkt_p50 = pct(0.50);
  res.kkt_p90 = pct(0.90);
  res.kkt_p99 = pct(0.99);
  res.kkt_max = kkt.back();

  CsvTable t;
  t.header = "instance,d,constructed_hard,kind,kkt_residual,q_gap,lambda,bisect_iters";
  for (const TrsBenchRow& row : res.rows)
    t.rows.push_back({std::to_string(row.instance), std::to_string(row.d),
                      row.constructed_hard ? "1" : "0", to_string(row.kind), g17(row.kkt),
                      g17(row.q_gap), g17(row.lambda), std::to_string(row.bisect_iters)});

  const std::string base = out_base(spec.out);
  nlohmann::ordered_json params{{"instances", spec.instances},
                                {"d_max", spec.d_max},
                                {"seed", spec.seed},
                                {"eps", spec.trs_eps}};
  nlohmann::ordered_json results{{"kkt_p50", res.kkt_p50},   {"kkt_p90", res.kkt_p90},
                                 {"kkt_p99", res.kkt_p99},   {"kkt_max", res.kkt_max},
                                 {"q_gap_max", res.q_gap_max}, {"hard_count", res.hard_count}};
  nlohmann::ordered_json outputs = nlohmann::ordered_json::object();
  if (spec.format == OutputFormat::csv) {
    res.table_path = base + ".csv";
    write_csv(res.table_path, t);
    outputs["table"] = res.table_path;
  } else {
    results["table"] = table_as_json(t);
  }
  res.summary_path = base + ".summary.json";
  outputs["summary"] = res.summary_path;
  write_run_summary(res.summary_path, "trs-bench", std::move(params), std::move(results),
                    std::move(outputs));
  return res;
}

}  // namespace gpr
