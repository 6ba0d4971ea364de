#include <gpr/cli.hpp>
#include <gpr/experiments.hpp>

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

using namespace gpr;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  const fs::path p = fs::temp_directory_path() / "gpr_harness_test";
  fs::create_directories(p);
  return p;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

nlohmann::json read_json(const std::string& path) {
  return nlohmann::json::parse(slurp(path));
}

int run_cli(std::vector<std::string> args) {
  std::vector<const char*> argv{"gpr"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("experiment spec validation") {
  ExperimentSpec s;
  s.kind = ExperimentKind::sweep;
  REQUIRE_THROWS_AS(run_sweep(s), ContractError);  // no output path
  s.out = (work_dir() / "v").string();
  s.ratios = {5, 4};
  REQUIRE_THROWS_AS(run_sweep(s), ContractError);  // not increasing
  s.ratios = {4, 5};
  REQUIRE_THROWS_AS(run_figure1(s), ContractError);  // kind mismatch (spec says sweep)
}

TEST_CASE("out_base strips table suffixes") {
  REQUIRE(out_base("runs/fig1.csv") == "runs/fig1");
  REQUIRE(out_base("runs/fig1.json") == "runs/fig1");
  REQUIRE(out_base("runs/fig1") == "runs/fig1");
  REQUIRE(out_base("a.csvx") == "a.csvx");
}

TEST_CASE("recovery histogram run writes table and summary") {
  const fs::path dir = work_dir();
  ExperimentSpec s;
  s.kind = ExperimentKind::figure1;
  s.n = 16;
  s.trials = 4;
  s.seed = 21;
  s.out = (dir / "fig").string();
  const Figure1Result r = run_figure1(s);
  REQUIRE(r.rows.size() == 4);
  REQUIRE(r.m == default_m(16));
  REQUIRE(r.x_norm == Catch::Approx(1.0).epsilon(1e-12));
  for (const Figure1Row& row : r.rows) {
    REQUIRE(std::isfinite(row.final_f));
    REQUIRE(std::isfinite(row.final_dist));
  }

  const std::string csv = slurp(r.table_path);
  REQUIRE(csv.rfind("trial,iters,converged,final_f,final_dist,neg_log10_f,neg_log10_dist\n",
                    0) == 0);
  const nlohmann::json j = read_json(r.summary_path);
  REQUIRE(j["format"] == "run-summary");
  REQUIRE(j["version"] == 1);
  REQUIRE(j["kind"] == "figure1");
  REQUIRE(j["params"]["grad_norm_convention"] == "stacked");

  // byte-identical reruns
  ExperimentSpec s2 = s;
  s2.out = (dir / "fig_rerun").string();
  const Figure1Result r2 = run_figure1(s2);
  REQUIRE(slurp(r2.table_path) == csv);
}

TEST_CASE("starting at the target gives a zero distance column") {
  ExperimentSpec s;
  s.kind = ExperimentKind::figure1;
  s.n = 12;
  s.trials = 1;
  s.seed = 3;
  s.init_at_target = true;
  s.out = (work_dir() / "fig_at_x").string();
  const Figure1Result r = run_figure1(s);
  REQUIRE(r.rows.size() == 1);
  REQUIRE(r.rows[0].final_dist == 0.0);
  REQUIRE(r.all_success);
}

TEST_CASE("sweep emits one row per ratio with sane probabilities") {
  ExperimentSpec s;
  s.kind = ExperimentKind::sweep;
  s.n = 16;
  s.ratios = {5, 8};
  s.trials = 3;
  s.seed = 11;
  s.out = (work_dir() / "sw").string();
  const SweepResult r = run_sweep(s);
  REQUIRE(r.rows.size() == 2);
  REQUIRE(r.rows[0].m == 80);
  REQUIRE(r.rows[1].m == 128);
  for (const SweepRow& row : r.rows) {
    REQUIRE(row.trials == 3);
    REQUIRE(row.successes >= 0);
    REQUIRE(row.successes <= 3);
    REQUIRE(row.probability == Catch::Approx(row.successes / 3.0));
  }
  const nlohmann::json j = read_json(r.summary_path);
  REQUIRE(j["results"]["injectivity_reference_ratio"] == 4.0);
  const std::string csv = slurp(r.table_path);
  REQUIRE(csv.rfind("ratio,m,successes,trials,probability\n", 0) == 0);
}

TEST_CASE("json format embeds the table instead of a side file") {
  ExperimentSpec s;
  s.kind = ExperimentKind::sweep;
  s.n = 12;
  s.ratios = {6};
  s.trials = 2;
  s.seed = 12;
  s.format = OutputFormat::json;
  s.out = (work_dir() / "sw_json").string();
  const SweepResult r = run_sweep(s);
  REQUIRE(r.table_path.empty());
  const nlohmann::json j = read_json(r.summary_path);
  REQUIRE(j["results"]["table"]["columns"].size() == 5);
  REQUIRE(j["results"]["table"]["rows"].size() == 1);
}

TEST_CASE("landscape run writes grid, sidecar, and summary") {
  ExperimentSpec s;
  s.kind = ExperimentKind::landscape;
  s.grid_mode = GridMode::population_real_gaussian;
  s.steps = 21;
  s.out = (work_dir() / "land").string();
  const LandscapeRunResult r = run_landscape(s);
  REQUIRE(r.grid.values.rows() == 21);
  const nlohmann::json meta = read_json(r.sidecar_path);
  REQUIRE(meta["format"] == "landscape-grid");
  const nlohmann::json j = read_json(r.summary_path);
  REQUIRE(j["kind"] == "landscape");
  REQUIRE(j["results"]["min_value"].get<double>() >= -1e-9);
}

TEST_CASE("certificate scan covers and certifies at reduced scale") {
  ExperimentSpec s;
  s.kind = ExperimentKind::certify;
  s.n = 8;
  s.seed = 5;
  s.region_samples = 12;
  s.coverage_samples = 3000;
  s.out = (work_dir() / "cert").string();
  const CertifyResult r = run_certify(s);
  REQUIRE(r.coverage.uncovered == 0);
  REQUIRE(r.regions.size() == 4);
  for (const CertifyRegionStats& st : r.regions) {
    REQUIRE(st.samples == 12);
    REQUIRE(st.passes >= 11);  // tiny n leaves room for one fluctuation
  }
  const std::string csv = slurp(r.table_path);
  REQUIRE(csv.rfind("region,sample,znorm,dist,", 0) == 0);
  const std::size_t lines = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
  REQUIRE(lines == 1 + 4 * 12);
}

TEST_CASE("single solve run from generated and loaded measurements") {
  const fs::path dir = work_dir();
  ExperimentSpec s;
  s.kind = ExperimentKind::solve;
  s.n = 16;
  s.seed = 8;
  s.out = (dir / "solve_gen").string();
  const SolveRunResult r = run_solve(s);
  REQUIRE(r.converged);
  REQUIRE(r.x_known);
  REQUIRE(r.eps_rel <= 1e-5);
  const nlohmann::json j = read_json(r.summary_path);
  REQUIRE(j["params"]["grad_norm_convention"] == "stacked");
  REQUIRE(j["results"]["eps_rel"].get<double>() <= 1e-5);

  // the same instance through a measurement file: x is unknown to the solver
  const ProblemInstance p = make_problem(Model::gaussian, 16, default_m(16), 8, false);
  const std::string meas = (dir / "meas.bin").string();
  write_ensemble(meas, p.e);
  ExperimentSpec s2;
  s2.kind = ExperimentKind::solve;
  s2.in_path = meas;
  s2.seed = 8;
  s2.out = (dir / "solve_ext").string();
  const SolveRunResult r2 = run_solve(s2);
  REQUIRE(r2.converged);
  REQUIRE_FALSE(r2.x_known);
  REQUIRE(std::isnan(r2.eps_rel));
  // identical ensemble and init stream: identical trace
  REQUIRE(r2.final_f == r.final_f);
  const nlohmann::json j2 = read_json(r2.summary_path);
  REQUIRE_FALSE(j2["results"].contains("eps_rel"));
}

TEST_CASE("subproblem benchmark meets residual targets") {
  ExperimentSpec s;
  s.kind = ExperimentKind::trs_bench;
  s.instances = 60;
  s.d_max = 12;
  s.seed = 31;
  s.out = (work_dir() / "bench").string();
  const TrsBenchResult r = run_trs_bench(s);
  REQUIRE(r.rows.size() == 60);
  REQUIRE(r.hard_count == 12);  // 2 of every 10
  for (const TrsBenchRow& row : r.rows) {
    REQUIRE(row.kkt <= 1e-8);
    REQUIRE(row.q_gap <= 1e-8);
    if (row.constructed_hard) REQUIRE(row.kind == TrsCase::hard);
  }
  REQUIRE(r.kkt_p50 <= r.kkt_p90);
  REQUIRE(r.kkt_p90 <= r.kkt_p99);
  REQUIRE(r.kkt_p99 <= r.kkt_max);
}

TEST_CASE("undersampled sweep trials stall gracefully instead of throwing") {
  // regression: at m = 6n this instance has a near-degenerate critical point
  // where the model decrease falls below rounding noise; the adaptive radius
  // used to collapse to denormals and blow up the subproblem bisection
  const ProblemInstance p = make_problem(Model::gaussian, 24, 144, mix_seed(17, 0), false);
  Rng init(mix_seed(17, 0), Stream::trial_init, 3);
  const CVec z0 = init.ball(24, p.est.R0);
  SolverConfig cfg;
  const SolveResult run = trm_solve(p.e, cfg, z0, &p.x);
  REQUIRE((run.trace.converged || run.trace.stalled));
  if (run.trace.stalled) {
    REQUIRE_FALSE(run.trace.converged);
    REQUIRE(run.trace.rows.back().iter == static_cast<int>(run.trace.rows.size()) - 1);
  }

  // the full sweep row completes and counts the stalled trial as a failure
  ExperimentSpec s;
  s.kind = ExperimentKind::sweep;
  s.n = 24;
  s.ratios = {6};
  s.trials = 6;
  s.seed = 17;
  s.out = (work_dir() / "sw_stall").string();
  const SweepResult r = run_sweep(s);
  REQUIRE(r.rows[0].trials == 6);
  REQUIRE(r.rows[0].successes >= 0);
  REQUIRE(r.rows[0].successes <= 6);
}

TEST_CASE("worker pool runs every unit exactly once and propagates errors") {
  std::vector<std::atomic<int>> hits(257);
  for (auto& h : hits) h = 0;
  parallel_for_indices(257, [&](std::int64_t i) { ++hits[static_cast<std::size_t>(i)]; });
  for (const auto& h : hits) REQUIRE(h.load() == 1);

  REQUIRE_THROWS_AS(parallel_for_indices(
                        8, [&](std::int64_t i) { require<NumericalError>(i != 5, "unit 5"); }),
                    NumericalError);
}

TEST_CASE("command line surface maps errors to exit codes") {
  const fs::path dir = work_dir();
  REQUIRE(run_cli({"solve", "--n", "12", "--seed", "4", "--out",
                   (dir / "cli_solve").string()}) == 0);
  REQUIRE(fs::exists(dir / "cli_solve.csv"));
  REQUIRE(fs::exists(dir / "cli_solve.summary.json"));

  // usage errors
  REQUIRE(run_cli({"solve", "--n", "12"}) == 2);              // missing --out
  REQUIRE(run_cli({"frobnicate"}) == 2);                      // unknown subcommand
  REQUIRE(run_cli({"solve", "--algo", "newton", "--out", (dir / "x").string()}) == 2);
  REQUIRE(run_cli({"sweep", "--n", "8", "--ratio-list", "6,5", "--trials", "1", "--out",
                   (dir / "y").string()}) == 2);               // decreasing ratios
  REQUIRE(run_cli({"sweep", "--n", "8", "--ratio-list", "4,bad", "--trials", "1", "--out",
                   (dir / "y2").string()}) == 2);              // unparseable ratio

  // data errors
  REQUIRE(run_cli({"solve", "--in", (dir / "missing.bin").string(), "--out",
                   (dir / "z").string()}) == 3);
  REQUIRE(run_cli({"landscape", "--mode", "empirical", "--steps", "5", "--out",
                   "/nonexistent_dir_gpr/out"}) == 3);        // unwritable path
}

TEST_CASE("command line landscape matches the library call byte for byte") {
  const fs::path dir = work_dir();
  REQUIRE(run_cli({"landscape", "--mode", "population-complex", "--steps", "9", "--out",
                   (dir / "cli_land").string()}) == 0);
  ExperimentSpec s;
  s.kind = ExperimentKind::landscape;
  s.grid_mode = GridMode::population_complex;
  s.steps = 9;
  s.out = (dir / "lib_land").string();
  const LandscapeRunResult r = run_landscape(s);
  REQUIRE(slurp((dir / "cli_land.csv").string()) == slurp(r.csv_path));
}
