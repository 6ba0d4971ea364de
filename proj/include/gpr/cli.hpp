#pragma once

// Command-line front end. Subcommands: gen, solve, figure1, sweep, landscape,
// certify, trs-bench. A key-value config file (`gpr --config run.ini <sub>`,
// INI/TOML-style with [subcommand] sections) may supply any flag; explicit
// flags override it. Exit codes: 0 ok, 2 usage, 3 data/input, 4 numerical.

#include <gpr/experiments.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace gpr {

inline std::vector<double> parse_ratio_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      require<ContractError>(used == item.size(), "");
      out.push_back(v);
    } catch (const std::exception&) {
      throw ContractError("--ratio-list: cannot parse entry '" + item + "'");
    }
  }
  require<ContractError>(!out.empty(), "--ratio-list: empty list");
  return out;
}

namespace detail {

struct CliState {
  ExperimentSpec spec;
  std::string model = "gaussian";
  std::string algo = "trm-adaptive";
  std::string format = "csv";
  std::string mode = "population-real-gaussian";
  std::string ratio_list;
};

inline void add_common(CLI::App* cmd, CliState& st) {
  cmd->add_option("--seed", st.spec.seed, "base RNG seed (default 1)");
  cmd->add_option("--out", st.spec.out, "output base path (suffixes are appended)")->required();
  cmd->add_option("--format", st.format, "table format: csv writes a side file, json embeds")
      ->check(CLI::IsMember({"csv", "json"}));
}

inline void add_model(CLI::App* cmd, CliState& st) {
  cmd->add_option("--model", st.model, "measurement model")
      ->check(CLI::IsMember({"gaussian", "masked-dct"}));
}

inline void add_solver_flags(CLI::App* cmd, CliState& st) {
  cmd->add_option("--algo", st.algo, "solver: trm-fixed, trm-adaptive, gd")
      ->check(CLI::IsMember({"trm-fixed", "trm-adaptive", "gd"}));
  cmd->add_option("--delta", st.spec.delta, "trust radius (0 = derive from data scale)");
  cmd->add_option("--mu", st.spec.mu,
                  "first-order step, in units of the inverse squared signal-norm estimate "
                  "(default 0.05)");
  cmd->add_option("--tol", st.spec.tol, "gradient stopping tolerance (0 = solver default)");
  cmd->add_option("--max-iters", st.spec.max_iters, "iteration cap (0 = per-command default)");
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"nonconvex phase retrieval: simulation, landscape analysis, and solvers"};
  app.set_config("--config", "", "key-value config file; explicit flags override it");
  app.require_subcommand(1);

  detail::CliState st;

  CLI::App* gen = app.add_subcommand("gen", "generate a measurement file");
  gen->add_option("--n", st.spec.n, "signal dimension (default 64)");
  gen->add_option("--m", st.spec.m, "measurement count (default 5 n ln n)");
  gen->add_option("--log-base", st.spec.log_base, "log base in the default m = 5 n log n");
  detail::add_model(gen, st);
  gen->add_option("--seed", st.spec.seed, "base RNG seed (default 1)");
  gen->add_option("--out", st.spec.out, "measurement file path")->required();

  CLI::App* solve = app.add_subcommand("solve", "run one solver instance");
  solve->add_option("--n", st.spec.n, "signal dimension (default 64; generated runs)");
  solve->add_option("--m", st.spec.m, "measurement count (default 5 n ln n)");
  solve->add_option("--log-base", st.spec.log_base, "log base in the default m");
  solve->add_option("--in", st.spec.in_path, "measurement file (otherwise generate)");
  solve->add_flag("--init-at-target", st.spec.init_at_target,
                  "start at the generated signal (diagnostics)");
  detail::add_model(solve, st);
  detail::add_solver_flags(solve, st);
  detail::add_common(solve, st);

  CLI::App* figure1 = app.add_subcommand(
      "figure1", "recovery histogram: one instance, many random inits, first-order method");
  figure1->add_option("--n", st.spec.n, "signal dimension (default 100)");
  figure1->add_option("--m", st.spec.m, "measurement count (default 5 n ln n)");
  figure1->add_option("--log-base", st.spec.log_base, "log base in the default m");
  figure1->add_option("--trials", st.spec.trials, "random initializations (default 100)");
  figure1->add_option("--mu", st.spec.mu,
                      "step size, in units of the inverse squared signal-norm estimate "
                      "(default 0.05)");
  figure1->add_option("--tol", st.spec.tol, "gradient stopping tolerance (0 = default)");
  figure1->add_option("--max-iters", st.spec.max_iters, "iteration cap (default 20000)");
  detail::add_model(figure1, st);
  detail::add_common(figure1, st);

  CLI::App* sweep =
      app.add_subcommand("sweep", "success probability versus the sampling ratio m/n");
  sweep->add_option("--n", st.spec.n, "signal dimension (default 128)");
  sweep->add_option("--ratio-list", st.ratio_list,
                    "comma-separated m/n ratios, strictly increasing (default 4..10)");
  sweep->add_option("--trials", st.spec.trials, "trials per ratio (default 25)");
  detail::add_model(sweep, st);
  detail::add_solver_flags(sweep, st);
  detail::add_common(sweep, st);

  CLI::App* landscape = app.add_subcommand("landscape", "2D objective grid over a planar slice");
  landscape->add_option("--mode", st.mode, "grid mode")
      ->check(CLI::IsMember(
          {"population-complex", "population-real-gaussian", "empirical"}));
  landscape->add_option("--lo", st.spec.lo, "grid lower bound (default -1.5)");
  landscape->add_option("--hi", st.spec.hi, "grid upper bound (default 1.5)");
  landscape->add_option("--steps", st.spec.steps, "grid points per axis (default 61)");
  landscape->add_option("--num-masks", st.spec.num_masks,
                        "masks for the empirical mode (default 256)");
  detail::add_common(landscape, st);

  CLI::App* certify =
      app.add_subcommand("certify", "coverage scan plus finite-sample certificate margins");
  certify->add_option("--n", st.spec.n, "signal dimension (default 64)");
  certify->add_option("--m", st.spec.m, "measurement count (default 5 n ln n)");
  certify->add_option("--log-base", st.spec.log_base, "log base in the default m");
  certify->add_option("--region-samples", st.spec.region_samples,
                      "samples per region (default 200)");
  certify->add_option("--coverage-samples", st.spec.coverage_samples,
                      "points in the coverage scan (default 20000)");
  detail::add_model(certify, st);
  detail::add_common(certify, st);

  CLI::App* trs_bench =
      app.add_subcommand("trs-bench", "subproblem benchmark against the eigendecomposition route");
  trs_bench->add_option("--instances", st.spec.instances, "instance count (default 200)");
  trs_bench->add_option("--d-max", st.spec.d_max, "maximum subproblem dimension (default 20)");
  trs_bench->add_option("--eps", st.spec.trs_eps, "bisection tolerance (default 1e-12)");
  detail::add_common(trs_bench, st);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    st.spec.model = model_from_name(st.model);
    st.spec.algo = algo_from_name(st.algo);
    st.spec.format = format_from_name(st.format);
    st.spec.grid_mode = grid_mode_from_name(st.mode);
    if (!st.ratio_list.empty()) st.spec.ratios = parse_ratio_list(st.ratio_list);

    if (app.got_subcommand(gen)) {
      const Eigen::Index n = st.spec.n > 0 ? st.spec.n : 64;
      const Eigen::Index m = st.spec.m > 0 ? st.spec.m : default_m(n, st.spec.log_base);
      const ProblemInstance p = make_problem(st.spec.model, n, m, st.spec.seed, false);
      write_ensemble(st.spec.out, p.e);
      std::cout << "gen: wrote " << st.spec.out << " (model=" << model_name(p.e.model)
                << " n=" << p.e.n() << " m=" << p.e.m() << " seed=" << st.spec.seed << ")\n";
    } else if (app.got_subcommand(solve)) {
      st.spec.kind = ExperimentKind::solve;
      const SolveRunResult r = run_solve(st.spec);
      std::cout << "solve: " << (r.diverged ? "diverged" : (r.converged ? "converged" : "stopped"))
                << " iters=" << r.iters << " final_f=" << g17(r.final_f)
                << " final_grad=" << g17(r.final_grad);
      if (r.x_known) std::cout << " eps_rel=" << g17(r.eps_rel);
      std::cout << "; wrote " << r.table_path << "\n";
    } else if (app.got_subcommand(figure1)) {
      st.spec.kind = ExperimentKind::figure1;
      const Figure1Result r = run_figure1(st.spec);
      std::cout << "figure1: " << r.success_count << "/" << r.rows.size()
                << " trials with dist <= 1e-4*||x||; wrote " << r.summary_path << "\n";
    } else if (app.got_subcommand(sweep)) {
      st.spec.kind = ExperimentKind::sweep;
      const SweepResult r = run_sweep(st.spec);
      std::cout << "sweep:";
      for (const SweepRow& row : r.rows)
        std::cout << " p(" << g17(row.ratio) << ")=" << g17(row.probability);
      std::cout << "; wrote " << r.summary_path << "\n";
    } else if (app.got_subcommand(landscape)) {
      st.spec.kind = ExperimentKind::landscape;
      const LandscapeRunResult r = run_landscape(st.spec);
      std::cout << "landscape: " << r.grid.spec.a1.steps << "x" << r.grid.spec.a2.steps
                << " mode=" << to_string(r.grid.mode) << "; wrote " << r.csv_path << "\n";
    } else if (app.got_subcommand(certify)) {
      st.spec.kind = ExperimentKind::certify;
      const CertifyResult r = run_certify(st.spec);
      std::cout << "certify: coverage " << r.coverage.samples << " samples, "
                << r.coverage.uncovered << " uncovered;";
      for (const CertifyRegionStats& s : r.regions)
        std::cout << " " << to_string(s.region) << "=" << s.passes << "/" << s.samples;
      std::cout << "; wrote " << r.summary_path << "\n";
    } else if (app.got_subcommand(trs_bench)) {
      st.spec.kind = ExperimentKind::trs_bench;
      const TrsBenchResult r = run_trs_bench(st.spec);
      std::cout << "trs-bench: kkt p50=" << g17(r.kkt_p50) << " p99=" << g17(r.kkt_p99)
                << " max=" << g17(r.kkt_max) << " q_gap_max=" << g17(r.q_gap_max) << " hard="
                << r.hard_count << "/" << r.rows.size() << "; wrote " << r.summary_path << "\n";
    }
    return 0;
  } catch (const ContractError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace gpr
