// Command line front end: controllable-set ladders, closed-loop scenario
// runs, controller comparisons, and contractivity checks, all driven by a
// JSON project configuration. Outputs are plot-ready CSV plus JSON reports.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "setmpc/errors.hpp"
#include "setmpc/serialization.hpp"

namespace fs = std::filesystem;
using namespace setmpc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitGeneric = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitControllerFailure = 3;
constexpr int kExitOutsideDomain = 4;
constexpr int kExitConfigError = 5;

struct GlobalOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  bool no_assert = false;
};

fs::path resolve_out_dir(const GlobalOptions& opts, const ProjectConfig& cfg) {
  fs::path out = opts.out_dir.empty() ? fs::path(cfg.out_dir) : fs::path(opts.out_dir);
  fs::create_directories(out);
  return out;
}

double ladder_tol(const GlobalOptions& opts, const ProjectConfig& cfg) {
  return opts.tol ? *opts.tol : cfg.ladder.tol;
}

// Ladders are cached by a hash of (system, horizon, tolerances); a stale or
// foreign cache is silently rebuilt.
SetLadder obtain_ladder(const ProjectConfig& cfg, const GlobalOptions& opts, const fs::path& out,
                        bool* from_cache = nullptr) {
  const double tol = ladder_tol(opts, cfg);
  const std::uint64_t key = ladder_cache_key(cfg.system, cfg.ladder.horizon, tol, cfg.tolerances);
  const fs::path cache = out / "ladder.json";
  if (fs::exists(cache)) {
    try {
      SetLadder ladder = load_ladder(cache, cfg.system, key);
      if (from_cache) *from_cache = true;
      return ladder;
    } catch (const ConfigError&) {
      // fall through to rebuild
    }
  }
  SetLadder ladder = build_ladder(cfg.system, cfg.ladder.horizon, cfg.ladder.max_rungs, tol,
                                  cfg.tolerances);
  save_ladder(ladder, key, cache);
  if (from_cache) *from_cache = false;
  return ladder;
}

void write_rung_files(const SetLadder& ladder, const fs::path& out) {
  for (size_t k = 0; k < ladder.rungs.size(); ++k) {
    write_vertices_csv(out / ("rung_" + std::to_string(k) + ".csv"),
                       vertices_2d(ladder.rungs[k]));
  }
  write_vertices_csv(out / "Xs.csv", vertices_2d(ladder.rungs.front()));
  // A layer is the ring between consecutive rungs; emit its outer boundary
  // (the inner one is the previous rung's file).
  for (size_t k = 1; k + 1 < ladder.rungs.size(); ++k) {
    write_vertices_csv(out / ("layer_" + std::to_string(k) + ".csv"),
                       vertices_2d(ladder.rungs[k + 1]));
  }
}

int cmd_sets(const ProjectConfig& cfg, const GlobalOptions& opts) {
  const fs::path out = resolve_out_dir(opts, cfg);
  const SetLadder ladder = obtain_ladder(cfg, opts, out);
  write_rung_files(ladder, out);
  const ContractivityReport report = check_contractive(ladder, 1e-6, cfg.tolerances);
  write_contractivity_json(out / "contractivity_report.json", report);
  if (!ladder.converged) {
    std::fprintf(stderr, "ladder did not converge within %d rungs\n", cfg.ladder.max_rungs);
    return kExitNotConverged;
  }
  std::printf("ladder converged: k* = %d (%zu rungs), contractivity %s\n", ladder.k_star,
              ladder.rungs.size(), report.passed ? "passed" : "failed");
  return kExitOk;
}

int cmd_check(const ProjectConfig& cfg, const GlobalOptions& opts) {
  const fs::path out = resolve_out_dir(opts, cfg);
  const SetLadder ladder = obtain_ladder(cfg, opts, out);
  const ContractivityReport report = check_contractive(ladder, 1e-6, cfg.tolerances);
  write_contractivity_json(out / "contractivity_report.json", report);
  write_vertices_csv(out / "S_N_plus_1.csv", vertices_2d(report.s_n_plus_1));
  if (!ladder.converged) return kExitNotConverged;
  std::printf("contractivity %s (margin %.3e over %d facets, %d shared)\n",
              report.passed ? "passed" : "failed", report.min_margin, report.facets_checked,
              report.facets_shared);
  return kExitOk;
}

int cmd_simulate(const ProjectConfig& cfg, const GlobalOptions& opts,
                 const std::string& scenario_id) {
  const fs::path out = resolve_out_dir(opts, cfg);
  const ScenarioSpec& spec = cfg.scenario(scenario_id);
  const SetLadder ladder = obtain_ladder(cfg, opts, out);
  const AssertionPolicy policy =
      opts.no_assert ? AssertionPolicy::Warn : AssertionPolicy::Fatal;
  for (const std::string& name : spec.controllers) {
    Controller controller(ladder, cfg.controller(name), cfg.tolerances);
    const Trajectory traj = simulate(spec.scenario, controller, policy);
    const std::string stem = "trajectory_" + scenario_id + "_" + name;
    write_trajectory_csv(out / (stem + ".csv"), traj);
    write_summary_json(out / ("summary_" + scenario_id + "_" + name + ".json"), traj);
    std::printf("%s/%s: %s, final error %.3e%s\n", scenario_id.c_str(), name.c_str(),
                traj.summary.feasible ? "feasible" : "infeasible", traj.summary.final_error,
                traj.summary.warnings.empty()
                    ? ""
                    : (" (" + std::to_string(traj.summary.warnings.size()) + " warnings)").c_str());
  }
  return kExitOk;
}

int cmd_compare(const ProjectConfig& cfg, const GlobalOptions& opts) {
  const fs::path out = resolve_out_dir(opts, cfg);
  if (cfg.compare.controllers.empty()) {
    throw ConfigError("compare: no controllers configured");
  }
  const SetLadder ladder = obtain_ladder(cfg, opts, out);
  const std::uint64_t seed = opts.seed ? *opts.seed : cfg.compare.seed;
  std::vector<std::pair<std::string, ControllerConfig>> controllers;
  for (const std::string& name : cfg.compare.controllers) {
    controllers.emplace_back(name, cfg.controller(name));
  }
  const std::vector<Vector> points = sample_domain(ladder, cfg.compare.count, seed);
  const ComparisonTable table = compare(points, controllers, ladder, cfg.compare.setpoint,
                                        cfg.compare.t_sim, seed, cfg.tolerances);
  write_comparison_csv(out / "comparison.csv", table);
  write_means_json(out / "means.json", table);
  for (const auto& [name, phi] : table.mean_phi) {
    std::printf("%s: mean phi %.6g (%d points served)\n", name.c_str(), phi,
                cfg.compare.count - table.failures.at(name));
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Set-based MPC toolkit: controllable-set ladders, layered tracking MPC, "
               "closed-loop simulation and controller comparison"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions opts;
  app.add_option("--config", opts.config_path, "Project configuration JSON")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--out", opts.out_dir, "Output directory (overrides config out_dir)");
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Seed override for sampling");
  double tol_value = 0;
  auto* tol_opt = app.add_option("--tol", tol_value, "Ladder convergence tolerance override");
  app.add_flag("--no-assert", opts.no_assert,
               "Downgrade closed-loop invariant assertions to warnings");

  auto* sets = app.add_subcommand("sets", "Build the controllable-set ladder and emit plot data");
  auto* check = app.add_subcommand("check", "Run the contractivity check only");
  auto* simulate_cmd = app.add_subcommand("simulate", "Run a closed-loop scenario");
  std::string scenario_id;
  simulate_cmd->add_option("--scenario", scenario_id, "Scenario id from the config")->required();
  auto* compare_cmd = app.add_subcommand("compare", "Sample the domain and compare controllers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }
  if (seed_opt->count() > 0) opts.seed = seed_value;
  if (tol_opt->count() > 0) opts.tol = tol_value;

  try {
    const ProjectConfig cfg = load_config(opts.config_path);
    if (sets->parsed()) return cmd_sets(cfg, opts);
    if (check->parsed()) return cmd_check(cfg, opts);
    if (simulate_cmd->parsed()) return cmd_simulate(cfg, opts, scenario_id);
    if (compare_cmd->parsed()) return cmd_compare(cfg, opts);
    return kExitGeneric;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const SetpointNotEquilibrium& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const OutsideDomain& e) {
    std::fprintf(stderr, "outside domain: %s\n", e.what());
    return kExitOutsideDomain;
  } catch (const ControllerFailure& e) {
    std::fprintf(stderr, "controller failure: %s\n", e.what());
    return kExitControllerFailure;
  } catch (const InvariantViolation& e) {
    std::fprintf(stderr, "invariant violation: %s\n", e.what());
    return kExitControllerFailure;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitGeneric;
  }
}
