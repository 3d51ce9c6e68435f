#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "setmpc/simulator.hpp"

namespace setmpc {

/// Canonical double formatting used by every emitted file, so reruns with
/// identical inputs are byte-identical.
std::string format_double(double v);

// ---- JSON forms -----------------------------------------------------------

/// {"G": [[...]], "h": [...]}
std::string polytope_to_json(const Polytope& p);
Polytope polytope_from_json(const std::string& text);

/// Hash of the ladder inputs (system, horizon, tolerances); controls cache
/// reuse across CLI runs.
std::uint64_t ladder_cache_key(const LinearSystem& sys, int horizon, double ladder_tol,
                               const Tolerances& tols);

void save_ladder(const SetLadder& ladder, std::uint64_t cache_key,
                 const std::filesystem::path& path);

/// Throws ConfigError when the file does not parse or the stored key differs
/// from expected_key.
SetLadder load_ladder(const std::filesystem::path& path, const LinearSystem& sys,
                      std::uint64_t expected_key);

// ---- Project configuration --------------------------------------------------

struct LadderSpec {
  int horizon = 1;
  int max_rungs = 50;
  double tol = 1e-6;
};

struct ScenarioSpec {
  Scenario scenario;
  std::vector<std::string> controllers;
};

struct CompareSpec {
  int count = 0;
  std::uint64_t seed = 0;
  int t_sim = 0;
  Vector setpoint;
  std::vector<std::string> controllers;
};

struct ProjectConfig {
  LinearSystem system;
  LadderSpec ladder;
  Tolerances tolerances;
  std::vector<std::pair<std::string, ControllerConfig>> controllers;
  std::vector<ScenarioSpec> scenarios;
  CompareSpec compare;
  std::string out_dir = "out";

  const ControllerConfig& controller(const std::string& name) const;
  const ScenarioSpec& scenario(const std::string& id) const;
};

/// Parses and validates the project configuration; all failures surface as
/// ConfigError.
ProjectConfig load_config(const std::filesystem::path& path);

std::string controller_config_to_json(const std::string& name, const ControllerConfig& cfg);

/// Debug dump of a QP instance for reproducing solver cases offline.
std::string qp_problem_to_json(const QpProblem& p);
QpProblem qp_problem_from_json(const std::string& text);

// ---- CSV emission and round-trip parsers ------------------------------------

void write_vertices_csv(const std::filesystem::path& path, const std::vector<Vector>& vertices);
std::vector<Vector> read_vertices_csv(const std::filesystem::path& path);

/// Columns: step,x1,x2,u1,u2,mode,layer,cost,dQ,setpoint1,setpoint2.
/// Missing input components (m = 1 systems) are written as 0.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);

struct TrajectoryRow {
  int step = 0;
  double x1 = 0, x2 = 0, u1 = 0, u2 = 0;
  std::string mode;
  int layer = 0;
  double cost = 0, dQ = 0, setpoint1 = 0, setpoint2 = 0;
};
std::vector<TrajectoryRow> read_trajectory_csv(const std::filesystem::path& path);

/// Columns: point_id,x0_1,x0_2,controller,phi,status; phi is "n/a" for
/// points the controller could not serve.
void write_comparison_csv(const std::filesystem::path& path, const ComparisonTable& table);

struct ComparisonRow {
  int point_id = 0;
  double x0_1 = 0, x0_2 = 0;
  std::string controller;
  std::string phi;
  std::string status;
};
std::vector<ComparisonRow> read_comparison_csv(const std::filesystem::path& path);

void write_summary_json(const std::filesystem::path& path, const Trajectory& traj);
void write_means_json(const std::filesystem::path& path, const ComparisonTable& table);
void write_contractivity_json(const std::filesystem::path& path, const ContractivityReport& report);

}  // namespace setmpc
