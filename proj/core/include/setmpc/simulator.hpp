#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "setmpc/controllers.hpp"

namespace setmpc {

/// Invariant checks along a closed loop: fatal (throw), warn (record), off.
enum class AssertionPolicy { Fatal, Warn, Off };

struct SetpointEvent {
  int time = 0;
  Vector setpoint;
};

/// Closed-loop run definition: initial state, setpoint schedule (strictly
/// increasing times starting at 0), and step count.
struct Scenario {
  std::string id;
  Vector x0;
  std::vector<SetpointEvent> schedule;
  int t_sim = 0;

  void validate() const;
  const Vector& setpoint_at(int step) const;
};

struct StepRecord {
  int step = 0;
  Vector x;
  Vector u;
  Mode mode = Mode::tracking();
  QpStatus qp_status = QpStatus::Infeasible;
  double cost = 0.0;
  double target_distance = 0.0;  ///< d_Q(x, Omega_x) for the step's target set
  Vector setpoint;
};

struct TrajectorySummary {
  bool feasible = true;
  int failed_step = -1;
  int steps_to_tracking = -1;
  double final_error = 0.0;                 ///< inf-norm state error at the last step
  std::map<int, int> steps_per_layer;       ///< layer index -> step count (0 = tracking)
  std::vector<std::string> warnings;        ///< downgraded assertion reports
};

/// Closed-loop record. Steps 0..t_sim are recorded; the input of the final
/// record is computed but never applied, so x(i+1) = A x(i) + B u(i) links
/// consecutive records exactly.
struct Trajectory {
  std::vector<StepRecord> steps;
  TrajectorySummary summary;
};

/// Applies the controller step by step under the scenario's schedule,
/// recording diagnostics and enforcing the closed-loop invariants
/// (admissibility, recursive feasibility, layer monotonicity, within-layer
/// cost decrease) under the given policy.
Trajectory simulate(const Scenario& scenario, Controller& controller,
                    AssertionPolicy policy = AssertionPolicy::Fatal);

/// Time-averaged tracking index:
/// (1/T) sum_{k=1..T} |x(k) - x*|_inf + |u(k) - u*|_inf.
double performance_index(const Trajectory& traj, const Vector& x_star, const Vector& u_star);

/// Uniform samples over the ladder domain by seeded rejection sampling from
/// its bounding box. Deterministic per seed.
std::vector<Vector> sample_domain(const SetLadder& ladder, int count, std::uint64_t seed);

struct ComparisonEntry {
  int point_id = 0;
  Vector x0;
  std::string controller;
  std::optional<double> phi;
  std::string status;  ///< "ok", "infeasible", "outside-domain"
};

struct ComparisonTable {
  std::vector<ComparisonEntry> entries;
  std::vector<std::pair<std::string, double>> mean_phi;  ///< per controller, over its feasible points
  std::map<std::string, int> failures;
  std::uint64_t seed = 0;
  int t_sim = 0;
  Vector setpoint;
};

/// Steers every sampled point to the setpoint with every controller and
/// tabulates the performance index; points a controller cannot serve are
/// recorded, not fatal. Runs fan out across a small thread pool and reduce in
/// point order, so the table is deterministic.
ComparisonTable compare(const std::vector<Vector>& points,
                        const std::vector<std::pair<std::string, ControllerConfig>>& controllers,
                        const SetLadder& ladder, const Vector& x_star, int t_sim,
                        std::uint64_t seed, const Tolerances& tols = {});

}  // namespace setmpc
