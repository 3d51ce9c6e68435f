#include "setmpc/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <random>
#include <thread>

#include "setmpc/errors.hpp"

namespace setmpc {

void Scenario::validate() const {
  if (t_sim < 1) throw ConfigError("Scenario: t_sim must be >= 1");
  if (schedule.empty()) throw ConfigError("Scenario: empty setpoint schedule");
  if (schedule.front().time != 0) throw ConfigError("Scenario: schedule must start at time 0");
  for (size_t i = 1; i < schedule.size(); ++i) {
    if (schedule[i].time <= schedule[i - 1].time) {
      throw ConfigError("Scenario: schedule times must strictly increase");
    }
  }
}

const Vector& Scenario::setpoint_at(int step) const {
  size_t active = 0;
  for (size_t i = 0; i < schedule.size(); ++i) {
    if (schedule[i].time <= step) active = i;
  }
  return schedule[active].setpoint;
}

namespace {

class AssertionSink {
 public:
  AssertionSink(AssertionPolicy policy, std::vector<std::string>& warnings)
      : policy_(policy), warnings_(warnings) {}

  void check(bool ok, const std::string& what) {
    if (ok || policy_ == AssertionPolicy::Off) return;
    if (policy_ == AssertionPolicy::Fatal) throw InvariantViolation(what);
    warnings_.push_back(what);
  }

 private:
  AssertionPolicy policy_;
  std::vector<std::string>& warnings_;
};

std::string describe(int step, const std::string& what) {
  return "step " + std::to_string(step) + ": " + what;
}

}  // namespace

Trajectory simulate(const Scenario& scenario, Controller& controller, AssertionPolicy policy) {
  scenario.validate();
  const SetLadder& ladder = controller.ladder();
  const LinearSystem& sys = ladder.system;
  const Tolerances tols;

  for (const SetpointEvent& ev : scenario.schedule) {
    if (!contains(ladder.rungs.front(), ev.setpoint, tols.set_tol)) {
      throw SetpointNotEquilibrium("simulate: scheduled setpoint outside the equilibrium set");
    }
  }

  const bool layered = controller.config().flavor == ControllerFlavor::Layered;
  if (layered && !contains(ladder.domain(), scenario.x0, tols.set_tol)) {
    throw OutsideDomain("simulate: initial state outside the controllable domain");
  }

  Trajectory traj;
  traj.steps.reserve(static_cast<size_t>(scenario.t_sim) + 1);
  AssertionSink assert_sink(policy, traj.summary.warnings);
  controller.reset_warm_start();

  Vector x = scenario.x0;
  int previous_layer = -1;
  double previous_cost = 0.0;
  double previous_distance = 0.0;
  bool have_previous = false;

  for (int i = 0; i <= scenario.t_sim; ++i) {
    const Vector& x_star = scenario.setpoint_at(i);
    ControlStep step;
    try {
      step = controller.step(x, x_star);
    } catch (const OutsideDomain&) {
      if (layered) throw;
      traj.summary.feasible = false;
      traj.summary.failed_step = i;
      break;
    } catch (const NumericalFailure& e) {
      throw ControllerFailure(std::string("controller solve failed: ") + e.what(), i);
    }

    if (step.qp_status != QpStatus::Optimal) {
      if (layered) {
        throw ControllerFailure("layered controller lost feasibility", i);
      }
      traj.summary.feasible = false;
      traj.summary.failed_step = i;
      break;
    }

    StepRecord rec;
    rec.step = i;
    rec.x = x;
    rec.u = step.u0;
    rec.mode = step.mode;
    rec.qp_status = step.qp_status;
    rec.cost = step.optimal_cost;
    rec.setpoint = x_star;
    const int k = step.mode.layer_index();
    if (step.mode.is_tracking()) {
      const Vector diff = x - step.artificial_setpoint;
      rec.target_distance = diff.dot(controller.config().Q * diff);
    } else {
      rec.target_distance =
          distance_to_set(x, ladder.rungs[static_cast<size_t>(k)], controller.config().Q, tols);
    }

    assert_sink.check(contains(sys.X, x, tols.set_tol), describe(i, "state left X"));
    assert_sink.check(contains(sys.U, step.u0, tols.set_tol), describe(i, "input left U"));
    if (layered) {
      assert_sink.check(previous_layer < 0 || k <= previous_layer,
                        describe(i, "layer index increased"));
      if (have_previous && previous_layer >= 1 && k == previous_layer) {
        // Within-layer decrease: cost drops by at least the Q-distance of the
        // previous state to the target rung, up to solver slack.
        const double decrease = step.optimal_cost - previous_cost;
        assert_sink.check(decrease <= -previous_distance + 10.0 * tols.qp_tol,
                          describe(i, "within-layer cost decrease violated"));
      }
    }

    if (step.mode.is_tracking() && traj.summary.steps_to_tracking < 0) {
      traj.summary.steps_to_tracking = i;
    }
    traj.summary.steps_per_layer[k] += 1;

    previous_layer = k;
    previous_cost = step.optimal_cost;
    previous_distance = rec.target_distance;
    have_previous = true;

    traj.steps.push_back(std::move(rec));
    if (i < scenario.t_sim) {
      x = sys.A * x + sys.B * step.u0;
    }
  }

  if (!traj.steps.empty()) {
    const StepRecord& last = traj.steps.back();
    traj.summary.final_error = (last.x - last.setpoint).lpNorm<Eigen::Infinity>();
  }
  return traj;
}

double performance_index(const Trajectory& traj, const Vector& x_star, const Vector& u_star) {
  if (traj.steps.size() < 2) return 0.0;
  double sum = 0.0;
  for (size_t k = 1; k < traj.steps.size(); ++k) {
    sum += (traj.steps[k].x - x_star).lpNorm<Eigen::Infinity>();
    sum += (traj.steps[k].u - u_star).lpNorm<Eigen::Infinity>();
  }
  return sum / static_cast<double>(traj.steps.size() - 1);
}

std::vector<Vector> sample_domain(const SetLadder& ladder, int count, std::uint64_t seed) {
  std::vector<Vector> points;
  if (count <= 0) return points;
  const Polytope& domain = ladder.domain();
  const auto [lo, hi] = bounding_box(domain);
  const Index d = domain.dim();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const long max_draws = 10000 + 1000L * count;
  long draws = 0;
  points.reserve(static_cast<size_t>(count));
  while (static_cast<int>(points.size()) < count) {
    if (++draws > max_draws) {
      throw SamplingStalled("sample_domain: acceptance rate below 0.1%");
    }
    Vector z(d);
    for (Index j = 0; j < d; ++j) {
      z(j) = lo(j) + (hi(j) - lo(j)) * unit(rng);
    }
    if (contains(domain, z, 0.0)) points.push_back(std::move(z));
  }
  return points;
}

namespace {

ComparisonEntry run_point(int point_id, const Vector& x0, const std::string& name,
                          const ControllerConfig& cfg, const SetLadder& ladder,
                          const Vector& x_star, const Vector& u_star, int t_sim,
                          const Tolerances& tols) {
  ComparisonEntry entry;
  entry.point_id = point_id;
  entry.x0 = x0;
  entry.controller = name;
  Scenario sc;
  sc.id = "compare";
  sc.x0 = x0;
  sc.schedule = {{0, x_star}};
  sc.t_sim = t_sim;
  try {
    Controller controller(ladder, cfg, tols);
    const Trajectory traj = simulate(sc, controller, AssertionPolicy::Off);
    if (traj.summary.feasible) {
      entry.phi = performance_index(traj, x_star, u_star);
      entry.status = "ok";
    } else {
      entry.status = "infeasible";
    }
  } catch (const OutsideDomain&) {
    entry.status = "outside-domain";
  } catch (const ControllerFailure&) {
    entry.status = "infeasible";
  }
  return entry;
}

}  // namespace

ComparisonTable compare(const std::vector<Vector>& points,
                        const std::vector<std::pair<std::string, ControllerConfig>>& controllers,
                        const SetLadder& ladder, const Vector& x_star, int t_sim,
                        std::uint64_t seed, const Tolerances& tols) {
  ComparisonTable table;
  table.seed = seed;
  table.t_sim = t_sim;
  table.setpoint = x_star;

  const std::optional<Matrix> W = steady_input_map(ladder.system);
  Vector u_star;
  if (W) {
    u_star = (*W) * x_star;
  } else {
    // Least-squares steady input for the setpoint.
    const Matrix Bm = ladder.system.B;
    u_star = Bm.completeOrthogonalDecomposition().solve(
        -(ladder.system.A - Matrix::Identity(ladder.system.state_dim(),
                                             ladder.system.state_dim())) *
        x_star);
  }

  struct Job {
    int point_id;
    size_t controller_idx;
  };
  std::vector<Job> jobs;
  for (size_t p = 0; p < points.size(); ++p) {
    for (size_t c = 0; c < controllers.size(); ++c) {
      jobs.push_back({static_cast<int>(p), c});
    }
  }

  std::vector<ComparisonEntry> entries(jobs.size());
  const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  for (size_t base = 0; base < jobs.size(); base += workers) {
    std::vector<std::future<ComparisonEntry>> batch;
    const size_t end = std::min(jobs.size(), base + workers);
    for (size_t j = base; j < end; ++j) {
      const Job job = jobs[j];
      batch.push_back(std::async(std::launch::async, [&, job] {
        return run_point(job.point_id, points[static_cast<size_t>(job.point_id)],
                         controllers[job.controller_idx].first,
                         controllers[job.controller_idx].second, ladder, x_star, u_star, t_sim,
                         tols);
      }));
    }
    for (size_t j = base; j < end; ++j) {
      entries[j] = batch[j - base].get();
    }
  }
  table.entries = std::move(entries);

  for (const auto& [name, cfg] : controllers) {
    double sum = 0.0;
    int ok = 0;
    int failed = 0;
    for (const ComparisonEntry& e : table.entries) {
      if (e.controller != name) continue;
      if (e.phi) {
        sum += *e.phi;
        ++ok;
      } else {
        ++failed;
      }
    }
    table.mean_phi.emplace_back(name, ok > 0 ? sum / ok : 0.0);
    table.failures[name] = failed;
  }
  return table;
}

}  // namespace setmpc
