#pragma once

#include <optional>
#include <vector>

#include "setmpc/qp.hpp"
#include "setmpc/reachability.hpp"

namespace setmpc {

enum class ControllerFlavor { Layered, TrackingTerminalEquality };

/// Horizon and weights of either controller flavor. Q, R, T must be positive
/// definite.
struct ControllerConfig {
  int horizon = 1;
  Matrix Q;
  Matrix R;
  Matrix T;
  ControllerFlavor flavor = ControllerFlavor::Layered;

  void validate(Index state_dim, Index input_dim) const;
};

/// One closed-loop controller evaluation: applied input, diagnostics, and the
/// full optimal decision data.
struct ControlStep {
  Vector u0;
  Mode mode = Mode::tracking();
  double optimal_cost = 0.0;
  Vector artificial_setpoint;
  std::vector<Vector> predicted_states;  ///< x_0 .. x_N
  std::vector<Vector> aux_states;        ///< x^a_0 .. x^a_{N-1}
  std::vector<Vector> aux_inputs;        ///< u^a_0 .. u^a_{N-1}
  QpStatus qp_status = QpStatus::Infeasible;
  std::vector<Index> active_set;         ///< warm-start handle
};

/// Builds the layered problem for the current state. In a layer the target
/// set rows come from the ladder rung and its cached input set; inside S_N
/// the target collapses to the artificial equilibrium and the problem reduces
/// to the tracking formulation. Decision layout: (u, x_a, u_a, x_s) in layer
/// mode, (u, x_s[, u_s]) in tracking mode.
QpProblem build_layered_qp(const Vector& x, const Vector& x_star, const SetLadder& ladder,
                           const ControllerConfig& cfg, const Tolerances& tols = {});

/// Terminal-equality tracking MPC: decision (u, x_s[, u_s]), terminal state
/// pinned to the artificial equilibrium. Feasibility of the QP is the domain
/// signal; no set membership is checked up front.
QpProblem build_tracking_qp(const Vector& x, const Vector& x_star, const LinearSystem& sys,
                            const ControllerConfig& cfg, const Tolerances& tols = {});

/// Receding-horizon control law: solves the flavor's problem at x and returns
/// the first optimal input with full diagnostics.
ControlStep kappa_mpc(const Vector& x, const Vector& x_star, const SetLadder& ladder,
                      const ControllerConfig& cfg, const Tolerances& tols = {},
                      const std::vector<Index>& warm_active = {});

/// Squared weight-induced distance from x to the polytope, min over y in P of
/// |x - y|_Q^2, computed by a small QP. Zero iff x is in P.
double distance_to_set(const Vector& x, const Polytope& p, const Matrix& weight,
                       const Tolerances& tols = {});

/// Steady-input map: when B has full column rank the unique u_s for a steady
/// x_s is W x_s with W = -pinv(B)(A - I); otherwise u_s stays a decision
/// variable and this returns std::nullopt.
std::optional<Matrix> steady_input_map(const LinearSystem& sys);

/// Closed-loop controller instance: immutable ladder reference plus a
/// warm-start cache. One instance serves one loop at a time.
class Controller {
 public:
  Controller(const SetLadder& ladder, ControllerConfig cfg, Tolerances tols = {});

  ControlStep step(const Vector& x, const Vector& x_star);
  const ControllerConfig& config() const { return cfg_; }
  const SetLadder& ladder() const { return ladder_; }
  void reset_warm_start();

 private:
  const SetLadder& ladder_;
  ControllerConfig cfg_;
  Tolerances tols_;
  std::vector<Index> warm_active_;
  int warm_layer_ = -1;
  Index warm_rows_ = -1;
};

}  // namespace setmpc
