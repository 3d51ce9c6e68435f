#pragma once

#include <string>
#include <vector>

#include "setmpc/types.hpp"

namespace setmpc {

enum class QpStatus { Optimal, Infeasible };

struct VariableSlice {
  std::string name;
  Index offset = 0;
  Index size = 0;
};

/// Named, contiguous, non-overlapping slices that partition the decision
/// vector of a QpProblem.
struct VariableLayout {
  std::vector<VariableSlice> slices;

  Index total() const;
  const VariableSlice& slice(const std::string& name) const;
  bool partitions(Index dim) const;
};

/// Dense convex QP:
///   minimize 0.5 z'H z + g'z + c0  s.t.  G z <= h, E z = f.
/// H must be symmetric positive semidefinite (eigenvalue floor -1e-10).
struct QpProblem {
  Matrix H;
  Vector g;
  double c0 = 0.0;
  Matrix G;
  Vector h;
  Matrix E;
  Vector f;
  VariableLayout layout;

  Index dim() const { return g.size(); }
};

struct QpSolution {
  QpStatus status = QpStatus::Infeasible;
  Vector z;
  double value = 0.0;
  Vector ineq_dual;  ///< lambda >= 0; Farkas certificate when infeasible
  Vector eq_dual;
  double kkt_residual = 0.0;
  int iterations = 0;
  std::vector<Index> active_set;  ///< final working set, reusable as warm start
};

struct QpOptions {
  double qp_tol = 1e-7;
  int max_iterations = 2000;
  /// Warm start: previous step's active inequality rows. Tried first; the
  /// solver falls back to a phase-1 LP start when the guess is infeasible.
  std::vector<Index> warm_active;
};

/// Primal active-set method with a phase-1 LP start. Singular KKT systems
/// (H may be PSD-singular) are solved by least squares with ridge 1e-12.
/// Deterministic: ties in pivoting break toward the lowest row index.
QpSolution solve_qp(const QpProblem& p, const QpOptions& opts = {});

/// Per-block KKT residuals of a solution.
struct KktReport {
  double stationarity = 0.0;
  double primal_ineq = 0.0;
  double primal_eq = 0.0;
  double dual_feasibility = 0.0;
  double complementarity = 0.0;

  double max_residual() const;
};

KktReport verify_kkt(const QpProblem& p, const QpSolution& sol);

}  // namespace setmpc
