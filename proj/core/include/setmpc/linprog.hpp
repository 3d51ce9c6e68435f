#pragma once

#include "setmpc/types.hpp"

namespace setmpc {

enum class LpStatus { Optimal, Infeasible, Unbounded };

/// Dense linear program: minimize c'z subject to G z <= h and E z = f.
/// The equality block may be empty (zero rows).
struct LpProblem {
  Vector c;
  Matrix G;
  Vector h;
  Matrix E;
  Vector f;

  static LpProblem inequality_form(Vector c, Matrix G, Vector h);

  Index dim() const { return c.size(); }
};

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Vector z;        ///< minimizer; on Infeasible the least-violation point found
  double value = 0.0;
  /// Multipliers with c + G'ineq_dual + E'eq_dual = 0 and ineq_dual >= 0 on
  /// Optimal. On Infeasible they form a Farkas certificate:
  /// G'ineq_dual + E'eq_dual = 0, ineq_dual >= 0, h'ineq_dual + f'eq_dual < 0.
  Vector ineq_dual;
  Vector eq_dual;
  double infeasibility = 0.0;  ///< phase-1 residual (total constraint violation)
  int iterations = 0;
};

/// Two-phase dense simplex with a Dantzig pivot rule and Bland's rule as the
/// anti-cycling fallback. Deterministic: ties break toward the lowest index.
LpSolution solve_lp(const LpProblem& p, double feas_tol = 1e-9);

}  // namespace setmpc
