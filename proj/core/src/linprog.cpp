#include "setmpc/linprog.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "setmpc/errors.hpp"

namespace setmpc {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kReducedCostTol = 1e-10;

// Dense tableau for the standard form min c'x, A x = b, x >= 0 obtained by
// splitting z = z+ - z-, adding one slack per inequality row and one
// artificial per row that cannot start basic.
struct Tableau {
  Matrix body;              // live_rows x (num_cols + 1), last column is rhs
  Eigen::RowVectorXd obj;   // reduced-cost row for the active phase
  std::vector<int> basis;   // basic column per live row
  std::vector<int> row_id;  // live row -> original row index
  Index num_cols = 0;

  double rhs(Index i) const { return body(i, num_cols); }
};

int pick_entering(const Tableau& t, const std::vector<bool>& allowed, bool bland) {
  int best = -1;
  double best_rc = -kReducedCostTol;
  for (Index j = 0; j < t.num_cols; ++j) {
    if (!allowed[static_cast<size_t>(j)]) continue;
    const double rc = t.obj(j);
    if (rc < -kReducedCostTol) {
      if (bland) return static_cast<int>(j);
      if (rc < best_rc) {
        best_rc = rc;
        best = static_cast<int>(j);
      }
    }
  }
  return best;
}

int pick_leaving(const Tableau& t, int enter) {
  int best = -1;
  double best_ratio = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < t.body.rows(); ++i) {
    const double a = t.body(i, enter);
    if (a > kPivotTol) {
      const double ratio = std::max(t.rhs(i), 0.0) / a;
      if (ratio < best_ratio - 1e-13 ||
          (ratio < best_ratio + 1e-13 && best >= 0 && t.basis[static_cast<size_t>(i)] < t.basis[static_cast<size_t>(best)])) {
        best_ratio = ratio;
        best = static_cast<int>(i);
      }
    }
  }
  return best;
}

void pivot(Tableau& t, int row, int col) {
  const double piv = t.body(row, col);
  t.body.row(row) /= piv;
  for (Index i = 0; i < t.body.rows(); ++i) {
    if (i == row) continue;
    const double factor = t.body(i, col);
    if (factor != 0.0) t.body.row(i) -= factor * t.body.row(row);
  }
  const double obj_factor = t.obj(col);
  if (obj_factor != 0.0) {
    t.obj -= obj_factor * t.body.row(row).head(t.num_cols + 1);
  }
  t.basis[static_cast<size_t>(row)] = col;
}

// Runs simplex iterations until the current phase objective is optimal.
// Returns false when the problem is unbounded in the current phase.
bool run_phase(Tableau& t, const std::vector<bool>& allowed, int max_iter, int* iterations) {
  bool bland = false;
  int degenerate_streak = 0;
  double last_obj = t.obj(t.num_cols);
  while (true) {
    const int enter = pick_entering(t, allowed, bland);
    if (enter < 0) return true;
    const int leave = pick_leaving(t, enter);
    if (leave < 0) return false;
    pivot(t, leave, enter);
    if (++(*iterations) > max_iter) {
      throw MaxIterationsError("solve_lp: cycling guard exceeded");
    }
    // The objective row stores the negated phase objective, so progress
    // shows up as an increase.
    const double obj = t.obj(t.num_cols);
    if (obj < last_obj + 1e-13) {
      if (++degenerate_streak > 2 * static_cast<int>(t.num_cols)) bland = true;
    } else {
      degenerate_streak = 0;
      bland = false;
    }
    last_obj = obj;
  }
}

Eigen::RowVectorXd reduced_costs(const Tableau& t, const Vector& costs) {
  Eigen::RowVectorXd rc(t.num_cols + 1);
  rc.setZero();
  for (Index j = 0; j < t.num_cols; ++j) rc(j) = costs(j);
  rc(t.num_cols) = 0.0;
  for (Index i = 0; i < t.body.rows(); ++i) {
    const double cb = costs(t.basis[static_cast<size_t>(i)]);
    if (cb != 0.0) rc -= cb * t.body.row(i).head(t.num_cols + 1);
  }
  return rc;
}

}  // namespace

LpProblem LpProblem::inequality_form(Vector c, Matrix G, Vector h) {
  LpProblem p;
  p.c = std::move(c);
  p.G = std::move(G);
  p.h = std::move(h);
  p.E = Matrix(0, p.c.size());
  p.f = Vector(0);
  return p;
}

LpSolution solve_lp(const LpProblem& p, double feas_tol) {
  const Index n = p.c.size();
  const Index mi = p.G.rows();
  const Index me = p.E.rows();
  if (n < 1) throw DimensionMismatch("solve_lp: empty decision vector");
  if (p.G.cols() != n || p.h.size() != mi) throw DimensionMismatch("solve_lp: inequality block shape");
  if (me > 0 && (p.E.cols() != n || p.f.size() != me)) throw DimensionMismatch("solve_lp: equality block shape");
  if (!p.c.allFinite() || !p.G.allFinite() || !p.h.allFinite() ||
      (me > 0 && (!p.E.allFinite() || !p.f.allFinite()))) {
    throw NumericalFailure("solve_lp: non-finite coefficients");
  }

  const Index m = mi + me;
  // Columns: z+ (n), z- (n), slacks (mi), artificials (m). Artificial columns
  // double as row probes for dual extraction, so they exist for every row.
  const Index cols = 2 * n + mi + m;
  Tableau t;
  t.num_cols = cols;
  t.body.setZero(m, cols + 1);
  t.basis.assign(static_cast<size_t>(m), -1);
  t.row_id.resize(static_cast<size_t>(m));
  Vector sign(m);

  for (Index i = 0; i < m; ++i) {
    const bool is_ineq = i < mi;
    const Vector row = is_ineq ? Vector(p.G.row(i)) : Vector(p.E.row(i - mi));
    const double b = is_ineq ? p.h(i) : p.f(i - mi);
    const double s = (b < 0.0) ? -1.0 : 1.0;
    sign(i) = s;
    t.body.block(i, 0, 1, n) = s * row.transpose();
    t.body.block(i, n, 1, n) = -s * row.transpose();
    if (is_ineq) t.body(i, 2 * n + i) = s;
    t.body(i, 2 * n + mi + i) = 1.0;
    t.body(i, cols) = s * b;
    t.row_id[static_cast<size_t>(i)] = static_cast<int>(i);
  }

  // Start from slacks where the row allows it, artificials otherwise.
  bool need_phase1 = false;
  for (Index i = 0; i < m; ++i) {
    if (i < mi && sign(i) > 0.0) {
      t.basis[static_cast<size_t>(i)] = static_cast<int>(2 * n + i);
    } else {
      t.basis[static_cast<size_t>(i)] = static_cast<int>(2 * n + mi + i);
      need_phase1 = true;
    }
  }

  std::vector<bool> allowed(static_cast<size_t>(cols), true);
  for (Index j = 2 * n + mi; j < cols; ++j) allowed[static_cast<size_t>(j)] = false;

  const int max_iter = 200 + 60 * static_cast<int>(m + cols);
  LpSolution sol;
  sol.iterations = 0;

  // Multipliers enter the Lagrangian as c + G'lambda + E'mu = 0 with
  // lambda >= 0. They fall out of the reduced costs of the artificial probe
  // columns; `shift` is the artificial's own cost in the active phase.
  auto extract_duals = [&](const Eigen::RowVectorXd& rc, double shift) {
    sol.ineq_dual.setZero(mi);
    sol.eq_dual.setZero(me);
    for (Index live = 0; live < t.body.rows(); ++live) {
      const int orig = t.row_id[static_cast<size_t>(live)];
      const double dual = sign(orig) * (rc(2 * n + mi + orig) - shift);
      if (orig < mi) {
        sol.ineq_dual(orig) = dual;
      } else {
        sol.eq_dual(orig - mi) = dual;
      }
    }
  };

  if (need_phase1) {
    Vector phase1_costs = Vector::Zero(cols);
    for (Index j = 2 * n + mi; j < cols; ++j) phase1_costs(j) = 1.0;
    t.obj = reduced_costs(t, phase1_costs);
    if (!run_phase(t, allowed, max_iter, &sol.iterations)) {
      throw NumericalFailure("solve_lp: phase 1 unbounded");
    }
    const double violation = -t.obj(t.num_cols);  // obj row carries -objective
    sol.infeasibility = std::max(violation, 0.0);
    if (sol.infeasibility > feas_tol) {
      sol.status = LpStatus::Infeasible;
      extract_duals(reduced_costs(t, phase1_costs), 1.0);
      sol.z.setZero(n);
      for (Index i = 0; i < t.body.rows(); ++i) {
        const int b = t.basis[static_cast<size_t>(i)];
        if (b < n) sol.z(b) += t.rhs(i);
        else if (b < 2 * n) sol.z(b - n) -= t.rhs(i);
      }
      sol.value = sol.infeasibility;
      return sol;
    }
    // Drive any remaining artificial out of the basis; rows that cannot be
    // pivoted are linearly dependent and get dropped.
    for (Index i = t.body.rows() - 1; i >= 0; --i) {
      if (t.basis[static_cast<size_t>(i)] < 2 * n + mi) continue;
      int col = -1;
      for (Index j = 0; j < 2 * n + mi; ++j) {
        if (std::abs(t.body(i, j)) > kPivotTol) {
          col = static_cast<int>(j);
          break;
        }
      }
      if (col >= 0) {
        pivot(t, static_cast<int>(i), col);
      } else {
        const Index last = t.body.rows() - 1;
        if (i != last) {
          t.body.row(i) = t.body.row(last);
          t.basis[static_cast<size_t>(i)] = t.basis[static_cast<size_t>(last)];
          t.row_id[static_cast<size_t>(i)] = t.row_id[static_cast<size_t>(last)];
        }
        t.body.conservativeResize(last, Eigen::NoChange);
        t.basis.pop_back();
        t.row_id.pop_back();
      }
    }
  }

  Vector phase2_costs = Vector::Zero(cols);
  phase2_costs.head(n) = p.c;
  phase2_costs.segment(n, n) = -p.c;
  t.obj = reduced_costs(t, phase2_costs);
  if (!run_phase(t, allowed, max_iter, &sol.iterations)) {
    sol.status = LpStatus::Unbounded;
    sol.z.setZero(n);
    sol.value = -std::numeric_limits<double>::infinity();
    return sol;
  }

  sol.status = LpStatus::Optimal;
  sol.z.setZero(n);
  for (Index i = 0; i < t.body.rows(); ++i) {
    const int b = t.basis[static_cast<size_t>(i)];
    if (b < n) sol.z(b) += t.rhs(i);
    else if (b < 2 * n) sol.z(b - n) -= t.rhs(i);
  }
  sol.value = p.c.dot(sol.z);
  extract_duals(reduced_costs(t, phase2_costs), 0.0);
  return sol;
}

}  // namespace setmpc
