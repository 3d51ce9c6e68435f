#include "setmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "setmpc/errors.hpp"
#include "setmpc/linprog.hpp"

namespace setmpc {

namespace {

constexpr double kRidge = 1e-12;
constexpr double kPsdFloor = 1e-10;
constexpr double kDirTol = 1e-12;

struct EqpResult {
  Vector z;
  Vector multipliers;  // one per working-set row (equalities first)
};

// Equality-constrained subproblem min 0.5 y'(H + ridge I)y + g'y s.t. A y = b
// solved through the ridged KKT system by complete orthogonal decomposition,
// which tolerates rank-deficient working sets.
EqpResult solve_eqp(const Matrix& H, const Vector& g, const Matrix& A, const Vector& b) {
  const Index n = g.size();
  const Index w = A.rows();
  Matrix K = Matrix::Zero(n + w, n + w);
  K.topLeftCorner(n, n) = H + kRidge * Matrix::Identity(n, n);
  if (w > 0) {
    K.topRightCorner(n, w) = A.transpose();
    K.bottomLeftCorner(w, n) = A;
  }
  Vector rhs(n + w);
  rhs.head(n) = -g;
  rhs.tail(w) = b;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(K);
  const Vector sol = cod.solve(rhs);
  return {sol.head(n), sol.tail(w)};
}

void validate(const QpProblem& p) {
  const Index n = p.dim();
  if (n < 1) throw DimensionMismatch("solve_qp: empty decision vector");
  if (p.H.rows() != n || p.H.cols() != n) throw DimensionMismatch("solve_qp: H shape");
  if (p.G.rows() != p.h.size() || (p.G.rows() > 0 && p.G.cols() != n)) {
    throw DimensionMismatch("solve_qp: inequality block shape");
  }
  if (p.E.rows() != p.f.size() || (p.E.rows() > 0 && p.E.cols() != n)) {
    throw DimensionMismatch("solve_qp: equality block shape");
  }
  if ((p.H - p.H.transpose()).lpNorm<Eigen::Infinity>() > 1e-8) {
    throw NumericalFailure("solve_qp: H is not symmetric");
  }
  Eigen::LLT<Matrix> llt(p.H + kPsdFloor * Matrix::Identity(n, n));
  if (llt.info() != Eigen::Success) {
    throw NumericalFailure("solve_qp: H is not positive semidefinite");
  }
  if (!p.layout.slices.empty() && !p.layout.partitions(n)) {
    throw DimensionMismatch("solve_qp: layout does not partition the decision vector");
  }
}

}  // namespace

Index VariableLayout::total() const {
  Index t = 0;
  for (const auto& s : slices) t += s.size;
  return t;
}

const VariableSlice& VariableLayout::slice(const std::string& name) const {
  for (const auto& s : slices) {
    if (s.name == name) return s;
  }
  throw DimensionMismatch("VariableLayout: unknown slice '" + name + "'");
}

bool VariableLayout::partitions(Index dim) const {
  Index expected = 0;
  for (const auto& s : slices) {
    if (s.offset != expected || s.size < 0) return false;
    expected += s.size;
  }
  return expected == dim;
}

double KktReport::max_residual() const {
  return std::max({stationarity, primal_ineq, primal_eq, dual_feasibility, complementarity});
}

KktReport verify_kkt(const QpProblem& p, const QpSolution& sol) {
  KktReport r;
  const Vector grad = p.H * sol.z + p.g;
  Vector station = grad;
  if (p.G.rows() > 0) station += p.G.transpose() * sol.ineq_dual;
  if (p.E.rows() > 0) station += p.E.transpose() * sol.eq_dual;
  r.stationarity = station.lpNorm<Eigen::Infinity>();
  if (p.G.rows() > 0) {
    const Vector slack = p.G * sol.z - p.h;
    r.primal_ineq = std::max(slack.maxCoeff(), 0.0);
    r.dual_feasibility = std::max(-sol.ineq_dual.minCoeff(), 0.0);
    // Relative complementarity: large multipliers on barely-active rows must
    // not mask an otherwise tight solution.
    double comp = 0.0;
    for (Index i = 0; i < p.G.rows(); ++i) {
      comp = std::max(comp, std::abs(sol.ineq_dual(i) * slack(i)) /
                                (1.0 + std::abs(sol.ineq_dual(i))));
    }
    r.complementarity = comp;
  }
  if (p.E.rows() > 0) {
    r.primal_eq = (p.E * sol.z - p.f).lpNorm<Eigen::Infinity>();
  }
  return r;
}

QpSolution solve_qp(const QpProblem& p, const QpOptions& opts) {
  validate(p);
  const Index n = p.dim();
  const Index mi = p.G.rows();
  const Index me = p.E.rows();

  QpSolution sol;
  Vector z;
  std::vector<Index> working;

  auto assemble_working = [&](const std::vector<Index>& w, Matrix& A, Vector& b) {
    A.resize(me + static_cast<Index>(w.size()), n);
    b.resize(A.rows());
    if (me > 0) {
      A.topRows(me) = p.E;
      b.head(me) = p.f;
    }
    for (size_t k = 0; k < w.size(); ++k) {
      A.row(me + static_cast<Index>(k)) = p.G.row(w[k]);
      b(me + static_cast<Index>(k)) = p.h(w[k]);
    }
  };

  auto max_violation = [&](const Vector& y) {
    double v = 0.0;
    if (mi > 0) v = std::max(v, (p.G * y - p.h).maxCoeff());
    if (me > 0) v = std::max(v, (p.E * y - p.f).lpNorm<Eigen::Infinity>());
    return v;
  };

  // Warm start: previous active set, accepted only when its EQP point is
  // feasible for the new data.
  bool started = false;
  if (!opts.warm_active.empty()) {
    std::vector<Index> w;
    for (Index i : opts.warm_active) {
      if (i >= 0 && i < mi && std::find(w.begin(), w.end(), i) == w.end()) w.push_back(i);
    }
    std::sort(w.begin(), w.end());
    Matrix A;
    Vector b;
    assemble_working(w, A, b);
    const EqpResult eqp = solve_eqp(p.H, p.g, A, b);
    if (max_violation(eqp.z) <= opts.qp_tol) {
      z = eqp.z;
      working = std::move(w);
      started = true;
    }
  }
  if (!started) {
    LpProblem feas;
    feas.c = Vector::Zero(n);
    feas.G = p.G;
    feas.h = p.h;
    feas.E = p.E;
    feas.f = p.f;
    const LpSolution lp = solve_lp(feas, 1e-9);
    if (lp.status == LpStatus::Infeasible && lp.infeasibility > opts.qp_tol) {
      sol.status = QpStatus::Infeasible;
      sol.z = lp.z;
      sol.ineq_dual = lp.ineq_dual;
      sol.eq_dual = lp.eq_dual;
      sol.value = std::numeric_limits<double>::infinity();
      return sol;
    }
    z = lp.z;
    working.clear();
  }

  // Relax constraints to exact consistency at the start point. The shifts are
  // bounded by qp_tol; without them an epsilon-infeasible problem makes the
  // working-set systems inconsistent and the loop can cycle.
  Vector h_work = p.h;
  Vector f_work = p.f;
  if (mi > 0) h_work = p.h.cwiseMax(p.G * z);
  if (me > 0) f_work = p.E * z;

  auto assemble_shifted = [&](const std::vector<Index>& w, Matrix& A, Vector& b) {
    assemble_working(w, A, b);
    if (me > 0) b.head(me) = f_work;
    for (size_t k = 0; k < w.size(); ++k) b(me + static_cast<Index>(k)) = h_work(w[k]);
  };

  int iterations = 0;
  while (true) {
    if (++iterations > opts.max_iterations) {
      throw MaxIterationsError("solve_qp: iteration cap reached");
    }
    Matrix A;
    Vector b;
    assemble_shifted(working, A, b);
    const EqpResult eqp = solve_eqp(p.H, p.g, A, b);
    const Vector step = eqp.z - z;

    if (step.lpNorm<Eigen::Infinity>() <= 1e-10 * (1.0 + z.lpNorm<Eigen::Infinity>())) {
      // Stationary on the working set; check multiplier signs.
      double worst = -1e-9;
      int drop = -1;
      for (size_t k = 0; k < working.size(); ++k) {
        const double lambda = eqp.multipliers(me + static_cast<Index>(k));
        if (lambda < worst) {
          worst = lambda;
          drop = static_cast<int>(k);
        }
      }
      if (drop < 0) {
        sol.status = QpStatus::Optimal;
        sol.z = eqp.z;
        sol.ineq_dual.setZero(mi);
        for (size_t k = 0; k < working.size(); ++k) {
          sol.ineq_dual(working[k]) = std::max(eqp.multipliers(me + static_cast<Index>(k)), 0.0);
        }
        sol.eq_dual = me > 0 ? Vector(eqp.multipliers.head(me)) : Vector(0);
        sol.value = 0.5 * sol.z.dot(p.H * sol.z) + p.g.dot(sol.z) + p.c0;
        sol.iterations = iterations;
        sol.active_set = working;
        sol.kkt_residual = verify_kkt(p, sol).max_residual();
        return sol;
      }
      working.erase(working.begin() + drop);
      continue;
    }

    // Ratio test against the inactive rows; ties break to the lowest index.
    double alpha = 1.0;
    int blocker = -1;
    for (Index i = 0; i < mi; ++i) {
      if (std::find(working.begin(), working.end(), i) != working.end()) continue;
      const double d = p.G.row(i).dot(step);
      if (d > kDirTol) {
        const double room = std::max(h_work(i) - p.G.row(i).dot(z), 0.0);
        const double a = room / d;
        if (a < alpha - 1e-15) {
          alpha = a;
          blocker = static_cast<int>(i);
        }
      }
    }
    z += alpha * step;
    if (blocker >= 0) {
      working.push_back(blocker);
      std::sort(working.begin(), working.end());
    }
  }
}

}  // namespace setmpc
