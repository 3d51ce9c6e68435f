#include "setmpc/reachability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "setmpc/errors.hpp"

namespace setmpc {

namespace {

std::vector<Index> index_range(Index begin, Index end) {
  std::vector<Index> out(static_cast<size_t>(end - begin));
  std::iota(out.begin(), out.end(), begin);
  return out;
}

// Rows encoding M z <= tol and -M z <= tol, skipping all-zero rows of M.
void append_equality_rows(const Matrix& M, double slack, Matrix& G, Vector& h) {
  const Index base = G.rows();
  Index extra = 0;
  for (Index i = 0; i < M.rows(); ++i) {
    if (M.row(i).norm() > 1e-12) extra += 2;
  }
  G.conservativeResize(base + extra, Eigen::NoChange);
  h.conservativeResize(base + extra);
  Index r = base;
  for (Index i = 0; i < M.rows(); ++i) {
    if (M.row(i).norm() <= 1e-12) continue;
    G.row(r) = M.row(i);
    h(r) = slack;
    ++r;
    G.row(r) = -M.row(i);
    h(r) = slack;
    ++r;
  }
}

}  // namespace

LinearSystem::LinearSystem(Matrix A_in, Matrix B_in, Polytope X_in, Polytope U_in)
    : A(std::move(A_in)), B(std::move(B_in)), X(std::move(X_in)), U(std::move(U_in)) {
  const Index n = A.rows();
  const Index m = B.cols();
  if (A.cols() != n) throw DimensionMismatch("LinearSystem: A must be square");
  if (B.rows() != n) throw DimensionMismatch("LinearSystem: B row count must match A");
  if (X.dim() != n) throw DimensionMismatch("LinearSystem: X dimension mismatch");
  if (U.dim() != m) throw DimensionMismatch("LinearSystem: U dimension mismatch");

  Matrix ctrb(n, n * m);
  Matrix Ak = Matrix::Identity(n, n);
  for (Index k = 0; k < n; ++k) {
    ctrb.block(0, k * m, n, m) = Ak * B;
    Ak = A * Ak;
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(ctrb);
  cod.setThreshold(1e-10);
  if (cod.rank() < n) throw NumericalFailure("LinearSystem: (A, B) is not controllable");

  X.assert_bounded();
  U.assert_bounded();
  if (!X.feasible()) throw EmptySetError("LinearSystem: X is empty");
  if (!U.feasible()) throw EmptySetError("LinearSystem: U is empty");
}

EquilibriumSet equilibrium_set(const LinearSystem& sys, const Tolerances& tols) {
  const Index n = sys.state_dim();
  const Index m = sys.input_dim();
  const Polytope xu = product(sys.X, sys.U);
  Matrix G = xu.G();
  Vector h = xu.h();
  Matrix steady(n, n + m);
  steady.leftCols(n) = sys.A - Matrix::Identity(n, n);
  steady.rightCols(m) = sys.B;
  append_equality_rows(steady, tols.eq_tol, G, h);
  Polytope Zs(std::move(G), std::move(h));
  if (!Zs.feasible(tols.feas_tol)) {
    throw EmptySetError("equilibrium_set: no steady state inside X x U");
  }
  EquilibriumSet eq{Zs, project(Zs, index_range(0, n), tols.feas_tol),
                    project(Zs, index_range(n, n + m), tols.feas_tol)};
  return eq;
}

Polytope input_set(const Polytope& omega, const LinearSystem& sys, const Tolerances& tols) {
  if (omega.is_empty()) return Polytope::empty_set(sys.input_dim());
  if (omega.dim() != sys.state_dim()) throw DimensionMismatch("input_set: omega dimension");
  const Index n = sys.state_dim();
  const Index m = sys.input_dim();
  // Lifted variables (x, u): x in omega, u in U, A x + B u in omega.
  Polytope lifted = product(omega, sys.U);
  Matrix G = lifted.G();
  Vector h = lifted.h();
  const Index base = G.rows();
  G.conservativeResize(base + omega.num_rows(), Eigen::NoChange);
  h.conservativeResize(base + omega.num_rows());
  G.block(base, 0, omega.num_rows(), n) = omega.G() * sys.A;
  G.block(base, n, omega.num_rows(), m) = omega.G() * sys.B;
  h.tail(omega.num_rows()) = omega.h();
  Polytope joint(std::move(G), std::move(h));
  if (!joint.feasible(tols.feas_tol)) return Polytope::empty_set(m);
  return project(joint, index_range(n, n + m), tols.feas_tol);
}

Polytope one_step_set(const Polytope& omega, const Polytope& psi, const LinearSystem& sys,
                      const Tolerances& tols) {
  const Index n = sys.state_dim();
  const Index m = sys.input_dim();
  if (omega.is_empty() || psi.is_empty()) return Polytope::empty_set(n);
  if (omega.dim() != n) throw DimensionMismatch("one_step_set: omega dimension");
  if (psi.dim() != m) throw DimensionMismatch("one_step_set: psi dimension");
  Polytope lifted = product(sys.X, psi);
  Matrix G = lifted.G();
  Vector h = lifted.h();
  const Index base = G.rows();
  G.conservativeResize(base + omega.num_rows(), Eigen::NoChange);
  h.conservativeResize(base + omega.num_rows());
  G.block(base, 0, omega.num_rows(), n) = omega.G() * sys.A;
  G.block(base, n, omega.num_rows(), m) = omega.G() * sys.B;
  h.tail(omega.num_rows()) = omega.h();
  Polytope joint(std::move(G), std::move(h));
  if (!joint.feasible(tols.feas_tol)) return Polytope::empty_set(n);
  return project(joint, index_range(0, n), tols.feas_tol);
}

Mode Mode::layer(int k) {
  if (k < 1) throw DimensionMismatch("Mode::layer: k must be >= 1");
  return Mode(k);
}

std::string Mode::to_string() const {
  return is_tracking() ? "tracking" : ("layer(" + std::to_string(k_) + ")");
}

SetLadder build_ladder(const LinearSystem& sys, int horizon, int max_rungs, double tol,
                       const Tolerances& tols) {
  if (horizon < 1) throw DimensionMismatch("build_ladder: horizon must be >= 1");
  if (max_rungs < 1) throw DimensionMismatch("build_ladder: max_rungs must be >= 1");
  EquilibriumSet eq = equilibrium_set(sys, tols);

  SetLadder ladder{sys, horizon, tol, {}, {}, eq.Zs, eq.Us, false, -1};
  ladder.rungs.push_back(remove_redundancy(eq.Xs, tols.feas_tol));

  while (static_cast<int>(ladder.rungs.size()) < max_rungs) {
    Polytope next = ladder.rungs.back();
    for (int step = 0; step < horizon; ++step) {
      next = one_step_set(next, sys.U, sys, tols);
    }
    const Polytope& last = ladder.rungs.back();
    if (is_subset(next, last, tol) && is_subset(last, next, tol)) {
      ladder.converged = true;
      ladder.k_star = static_cast<int>(ladder.rungs.size()) - 1;
      break;
    }
    ladder.rungs.push_back(std::move(next));
  }

  ladder.psi.reserve(ladder.rungs.size());
  for (const Polytope& rung : ladder.rungs) {
    ladder.psi.push_back(input_set(rung, sys, tols));
  }
  return ladder;
}

Mode layer_of(const Vector& x, const SetLadder& ladder, double tol) {
  if (x.size() != ladder.system.state_dim()) throw DimensionMismatch("layer_of: state dimension");
  if (!contains(ladder.domain(), x, tol)) {
    throw OutsideDomain("layer_of: state outside the computed controllable domain");
  }
  if (contains(ladder.tracking_set(), x, tol)) return Mode::tracking();
  // The loop reaches the domain rung itself, so the domain check above
  // guarantees a hit.
  for (size_t k = 1; k + 1 < ladder.rungs.size(); ++k) {
    if (contains(ladder.rungs[k + 1], x, tol)) return Mode::layer(static_cast<int>(k));
  }
  throw NumericalFailure("layer_of: inconsistent ladder membership");
}

ContractivityReport check_contractive(const SetLadder& ladder, double eps,
                                      const Tolerances& tols) {
  ContractivityReport report;
  report.eps = eps;
  const Polytope& s_n = ladder.tracking_set();
  const Polytope& domain = ladder.domain();
  report.s_n_plus_1 = one_step_set(s_n, ladder.system.U, ladder.system, tols);
  const Polytope& next = report.s_n_plus_1;

  bool all_ok = true;
  double min_margin = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < next.num_rows(); ++i) {
    // Facets lying on the domain boundary are exempt: interior is taken
    // relative to the maximal controllable set. The facet's halfplane
    // supports the domain exactly when the domain's support along its normal
    // does not exceed the facet offset.
    const double domain_support = support(domain, next.G().row(i).transpose(), tols.feas_tol);
    if (domain_support <= next.h()(i) + tols.set_tol) {
      ++report.facets_shared;
      continue;
    }
    ++report.facets_checked;
    const double margin = next.h()(i) - support(s_n, next.G().row(i).transpose());
    min_margin = std::min(min_margin, margin);
    if (margin < eps) {
      all_ok = false;
      report.failing_facets.push_back(i);
    }
  }
  report.min_margin = report.facets_checked > 0 ? min_margin : 0.0;
  report.passed = all_ok;
  return report;
}

}  // namespace setmpc
