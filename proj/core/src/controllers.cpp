#include "setmpc/controllers.hpp"

#include <algorithm>
#include <cmath>

#include "setmpc/errors.hpp"

namespace setmpc {

namespace {

// Condensed prediction data: x_j = Apow[j] x0 + Phi[j] * u with u the stacked
// input sequence.
struct Prediction {
  std::vector<Matrix> Apow;
  std::vector<Matrix> Phi;
};

Prediction predict(const LinearSystem& sys, int N) {
  const Index n = sys.state_dim();
  const Index m = sys.input_dim();
  Prediction pred;
  pred.Apow.resize(static_cast<size_t>(N) + 1);
  pred.Phi.resize(static_cast<size_t>(N) + 1);
  pred.Apow[0] = Matrix::Identity(n, n);
  pred.Phi[0] = Matrix::Zero(n, N * m);
  for (int j = 0; j < N; ++j) {
    pred.Apow[j + 1] = sys.A * pred.Apow[j];
    pred.Phi[j + 1] = sys.A * pred.Phi[j];
    pred.Phi[j + 1].block(0, j * m, n, m) = sys.B;
  }
  return pred;
}

struct RowStack {
  Matrix G;
  Vector h;
  Index used = 0;

  RowStack(Index max_rows, Index dim) : G(Matrix::Zero(max_rows, dim)), h(Vector::Zero(max_rows)) {}

  void add(const Matrix& rows, const Vector& rhs) {
    G.block(used, 0, rows.rows(), rows.cols()) = rows;
    h.segment(used, rhs.size()) = rhs;
    used += rows.rows();
  }

  void finalize(QpProblem& qp) {
    qp.G = G.topRows(used);
    qp.h = h.head(used);
  }
};

// Stage and offset cost over decision (u, x_s[, u_s]) relative to the
// artificial equilibrium; shared by both tracking-style builders.
void tracking_cost(const Prediction& pred, const ControllerConfig& cfg, const Vector& x,
                   const Vector& x_star, const std::optional<Matrix>& W, Index dim,
                   QpProblem& qp) {
  const Index n = cfg.Q.rows();
  const Index m = cfg.R.rows();
  const int N = cfg.horizon;
  const Index xs_off = static_cast<Index>(N) * m;

  qp.H = Matrix::Zero(dim, dim);
  qp.g = Vector::Zero(dim);
  qp.c0 = 0.0;

  for (int j = 0; j < N; ++j) {
    Matrix D = Matrix::Zero(n, dim);
    D.leftCols(N * m) = pred.Phi[j];
    D.block(0, xs_off, n, n) = -Matrix::Identity(n, n);
    const Vector cst = pred.Apow[j] * x;
    qp.H += 2.0 * D.transpose() * cfg.Q * D;
    qp.g += 2.0 * D.transpose() * cfg.Q * cst;
    qp.c0 += cst.dot(cfg.Q * cst);

    Matrix Uj = Matrix::Zero(m, dim);
    Uj.block(0, j * m, m, m) = Matrix::Identity(m, m);
    if (W) {
      Uj.block(0, xs_off, m, n) = -(*W);
    } else {
      Uj.block(0, xs_off + n, m, m) = -Matrix::Identity(m, m);
    }
    qp.H += 2.0 * Uj.transpose() * cfg.R * Uj;
  }

  Matrix S = Matrix::Zero(n, dim);
  S.block(0, xs_off, n, n) = Matrix::Identity(n, n);
  qp.H += 2.0 * S.transpose() * cfg.T * S;
  qp.g -= 2.0 * S.transpose() * cfg.T * x_star;
  qp.c0 += x_star.dot(cfg.T * x_star);
}

// Shared path rows: u_j in U for all stages, x_j in X for j = 1..N-1. The
// initial state is data; when it violates X the problem is flagged infeasible
// through a contradictory constant row.
void path_rows(const Prediction& pred, const LinearSystem& sys, int N, const Vector& x,
               Index dim, double set_tol, RowStack& stack) {
  const Index m = sys.input_dim();
  for (int j = 0; j < N; ++j) {
    Matrix rows = Matrix::Zero(sys.U.num_rows(), dim);
    rows.block(0, j * m, sys.U.num_rows(), m) = sys.U.G();
    stack.add(rows, sys.U.h());
  }
  for (int j = 1; j < N; ++j) {
    Matrix rows = Matrix::Zero(sys.X.num_rows(), dim);
    rows.leftCols(N * m) = sys.X.G() * pred.Phi[j];
    stack.add(rows, sys.X.h() - sys.X.G() * pred.Apow[j] * x);
  }
  if (!contains(sys.X, x, set_tol)) {
    stack.add(Matrix::Zero(1, dim), Vector::Constant(1, -1.0));
  }
}

Vector steady_input_of(const LinearSystem& sys, const std::optional<Matrix>& W,
                       const Vector& x_s, const Vector& z, Index us_off) {
  if (W) return (*W) * x_s;
  return z.segment(us_off, sys.input_dim());
}

ControlStep run_step(const QpProblem& qp, Mode mode, const Vector& x, const LinearSystem& sys,
                     const ControllerConfig& cfg, const std::optional<Matrix>& W,
                     const std::vector<Index>& warm, const Tolerances& tols) {
  QpOptions opts;
  opts.qp_tol = tols.qp_tol;
  opts.warm_active = warm;
  const QpSolution sol = solve_qp(qp, opts);

  ControlStep step;
  step.mode = mode;
  step.qp_status = sol.status;
  if (sol.status != QpStatus::Optimal) return step;

  const Index n = sys.state_dim();
  const Index m = sys.input_dim();
  const int N = cfg.horizon;
  step.u0 = sol.z.head(m);
  step.optimal_cost = sol.value;
  step.active_set = sol.active_set;

  step.predicted_states.reserve(static_cast<size_t>(N) + 1);
  step.predicted_states.push_back(x);
  for (int j = 0; j < N; ++j) {
    const Vector uj = sol.z.segment(static_cast<Index>(j) * m, m);
    step.predicted_states.push_back(sys.A * step.predicted_states.back() + sys.B * uj);
  }

  const VariableSlice& xs = qp.layout.slice("x_s");
  step.artificial_setpoint = sol.z.segment(xs.offset, xs.size);

  bool layered_aux = false;
  for (const auto& s : qp.layout.slices) {
    if (s.name == "x_a") layered_aux = true;
  }
  if (layered_aux) {
    const VariableSlice& xa = qp.layout.slice("x_a");
    const VariableSlice& ua = qp.layout.slice("u_a");
    for (int j = 0; j < N; ++j) {
      step.aux_states.push_back(sol.z.segment(xa.offset + static_cast<Index>(j) * n, n));
      step.aux_inputs.push_back(sol.z.segment(ua.offset + static_cast<Index>(j) * m, m));
    }
  } else {
    const Vector u_s = steady_input_of(sys, W, step.artificial_setpoint, sol.z, xs.offset + n);
    for (int j = 0; j < N; ++j) {
      step.aux_states.push_back(step.artificial_setpoint);
      step.aux_inputs.push_back(u_s);
    }
  }
  return step;
}

}  // namespace

void ControllerConfig::validate(Index state_dim, Index input_dim) const {
  if (horizon < 1) throw DimensionMismatch("ControllerConfig: horizon must be >= 1");
  auto check_pd = [](const Matrix& M, Index d, const char* name) {
    if (M.rows() != d || M.cols() != d) {
      throw DimensionMismatch(std::string("ControllerConfig: ") + name + " shape");
    }
    Eigen::LLT<Matrix> llt(M);
    if (llt.info() != Eigen::Success) {
      throw NumericalFailure(std::string("ControllerConfig: ") + name +
                             " must be positive definite");
    }
  };
  check_pd(Q, state_dim, "Q");
  check_pd(R, input_dim, "R");
  check_pd(T, state_dim, "T");
}

std::optional<Matrix> steady_input_map(const LinearSystem& sys) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(sys.B);
  cod.setThreshold(1e-10);
  if (cod.rank() < sys.input_dim()) return std::nullopt;
  const Index n = sys.state_dim();
  return Matrix(-cod.pseudoInverse() * (sys.A - Matrix::Identity(n, n)));
}

QpProblem build_tracking_qp(const Vector& x, const Vector& x_star, const LinearSystem& sys,
                            const ControllerConfig& cfg, const Tolerances& tols) {
  const Index n = sys.state_dim();
  const Index m = sys.input_dim();
  if (x.size() != n) throw DimensionMismatch("build_tracking_qp: state dimension");
  if (x_star.size() != n) throw DimensionMismatch("build_tracking_qp: setpoint dimension");
  cfg.validate(n, m);
  const int N = cfg.horizon;
  const std::optional<Matrix> W = steady_input_map(sys);
  const Index dim = static_cast<Index>(N) * m + n + (W ? 0 : m);
  const Index xs_off = static_cast<Index>(N) * m;
  const Prediction pred = predict(sys, N);

  QpProblem qp;
  tracking_cost(pred, cfg, x, x_star, W, dim, qp);
  qp.layout.slices = {{"u", 0, static_cast<Index>(N) * m}, {"x_s", xs_off, n}};
  if (!W) qp.layout.slices.push_back({"u_s", xs_off + n, m});

  const Index max_rows = static_cast<Index>(N) * sys.U.num_rows() +
                         static_cast<Index>(N) * sys.X.num_rows() + sys.X.num_rows() +
                         sys.U.num_rows() + 1;
  RowStack stack(max_rows, dim);
  path_rows(pred, sys, N, x, dim, tols.set_tol, stack);

  // (x_s, u_s) admissible: x_s in X, u_s in U with u_s = W x_s when unique.
  {
    Matrix rows = Matrix::Zero(sys.X.num_rows(), dim);
    rows.block(0, xs_off, sys.X.num_rows(), n) = sys.X.G();
    stack.add(rows, sys.X.h());
  }
  {
    Matrix rows = Matrix::Zero(sys.U.num_rows(), dim);
    if (W) {
      rows.block(0, xs_off, sys.U.num_rows(), n) = sys.U.G() * (*W);
    } else {
      rows.block(0, xs_off + n, sys.U.num_rows(), m) = sys.U.G();
    }
    stack.add(rows, sys.U.h());
  }
  stack.finalize(qp);

  // Terminal equality x_N = x_s plus the steady-state conditions not already
  // absorbed by the input map: with u_s = W x_s the remaining requirement is
  // ((A - I) + B W) x_s = 0.
  Matrix steady_residual = Matrix(0, n);
  std::vector<Index> residual_rows;
  if (W) {
    steady_residual = (sys.A - Matrix::Identity(n, n)) + sys.B * (*W);
    for (Index i = 0; i < steady_residual.rows(); ++i) {
      if (steady_residual.row(i).norm() > 1e-12) residual_rows.push_back(i);
    }
  }
  const Index extra_eq = static_cast<Index>(residual_rows.size());
  const Index eq_rows = n + extra_eq + (W ? 0 : n);
  qp.E = Matrix::Zero(eq_rows, dim);
  qp.f = Vector::Zero(eq_rows);
  qp.E.topLeftCorner(n, static_cast<Index>(N) * m) = pred.Phi[N];
  qp.E.block(0, xs_off, n, n) = -Matrix::Identity(n, n);
  qp.f.head(n) = -pred.Apow[N] * x;
  Index r = n;
  for (Index i : residual_rows) {
    qp.E.block(r, xs_off, 1, n) = steady_residual.row(i);
    ++r;
  }
  if (!W) {
    // (A - I) x_s + B u_s = 0 with u_s free.
    qp.E.block(r, xs_off, n, n) = sys.A - Matrix::Identity(n, n);
    qp.E.block(r, xs_off + n, n, m) = sys.B;
  }
  return qp;
}

QpProblem build_layered_qp(const Vector& x, const Vector& x_star, const SetLadder& ladder,
                           const ControllerConfig& cfg, const Tolerances& tols) {
  const LinearSystem& sys = ladder.system;
  const Index n = sys.state_dim();
  const Index m = sys.input_dim();
  if (x.size() != n) throw DimensionMismatch("build_layered_qp: state dimension");
  if (x_star.size() != n) throw DimensionMismatch("build_layered_qp: setpoint dimension");
  cfg.validate(n, m);
  const Polytope& Xs = ladder.rungs.front();

  Vector target = x_star;
  if (!contains(Xs, target, 0.0)) {
    if (!contains(Xs, target, tols.set_tol)) {
      throw SetpointNotEquilibrium("build_layered_qp: setpoint outside equilibrium set");
    }
    // Within tolerance of the boundary: project onto the equilibrium set.
    QpProblem proj;
    proj.H = 2.0 * Matrix::Identity(n, n);
    proj.g = -2.0 * target;
    proj.c0 = target.squaredNorm();
    proj.G = Xs.G();
    proj.h = Xs.h();
    proj.E = Matrix(0, n);
    proj.f = Vector(0);
    const QpSolution psol = solve_qp(proj);
    if (psol.status != QpStatus::Optimal) {
      throw SetpointNotEquilibrium("build_layered_qp: setpoint projection failed");
    }
    target = psol.z;
  }

  const Mode mode = layer_of(x, ladder, tols.set_tol);
  const int N = cfg.horizon;
  const Prediction pred = predict(sys, N);

  if (mode.is_tracking()) {
    // Target set collapses to {x_s}: substitute the auxiliaries and solve over
    // (u, x_s[, u_s]). The equilibrium membership uses the ladder's computed
    // X_s rows.
    const std::optional<Matrix> W = steady_input_map(sys);
    const Index dim = static_cast<Index>(N) * m + n + (W ? 0 : m);
    const Index xs_off = static_cast<Index>(N) * m;

    QpProblem qp;
    tracking_cost(pred, cfg, x, target, W, dim, qp);
    qp.layout.slices = {{"u", 0, static_cast<Index>(N) * m}, {"x_s", xs_off, n}};
    if (!W) qp.layout.slices.push_back({"u_s", xs_off + n, m});

    const Index max_rows = static_cast<Index>(N) * sys.U.num_rows() +
                           static_cast<Index>(N) * sys.X.num_rows() + Xs.num_rows() +
                           sys.U.num_rows() + 1;
    RowStack stack(max_rows, dim);
    path_rows(pred, sys, N, x, dim, tols.set_tol, stack);
    {
      Matrix rows = Matrix::Zero(Xs.num_rows(), dim);
      rows.block(0, xs_off, Xs.num_rows(), n) = Xs.G();
      stack.add(rows, Xs.h());
    }
    {
      // The steady input attached to x_s must be admissible.
      Matrix rows = Matrix::Zero(sys.U.num_rows(), dim);
      if (W) {
        rows.block(0, xs_off, sys.U.num_rows(), n) = sys.U.G() * (*W);
      } else {
        rows.block(0, xs_off + n, sys.U.num_rows(), m) = sys.U.G();
      }
      stack.add(rows, sys.U.h());
    }
    stack.finalize(qp);

    const Index eq_rows = n + (W ? 0 : n);
    qp.E = Matrix::Zero(eq_rows, dim);
    qp.f = Vector::Zero(eq_rows);
    qp.E.topLeftCorner(n, static_cast<Index>(N) * m) = pred.Phi[N];
    qp.E.block(0, xs_off, n, n) = -Matrix::Identity(n, n);
    qp.f.head(n) = -pred.Apow[N] * x;
    if (!W) {
      qp.E.block(n, xs_off, n, n) = sys.A - Matrix::Identity(n, n);
      qp.E.block(n, xs_off + n, n, m) = sys.B;
    }
    return qp;
  }

  const int k = mode.layer_index();
  const Polytope& omega = ladder.rungs[static_cast<size_t>(k)];
  const Polytope& psi = ladder.psi[static_cast<size_t>(k)];
  if (omega.is_empty() || psi.is_empty()) {
    throw EmptySetError("build_layered_qp: degenerate target set");
  }

  const Index u_len = static_cast<Index>(N) * m;
  const Index xa_len = static_cast<Index>(N) * n;
  const Index dim = u_len + xa_len + u_len + n;
  const Index xa_off = u_len;
  const Index ua_off = u_len + xa_len;
  const Index xs_off = u_len + xa_len + u_len;

  QpProblem qp;
  qp.H = Matrix::Zero(dim, dim);
  qp.g = Vector::Zero(dim);
  qp.c0 = 0.0;
  for (int j = 0; j < N; ++j) {
    Matrix D = Matrix::Zero(n, dim);
    D.leftCols(u_len) = pred.Phi[j];
    D.block(0, xa_off + static_cast<Index>(j) * n, n, n) = -Matrix::Identity(n, n);
    const Vector cst = pred.Apow[j] * x;
    qp.H += 2.0 * D.transpose() * cfg.Q * D;
    qp.g += 2.0 * D.transpose() * cfg.Q * cst;
    qp.c0 += cst.dot(cfg.Q * cst);

    Matrix Uj = Matrix::Zero(m, dim);
    Uj.block(0, static_cast<Index>(j) * m, m, m) = Matrix::Identity(m, m);
    Uj.block(0, ua_off + static_cast<Index>(j) * m, m, m) = -Matrix::Identity(m, m);
    qp.H += 2.0 * Uj.transpose() * cfg.R * Uj;
  }
  Matrix S = Matrix::Zero(n, dim);
  S.block(0, xs_off, n, n) = Matrix::Identity(n, n);
  qp.H += 2.0 * S.transpose() * cfg.T * S;
  qp.g -= 2.0 * S.transpose() * cfg.T * target;
  qp.c0 += target.dot(cfg.T * target);

  qp.layout.slices = {{"u", 0, u_len},
                      {"x_a", xa_off, xa_len},
                      {"u_a", ua_off, u_len},
                      {"x_s", xs_off, n}};

  const Index max_rows = static_cast<Index>(N) * sys.U.num_rows() +
                         static_cast<Index>(N) * sys.X.num_rows() +
                         static_cast<Index>(N) * omega.num_rows() +
                         static_cast<Index>(N) * psi.num_rows() + omega.num_rows() +
                         Xs.num_rows() + 1;
  RowStack stack(max_rows, dim);
  path_rows(pred, sys, N, x, dim, tols.set_tol, stack);
  for (int j = 0; j < N; ++j) {
    Matrix rows = Matrix::Zero(omega.num_rows(), dim);
    rows.block(0, xa_off + static_cast<Index>(j) * n, omega.num_rows(), n) = omega.G();
    stack.add(rows, omega.h());
  }
  for (int j = 0; j < N; ++j) {
    Matrix rows = Matrix::Zero(psi.num_rows(), dim);
    rows.block(0, ua_off + static_cast<Index>(j) * m, psi.num_rows(), m) = psi.G();
    stack.add(rows, psi.h());
  }
  {
    // Terminal state in the target rung.
    Matrix rows = Matrix::Zero(omega.num_rows(), dim);
    rows.leftCols(u_len) = omega.G() * pred.Phi[N];
    stack.add(rows, omega.h() - omega.G() * pred.Apow[N] * x);
  }
  {
    Matrix rows = Matrix::Zero(Xs.num_rows(), dim);
    rows.block(0, xs_off, Xs.num_rows(), n) = Xs.G();
    stack.add(rows, Xs.h());
  }
  stack.finalize(qp);
  qp.E = Matrix(0, dim);
  qp.f = Vector(0);
  return qp;
}

ControlStep kappa_mpc(const Vector& x, const Vector& x_star, const SetLadder& ladder,
                      const ControllerConfig& cfg, const Tolerances& tols,
                      const std::vector<Index>& warm_active) {
  const LinearSystem& sys = ladder.system;
  const std::optional<Matrix> W = steady_input_map(sys);
  const Mode mode = layer_of(x, ladder, tols.set_tol);
  QpProblem qp;
  if (cfg.flavor == ControllerFlavor::Layered) {
    qp = build_layered_qp(x, x_star, ladder, cfg, tols);
  } else {
    qp = build_tracking_qp(x, x_star, sys, cfg, tols);
  }
  return run_step(qp, mode, x, sys, cfg, W, warm_active, tols);
}

double distance_to_set(const Vector& x, const Polytope& p, const Matrix& weight,
                       const Tolerances& tols) {
  if (p.is_empty()) throw EmptySetError("distance_to_set: empty polytope");
  if (x.size() != p.dim()) throw DimensionMismatch("distance_to_set: dimension mismatch");
  QpProblem qp;
  qp.H = 2.0 * weight;
  qp.g = -2.0 * weight * x;
  qp.c0 = x.dot(weight * x);
  qp.G = p.G();
  qp.h = p.h();
  qp.E = Matrix(0, x.size());
  qp.f = Vector(0);
  QpOptions opts;
  opts.qp_tol = tols.qp_tol;
  const QpSolution sol = solve_qp(qp, opts);
  if (sol.status != QpStatus::Optimal) throw EmptySetError("distance_to_set: empty polytope");
  return std::max(sol.value, 0.0);
}

Controller::Controller(const SetLadder& ladder, ControllerConfig cfg, Tolerances tols)
    : ladder_(ladder), cfg_(std::move(cfg)), tols_(tols) {
  cfg_.validate(ladder.system.state_dim(), ladder.system.input_dim());
}

void Controller::reset_warm_start() {
  warm_active_.clear();
  warm_layer_ = -1;
}

ControlStep Controller::step(const Vector& x, const Vector& x_star) {
  const Mode mode = layer_of(x, ladder_, tols_.set_tol);
  std::vector<Index> warm;
  if (mode.layer_index() == warm_layer_) warm = warm_active_;
  ControlStep result = kappa_mpc(x, x_star, ladder_, cfg_, tols_, warm);
  if (result.qp_status == QpStatus::Optimal) {
    warm_active_ = result.active_set;
    warm_layer_ = mode.layer_index();
  } else {
    reset_warm_start();
  }
  return result;
}

}  // namespace setmpc
