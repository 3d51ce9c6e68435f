#include "setmpc/qp.hpp"

#include <random>

#include <doctest.h>

#include "oracles.hpp"
#include "setmpc/errors.hpp"

using namespace setmpc;

namespace {

QpProblem scalar_problem() {
  // min (z - 1)^2 s.t. z <= 0.
  QpProblem p;
  p.H = Matrix::Constant(1, 1, 2.0);
  p.g = Vector::Constant(1, -2.0);
  p.c0 = 1.0;
  p.G = Matrix::Constant(1, 1, 1.0);
  p.h = Vector::Zero(1);
  p.E = Matrix(0, 1);
  p.f = Vector(0);
  return p;
}

QpProblem random_box_qp(std::mt19937& rng, Index n, Index extra_rows) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  Matrix M(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) M(i, j) = coef(rng);
  QpProblem p;
  p.H = M.transpose() * M + 0.5 * Matrix::Identity(n, n);
  p.g = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) p.g(i) = coef(rng);
  p.G = Matrix::Zero(2 * n + extra_rows, n);
  p.h = Vector::Zero(2 * n + extra_rows);
  for (Index i = 0; i < n; ++i) {
    p.G(2 * i, i) = 1.0;
    p.h(2 * i) = 0.3 + std::abs(coef(rng));
    p.G(2 * i + 1, i) = -1.0;
    p.h(2 * i + 1) = 0.3 + std::abs(coef(rng));
  }
  for (Index r = 2 * n; r < p.G.rows(); ++r) {
    Vector dir(n);
    for (Index j = 0; j < n; ++j) dir(j) = coef(rng);
    if (dir.norm() < 1e-3) dir(0) = 1.0;
    dir.normalize();
    p.G.row(r) = dir.transpose();
    p.h(r) = 0.2 + std::abs(coef(rng));
  }
  p.E = Matrix(0, n);
  p.f = Vector(0);
  return p;
}

}  // namespace

TEST_CASE("clipped unconstrained minimum") {
  const QpSolution sol = solve_qp(scalar_problem());
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(sol.z(0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(sol.value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(sol.kkt_residual <= 1e-7);
}

TEST_CASE("symmetric equality projection") {
  // min |z|^2 s.t. z1 + z2 = 2 -> (1, 1), value 2.
  QpProblem p;
  p.H = 2.0 * Matrix::Identity(2, 2);
  p.g = Vector::Zero(2);
  p.G = Matrix(0, 2);
  p.h = Vector(0);
  p.E = Matrix(1, 2);
  p.E << 1, 1;
  p.f = Vector::Constant(1, 2.0);
  const QpSolution sol = solve_qp(p);
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(sol.z(0) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sol.z(1) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(sol.value == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("random strictly convex QPs match the exhaustive oracle") {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const QpProblem p = random_box_qp(rng, 4, 2);
    const QpSolution sol = solve_qp(p);
    const auto oracle = oracles::qp_exhaustive_active_set(p.H, p.g, p.G, p.h);
    REQUIRE(sol.status == QpStatus::Optimal);
    REQUIRE(oracle.feasible);
    CHECK(sol.value == doctest::Approx(oracle.value + p.c0).epsilon(1e-6));
    CHECK((sol.z - oracle.z).lpNorm<Eigen::Infinity>() <= 1e-5);
    CHECK(sol.kkt_residual <= 1e-7);
  }
}

TEST_CASE("six-variable instances agree with the oracle") {
  std::mt19937 rng(57);
  for (int trial = 0; trial < 10; ++trial) {
    const QpProblem p = random_box_qp(rng, 6, 0);
    const QpSolution sol = solve_qp(p);
    const auto oracle = oracles::qp_exhaustive_active_set(p.H, p.g, p.G, p.h);
    REQUIRE(sol.status == QpStatus::Optimal);
    CHECK(sol.value == doctest::Approx(oracle.value).epsilon(1e-6));
  }
}

TEST_CASE("infeasible problems return a certificate") {
  QpProblem p = scalar_problem();
  p.G = Matrix(2, 1);
  p.G << 1, -1;
  p.h = Vector(2);
  p.h << 0, -1;  // z <= 0 and z >= 1
  const QpSolution sol = solve_qp(p);
  REQUIRE(sol.status == QpStatus::Infeasible);
  const Vector combo = p.G.transpose() * sol.ineq_dual;
  CHECK(combo.lpNorm<Eigen::Infinity>() <= 1e-8);
  CHECK(sol.ineq_dual.minCoeff() >= -1e-9);
  CHECK(p.h.dot(sol.ineq_dual) < -1e-7);
}

TEST_CASE("feasibility monotonicity under redundant rows") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 15; ++trial) {
    QpProblem p = random_box_qp(rng, 3, 1);
    const QpSolution base = solve_qp(p);
    REQUIRE(base.status == QpStatus::Optimal);
    // Append a row strictly dominated by an existing one.
    const Index rows = p.G.rows();
    p.G.conservativeResize(rows + 1, Eigen::NoChange);
    p.h.conservativeResize(rows + 1);
    p.G.row(rows) = p.G.row(0);
    p.h(rows) = p.h(0) + 1.0;
    const QpSolution again = solve_qp(p);
    REQUIRE(again.status == QpStatus::Optimal);
    CHECK(std::abs(again.value - base.value) <= 1e-7);
  }
}

TEST_CASE("scaling invariance of the minimizer") {
  std::mt19937 rng(13);
  for (int trial = 0; trial < 15; ++trial) {
    QpProblem p = random_box_qp(rng, 3, 2);
    const QpSolution base = solve_qp(p);
    REQUIRE(base.status == QpStatus::Optimal);
    const double s = 7.5;
    QpProblem scaled = p;
    scaled.H *= s;
    scaled.g *= s;
    scaled.c0 *= s;
    const QpSolution sol = solve_qp(scaled);
    REQUIRE(sol.status == QpStatus::Optimal);
    CHECK((sol.z - base.z).lpNorm<Eigen::Infinity>() <= 1e-7);
    CHECK(sol.value == doctest::Approx(s * base.value).epsilon(1e-7));
  }
}

TEST_CASE("kkt verification flags perturbed minimizers") {
  std::mt19937 rng(97);
  QpProblem p = random_box_qp(rng, 3, 0);
  QpSolution sol = solve_qp(p);
  REQUIRE(sol.status == QpStatus::Optimal);
  CHECK(verify_kkt(p, sol).max_residual() <= 1e-7);

  // Perturb the minimizer along a free direction: stationarity degrades.
  QpSolution bad = sol;
  Vector dir = Vector::Zero(3);
  dir(0) = 1.0;
  bad.z = sol.z + 1e-3 * dir;
  CHECK(verify_kkt(p, bad).stationarity > 1e-5);
}

TEST_CASE("equality-only problems match the direct KKT solve") {
  // Oracle: closed-form solution of the KKT linear system.
  QpProblem p;
  p.H = Matrix(3, 3);
  p.H << 4, 1, 0, 1, 3, 0, 0, 0, 2;
  p.g = Vector(3);
  p.g << -1, 0.5, 1;
  p.G = Matrix(0, 3);
  p.h = Vector(0);
  p.E = Matrix(1, 3);
  p.E << 1, 1, 1;
  p.f = Vector::Constant(1, 1.0);
  const QpSolution sol = solve_qp(p);
  REQUIRE(sol.status == QpStatus::Optimal);

  Matrix K(4, 4);
  K.setZero();
  K.topLeftCorner(3, 3) = p.H;
  K.topRightCorner(3, 1) = p.E.transpose();
  K.bottomLeftCorner(1, 3) = p.E;
  Vector rhs(4);
  rhs.head(3) = -p.g;
  rhs(3) = p.f(0);
  const Vector direct = K.fullPivLu().solve(rhs);
  CHECK((sol.z - direct.head(3)).lpNorm<Eigen::Infinity>() <= 1e-10);
  CHECK(verify_kkt(p, sol).max_residual() <= 1e-10);
}

TEST_CASE("warm starts reproduce the cold solution") {
  std::mt19937 rng(71);
  const QpProblem p = random_box_qp(rng, 4, 2);
  const QpSolution cold = solve_qp(p);
  REQUIRE(cold.status == QpStatus::Optimal);
  QpOptions opts;
  opts.warm_active = cold.active_set;
  const QpSolution warm = solve_qp(p, opts);
  REQUIRE(warm.status == QpStatus::Optimal);
  CHECK((warm.z - cold.z).lpNorm<Eigen::Infinity>() <= 1e-8);
  CHECK(warm.iterations <= cold.iterations);
}

TEST_CASE("validation rejects malformed problems") {
  QpProblem p = scalar_problem();
  p.H = Matrix::Constant(1, 1, -1.0);  // not PSD
  CHECK_THROWS_AS(solve_qp(p), NumericalFailure);

  QpProblem q = scalar_problem();
  q.layout.slices = {{"u", 0, 2}};  // does not partition a 1-dim vector
  CHECK_THROWS_AS(solve_qp(q), DimensionMismatch);
}
