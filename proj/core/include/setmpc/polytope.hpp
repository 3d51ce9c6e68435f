#pragma once

#include <utility>
#include <vector>

#include "setmpc/linprog.hpp"
#include "setmpc/types.hpp"

namespace setmpc {

/// Convex polytope in halfspace representation {z : G z <= h}. Facet normals
/// are kept at unit Euclidean norm; the empty set is representable and
/// propagates through the set algebra instead of erroring.
class Polytope {
 public:
  /// Normalizes every row to unit norm; rows with zero normals are rejected.
  Polytope(Matrix G, Vector h);

  static Polytope box(const Vector& lower, const Vector& upper);
  static Polytope empty_set(Index dim);
  /// {point}, encoded as paired rows +/- e_i z <= +/- p_i.
  static Polytope singleton(const Vector& point);

  Index dim() const { return dim_; }
  Index num_rows() const { return G_.rows(); }
  const Matrix& G() const { return G_; }
  const Vector& h() const { return h_; }
  bool is_empty() const { return empty_; }

  /// LP feasibility (phase-1) check; marks nothing, just answers.
  bool feasible(double feas_tol = 1e-9) const;

  /// Throws NumericalFailure when some axis direction is unbounded.
  void assert_bounded() const;

 private:
  Polytope() = default;
  Matrix G_;
  Vector h_;
  Index dim_ = 0;
  bool empty_ = false;

  friend Polytope make_polytope_unchecked(Matrix G, Vector h, Index dim, bool empty);
};

/// Internal constructor that skips normalization (rows already unit norm).
Polytope make_polytope_unchecked(Matrix G, Vector h, Index dim, bool empty);

/// max_i (G_i z - h_i) <= tol. The empty set contains nothing.
bool contains(const Polytope& p, const Vector& z, double tol = 1e-7);

/// Support-LP subset test: every facet of q bounds p within tol.
bool is_subset(const Polytope& p, const Polytope& q, double tol = 1e-7);

/// max { dir'z : z in p }; +infinity when unbounded in that direction.
double support(const Polytope& p, const Vector& direction, double feas_tol = 1e-9);

/// Rows of p and q stacked (same space).
Polytope intersect(const Polytope& p, const Polytope& q);

/// Cartesian product (block-diagonal stacking of constraints).
Polytope product(const Polytope& p, const Polytope& q);

/// Exact orthogonal projection onto the listed coordinates (0-based, strictly
/// increasing) via Fourier-Motzkin elimination; redundancy is pruned after
/// each eliminated variable.
Polytope project(const Polytope& p, const std::vector<Index>& keep, double feas_tol = 1e-9);

/// Irredundant description of the same set: no remaining row can be deleted
/// without enlarging the set.
Polytope remove_redundancy(const Polytope& p, double feas_tol = 1e-9);

/// Largest inscribed ball; radius 0 for flat nonempty sets.
std::pair<Vector, double> chebyshev_center(const Polytope& p);

/// Counter-clockwise vertex cycle of a bounded 2D polytope.
std::vector<Vector> vertices_2d(const Polytope& p, double tol = 1e-7);

/// Axis-aligned bounding box via support LPs.
std::pair<Vector, Vector> bounding_box(const Polytope& p);

}  // namespace setmpc
