#include "setmpc/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "setmpc/errors.hpp"

namespace setmpc {

namespace {

constexpr double kZeroNormalTol = 1e-12;

// Drops exact and near duplicates (same normal within tol, keep tightest rhs)
// before any LP-based pruning runs.
void dedupe_rows(Matrix& G, Vector& h, double tol = 1e-12) {
  const Index m = G.rows();
  std::vector<bool> keep(static_cast<size_t>(m), true);
  for (Index i = 0; i < m; ++i) {
    if (!keep[static_cast<size_t>(i)]) continue;
    for (Index j = i + 1; j < m; ++j) {
      if (!keep[static_cast<size_t>(j)]) continue;
      if ((G.row(i) - G.row(j)).lpNorm<Eigen::Infinity>() < tol) {
        if (h(j) < h(i)) {
          G.row(i) = G.row(j);
          h(i) = h(j);
        }
        keep[static_cast<size_t>(j)] = false;
      }
    }
  }
  Index count = 0;
  for (Index i = 0; i < m; ++i) {
    if (keep[static_cast<size_t>(i)]) {
      G.row(count) = G.row(i);
      h(count) = h(i);
      ++count;
    }
  }
  G.conservativeResize(count, Eigen::NoChange);
  h.conservativeResize(count);
}

}  // namespace

Polytope make_polytope_unchecked(Matrix G, Vector h, Index dim, bool empty) {
  Polytope p;
  p.G_ = std::move(G);
  p.h_ = std::move(h);
  p.dim_ = dim;
  p.empty_ = empty;
  return p;
}

Polytope::Polytope(Matrix G, Vector h) {
  if (G.rows() != h.size()) throw DimensionMismatch("Polytope: G rows and h length differ");
  if (G.cols() < 1) throw DimensionMismatch("Polytope: dimension must be positive");
  if (!G.allFinite() || !h.allFinite()) throw NumericalFailure("Polytope: non-finite data");
  dim_ = G.cols();
  for (Index i = 0; i < G.rows(); ++i) {
    const double norm = G.row(i).norm();
    if (norm < kZeroNormalTol) throw DimensionMismatch("Polytope: zero-norm facet normal");
    G.row(i) /= norm;
    h(i) /= norm;
  }
  G_ = std::move(G);
  h_ = std::move(h);
}

Polytope Polytope::box(const Vector& lower, const Vector& upper) {
  const Index d = lower.size();
  if (upper.size() != d) throw DimensionMismatch("Polytope::box: bound lengths differ");
  Matrix G = Matrix::Zero(2 * d, d);
  Vector h(2 * d);
  for (Index i = 0; i < d; ++i) {
    G(2 * i, i) = 1.0;
    h(2 * i) = upper(i);
    G(2 * i + 1, i) = -1.0;
    h(2 * i + 1) = -lower(i);
  }
  return Polytope(std::move(G), std::move(h));
}

Polytope Polytope::empty_set(Index dim) {
  return make_polytope_unchecked(Matrix(0, dim), Vector(0), dim, true);
}

Polytope Polytope::singleton(const Vector& point) {
  const Index d = point.size();
  Matrix G = Matrix::Zero(2 * d, d);
  Vector h(2 * d);
  for (Index i = 0; i < d; ++i) {
    G(2 * i, i) = 1.0;
    h(2 * i) = point(i);
    G(2 * i + 1, i) = -1.0;
    h(2 * i + 1) = -point(i);
  }
  return Polytope(std::move(G), std::move(h));
}

bool Polytope::feasible(double feas_tol) const {
  if (empty_) return false;
  if (G_.rows() == 0) return true;
  LpProblem p = LpProblem::inequality_form(Vector::Zero(dim_), G_, h_);
  return solve_lp(p, feas_tol).status != LpStatus::Infeasible;
}

void Polytope::assert_bounded() const {
  if (empty_) return;
  for (Index i = 0; i < dim_; ++i) {
    for (double s : {1.0, -1.0}) {
      Vector dir = Vector::Zero(dim_);
      dir(i) = s;
      if (!std::isfinite(support(*this, dir))) {
        throw NumericalFailure("Polytope: unbounded along axis " + std::to_string(i));
      }
    }
  }
}

bool contains(const Polytope& p, const Vector& z, double tol) {
  if (z.size() != p.dim()) throw DimensionMismatch("contains: point dimension mismatch");
  if (p.is_empty()) return false;
  if (p.num_rows() == 0) return true;
  return ((p.G() * z - p.h()).maxCoeff() <= tol);
}

bool is_subset(const Polytope& p, const Polytope& q, double tol) {
  if (p.dim() != q.dim()) throw DimensionMismatch("is_subset: dimension mismatch");
  if (p.is_empty()) return true;
  if (q.is_empty()) return !p.feasible();
  for (Index i = 0; i < q.num_rows(); ++i) {
    const double s = support(p, q.G().row(i).transpose());
    if (s > q.h()(i) + tol) return false;
  }
  return true;
}

double support(const Polytope& p, const Vector& direction, double feas_tol) {
  if (direction.size() != p.dim()) throw DimensionMismatch("support: direction dimension mismatch");
  if (p.is_empty()) throw EmptySetError("support: empty polytope");
  LpProblem lp = LpProblem::inequality_form(-direction, p.G(), p.h());
  const LpSolution sol = solve_lp(lp, feas_tol);
  switch (sol.status) {
    case LpStatus::Optimal:
      return -sol.value;
    case LpStatus::Unbounded:
      return std::numeric_limits<double>::infinity();
    case LpStatus::Infeasible:
      throw EmptySetError("support: infeasible polytope");
  }
  throw NumericalFailure("support: unreachable");
}

Polytope intersect(const Polytope& p, const Polytope& q) {
  if (p.dim() != q.dim()) throw DimensionMismatch("intersect: dimension mismatch");
  if (p.is_empty() || q.is_empty()) return Polytope::empty_set(p.dim());
  Matrix G(p.num_rows() + q.num_rows(), p.dim());
  Vector h(G.rows());
  G << p.G(), q.G();
  h << p.h(), q.h();
  return make_polytope_unchecked(std::move(G), std::move(h), p.dim(), false);
}

Polytope product(const Polytope& p, const Polytope& q) {
  if (p.is_empty() || q.is_empty()) return Polytope::empty_set(p.dim() + q.dim());
  const Index d = p.dim() + q.dim();
  Matrix G = Matrix::Zero(p.num_rows() + q.num_rows(), d);
  Vector h(G.rows());
  G.topLeftCorner(p.num_rows(), p.dim()) = p.G();
  G.bottomRightCorner(q.num_rows(), q.dim()) = q.G();
  h << p.h(), q.h();
  return make_polytope_unchecked(std::move(G), std::move(h), d, false);
}

namespace {

// One Fourier-Motzkin step: eliminates column `col`, returning the reduced
// system over the remaining columns (caller tracks the column mapping).
void eliminate_column(Matrix& G, Vector& h, Index col) {
  const Index m = G.rows();
  const Index d = G.cols();
  std::vector<Index> pos, neg, zero;
  for (Index i = 0; i < m; ++i) {
    const double a = G(i, col);
    if (a > kZeroNormalTol) pos.push_back(i);
    else if (a < -kZeroNormalTol) neg.push_back(i);
    else zero.push_back(i);
  }
  const Index out_rows = static_cast<Index>(zero.size() + pos.size() * neg.size());
  Matrix Gn(out_rows, d - 1);
  Vector hn(out_rows);
  auto copy_without = [&](Index dst, const Eigen::RowVectorXd& row) {
    Index c = 0;
    for (Index j = 0; j < d; ++j) {
      if (j == col) continue;
      Gn(dst, c++) = row(j);
    }
  };
  Index r = 0;
  for (Index i : zero) {
    copy_without(r, G.row(i));
    hn(r) = h(i);
    ++r;
  }
  for (Index i : pos) {
    for (Index j : neg) {
      const Eigen::RowVectorXd combo = G.row(i) / G(i, col) - G.row(j) / G(j, col);
      copy_without(r, combo);
      hn(r) = h(i) / G(i, col) - h(j) / G(j, col);
      ++r;
    }
  }
  G = std::move(Gn);
  h = std::move(hn);
}

// Normalizes raw rows in place; returns false when a contradictory zero row
// (0'z <= negative) proves the set empty. Trivial zero rows are dropped.
bool normalize_rows(Matrix& G, Vector& h) {
  Index count = 0;
  for (Index i = 0; i < G.rows(); ++i) {
    const double norm = G.row(i).norm();
    if (norm < kZeroNormalTol) {
      if (h(i) < -1e-9) return false;
      continue;
    }
    G.row(count) = G.row(i) / norm;
    h(count) = h(i) / norm;
    ++count;
  }
  G.conservativeResize(count, Eigen::NoChange);
  h.conservativeResize(count);
  return true;
}

// LP-based sequential pruning on already-normalized rows. Returns false when
// the system turns out infeasible.
bool prune_redundant(Matrix& G, Vector& h, double feas_tol) {
  dedupe_rows(G, h);
  Index m = G.rows();
  if (m == 0) return true;
  std::vector<bool> keep(static_cast<size_t>(m), true);
  for (Index i = 0; i < m; ++i) {
    // Solve max g_i z subject to the other kept rows; bound row i itself at
    // h_i + 1 so the LP stays bounded when the row is the only cap.
    Index rows = 0;
    for (Index k = 0; k < m; ++k)
      if (keep[static_cast<size_t>(k)]) ++rows;
    Matrix Gi(rows, G.cols());
    Vector hi(rows);
    Index r = 0;
    for (Index k = 0; k < m; ++k) {
      if (!keep[static_cast<size_t>(k)]) continue;
      Gi.row(r) = G.row(k);
      hi(r) = (k == i) ? h(i) + 1.0 : h(k);
      ++r;
    }
    LpProblem lp = LpProblem::inequality_form(-G.row(i).transpose(), Gi, hi);
    const LpSolution sol = solve_lp(lp, feas_tol);
    if (sol.status == LpStatus::Infeasible) return false;
    if (sol.status == LpStatus::Optimal && -sol.value <= h(i) + 1e-9) {
      keep[static_cast<size_t>(i)] = false;
    }
  }
  Index count = 0;
  for (Index i = 0; i < m; ++i) {
    if (keep[static_cast<size_t>(i)]) {
      G.row(count) = G.row(i);
      h(count) = h(i);
      ++count;
    }
  }
  G.conservativeResize(count, Eigen::NoChange);
  h.conservativeResize(count);
  return true;
}

}  // namespace

Polytope project(const Polytope& p, const std::vector<Index>& keep, double feas_tol) {
  if (p.is_empty()) throw EmptySetError("project: empty polytope");
  if (keep.empty()) throw DimensionMismatch("project: keep set must be nonempty");
  for (size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] < 0 || keep[i] >= p.dim()) throw DimensionMismatch("project: keep index out of range");
    if (i > 0 && keep[i] <= keep[i - 1]) throw DimensionMismatch("project: keep indices must strictly increase");
  }
  if (static_cast<Index>(keep.size()) == p.dim()) return p;
  if (!p.feasible(feas_tol)) throw EmptySetError("project: empty polytope");

  Matrix G = p.G();
  Vector h = p.h();
  std::vector<Index> live(static_cast<size_t>(p.dim()));
  std::iota(live.begin(), live.end(), Index{0});

  // Support of a direction over the exact projection equals its support over
  // the original lifted system, which keeps the pruning LPs small no matter
  // how many rows an elimination step fans out into.
  auto lifted_support = [&](const Eigen::RowVectorXd& row) {
    Vector dir = Vector::Zero(p.dim());
    for (Index c = 0; c < static_cast<Index>(live.size()); ++c) {
      dir(live[static_cast<size_t>(c)]) = row(c);
    }
    return support(p, dir, feas_tol);
  };

  while (static_cast<Index>(live.size()) > static_cast<Index>(keep.size())) {
    // Eliminate the droppable column with the smallest pos*neg fan-out.
    Index best_col = -1;
    long best_score = std::numeric_limits<long>::max();
    for (Index c = 0; c < static_cast<Index>(live.size()); ++c) {
      if (std::binary_search(keep.begin(), keep.end(), live[static_cast<size_t>(c)])) continue;
      long np = 0, nn = 0;
      for (Index i = 0; i < G.rows(); ++i) {
        if (G(i, c) > kZeroNormalTol) ++np;
        else if (G(i, c) < -kZeroNormalTol) ++nn;
      }
      const long score = np * nn - (np + nn);
      if (score < best_score) {
        best_score = score;
        best_col = c;
      }
    }
    eliminate_column(G, h, best_col);
    live.erase(live.begin() + best_col);
    if (!normalize_rows(G, h)) return Polytope::empty_set(static_cast<Index>(keep.size()));
    dedupe_rows(G, h);

    // A row whose support over the exact projection stays strictly below its
    // offset never binds; dropping it cannot enlarge the set.
    Index count = 0;
    for (Index i = 0; i < G.rows(); ++i) {
      if (lifted_support(G.row(i)) >= h(i) - 1e-9) {
        G.row(count) = G.row(i);
        h(count) = h(i);
        ++count;
      }
    }
    G.conservativeResize(count, Eigen::NoChange);
    h.conservativeResize(count);

    if (!prune_redundant(G, h, feas_tol)) {
      return Polytope::empty_set(static_cast<Index>(keep.size()));
    }
  }
  return make_polytope_unchecked(std::move(G), std::move(h), static_cast<Index>(keep.size()),
                                 false);
}

Polytope remove_redundancy(const Polytope& p, double feas_tol) {
  if (p.is_empty()) throw EmptySetError("remove_redundancy: empty polytope");
  Matrix G = p.G();
  Vector h = p.h();
  if (!prune_redundant(G, h, feas_tol)) throw EmptySetError("remove_redundancy: empty polytope");
  return make_polytope_unchecked(std::move(G), std::move(h), p.dim(), false);
}

std::pair<Vector, double> chebyshev_center(const Polytope& p) {
  if (p.is_empty()) throw EmptySetError("chebyshev_center: empty polytope");
  const Index d = p.dim();
  const Index m = p.num_rows();
  // Variables (z, r): maximize r subject to G z + r <= h (unit normals).
  Matrix G(m, d + 1);
  G.leftCols(d) = p.G();
  G.col(d).setOnes();
  Vector c = Vector::Zero(d + 1);
  c(d) = -1.0;
  LpProblem lp = LpProblem::inequality_form(std::move(c), std::move(G), p.h());
  const LpSolution sol = solve_lp(lp);
  if (sol.status == LpStatus::Infeasible) throw EmptySetError("chebyshev_center: empty polytope");
  if (sol.status == LpStatus::Unbounded) throw NumericalFailure("chebyshev_center: unbounded polytope");
  return {sol.z.head(d), std::max(sol.z(d), 0.0)};
}

std::vector<Vector> vertices_2d(const Polytope& p, double tol) {
  if (p.dim() != 2) throw DimensionMismatch("vertices_2d: requires dimension 2");
  if (p.is_empty()) throw EmptySetError("vertices_2d: empty polytope");
  p.assert_bounded();
  const Polytope q = remove_redundancy(p);
  std::vector<Vector> raw;
  for (Index i = 0; i < q.num_rows(); ++i) {
    for (Index j = i + 1; j < q.num_rows(); ++j) {
      const double det = q.G()(i, 0) * q.G()(j, 1) - q.G()(i, 1) * q.G()(j, 0);
      if (std::abs(det) < 1e-10) continue;
      Vector v(2);
      v(0) = (q.h()(i) * q.G()(j, 1) - q.h()(j) * q.G()(i, 1)) / det;
      v(1) = (q.G()(i, 0) * q.h()(j) - q.G()(j, 0) * q.h()(i)) / det;
      if (contains(q, v, tol)) raw.push_back(std::move(v));
    }
  }
  if (raw.empty()) {
    // Flat or a single point; fall back to the center.
    raw.push_back(chebyshev_center(q).first);
  }
  // Dedupe, then order counter-clockwise around the centroid.
  std::vector<Vector> verts;
  for (const Vector& v : raw) {
    bool dup = false;
    for (const Vector& w : verts) {
      if ((v - w).lpNorm<Eigen::Infinity>() < tol) {
        dup = true;
        break;
      }
    }
    if (!dup) verts.push_back(v);
  }
  Vector centroid = Vector::Zero(2);
  for (const Vector& v : verts) centroid += v;
  centroid /= static_cast<double>(verts.size());
  std::sort(verts.begin(), verts.end(), [&](const Vector& a, const Vector& b) {
    return std::atan2(a(1) - centroid(1), a(0) - centroid(0)) <
           std::atan2(b(1) - centroid(1), b(0) - centroid(0));
  });
  return verts;
}

std::pair<Vector, Vector> bounding_box(const Polytope& p) {
  if (p.is_empty()) throw EmptySetError("bounding_box: empty polytope");
  Vector lo(p.dim()), hi(p.dim());
  for (Index i = 0; i < p.dim(); ++i) {
    Vector dir = Vector::Zero(p.dim());
    dir(i) = 1.0;
    hi(i) = support(p, dir);
    dir(i) = -1.0;
    lo(i) = -support(p, dir);
    if (!std::isfinite(lo(i)) || !std::isfinite(hi(i))) {
      throw NumericalFailure("bounding_box: unbounded polytope");
    }
  }
  return {lo, hi};
}

}  // namespace setmpc
