#pragma once

#include <string>
#include <vector>

#include "setmpc/polytope.hpp"
#include "setmpc/types.hpp"

namespace setmpc {

/// Discrete-time linear system x(i+1) = A x(i) + B u(i) with polytopic state
/// and input constraint sets. Construction validates controllability of
/// (A, B) and that X and U are bounded and nonempty.
struct LinearSystem {
  Matrix A;
  Matrix B;
  Polytope X;
  Polytope U;

  LinearSystem(Matrix A_in, Matrix B_in, Polytope X_in, Polytope U_in);

  Index state_dim() const { return A.rows(); }
  Index input_dim() const { return B.cols(); }
};

/// Steady states and inputs: Zs = {(x,u) in X x U : (A - I)x + B u = 0} with
/// the equality encoded as paired inequality rows at eq_tol slack; Xs and Us
/// are its coordinate projections.
struct EquilibriumSet {
  Polytope Zs;
  Polytope Xs;
  Polytope Us;
};

EquilibriumSet equilibrium_set(const LinearSystem& sys, const Tolerances& tols = {});

/// Input set of a control invariant candidate:
/// Psi(Omega) = proj_u {(x,u) in Omega x U : A x + B u in Omega}.
Polytope input_set(const Polytope& omega, const LinearSystem& sys, const Tolerances& tols = {});

/// One-step controllable set to omega under inputs from psi:
/// S_1 = proj_x {(x,u) : x in X, u in psi, A x + B u in omega}.
Polytope one_step_set(const Polytope& omega, const Polytope& psi, const LinearSystem& sys,
                      const Tolerances& tols = {});

/// Controller operating mode: tracking inside S_N, or crossing layer k >= 1.
class Mode {
 public:
  static Mode tracking() { return Mode(0); }
  static Mode layer(int k);

  bool is_tracking() const { return k_ == 0; }
  int layer_index() const { return k_; }
  bool operator==(const Mode& other) const { return k_ == other.k_; }

  std::string to_string() const;

 private:
  explicit Mode(int k) : k_(k) {}
  int k_ = 0;
};

/// Ladder of N-step controllable sets to the equilibrium set:
/// rungs[k] = S_{kN}(Xs, U), with rungs[0] = Xs, together with the cached
/// input sets psi[k] = Psi(S_{kN}) and the equilibrium data.
struct SetLadder {
  LinearSystem system;
  int horizon = 0;
  double convergence_tol = 1e-6;
  std::vector<Polytope> rungs;
  std::vector<Polytope> psi;
  Polytope Zs;
  Polytope Us;
  bool converged = false;
  int k_star = -1;

  /// Largest computed rung; equals S_infinity once converged.
  const Polytope& domain() const { return rungs.back(); }
  /// S_N, the tracking region (rungs[0] when the ladder is a fixed point).
  const Polytope& tracking_set() const { return rungs.size() > 1 ? rungs[1] : rungs[0]; }
};

/// Iterates N-fold one-step extensions from Xs until two consecutive rungs
/// coincide within tol (mutual containment) or max_rungs rungs are stored.
/// Non-convergence is reported through the flag, never an exception.
SetLadder build_ladder(const LinearSystem& sys, int horizon, int max_rungs, double tol,
                       const Tolerances& tols = {});

/// Resolves the mode of a state: Tracking inside S_N, otherwise the smallest
/// k >= 1 with x in S_{(k+1)N}. Inner sets are tested first so boundary
/// points resolve to the smaller index.
Mode layer_of(const Vector& x, const SetLadder& ladder, double tol = 1e-7);

/// Result of the sufficient contractivity condition: every facet of S_{N+1}
/// not shared with the domain boundary must bound S_N with margin eps.
struct ContractivityReport {
  bool passed = false;
  double eps = 0.0;
  double min_margin = 0.0;  ///< over checked facets: offset minus support of S_N
  int facets_checked = 0;
  int facets_shared = 0;
  std::vector<Index> failing_facets;
  Polytope s_n_plus_1 = Polytope::empty_set(1);
};

/// Checks S_N inside the interior of S_{N+1} relative to the computed domain,
/// with S_{N+1} obtained by one further one-step extension of S_N. A negative
/// report means the sufficient condition failed, not that S_N is provably
/// non-contractive.
ContractivityReport check_contractive(const SetLadder& ladder, double eps,
                                      const Tolerances& tols = {});

}  // namespace setmpc
