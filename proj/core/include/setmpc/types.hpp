#pragma once

#include <Eigen/Dense>

namespace setmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Numeric tolerances shared across the toolkit.
struct Tolerances {
  double feas_tol = 1e-9;  ///< LP feasibility and dual certificates
  double set_tol = 1e-7;   ///< set membership and subset decisions
  double eq_tol = 1e-9;    ///< slack when equalities are encoded as paired rows
  double qp_tol = 1e-7;    ///< KKT residual acceptance for QP solutions
};

}  // namespace setmpc
