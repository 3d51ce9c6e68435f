#pragma once

// Shared fixtures: the two example systems the test and acceptance suites
// exercise, plus the decoupled-input variant of the double integrator.

#include "setmpc/controllers.hpp"
#include "setmpc/reachability.hpp"

namespace setmpc::testing {

inline LinearSystem double_integrator() {
  Matrix A(2, 2), B(2, 2);
  A << 1, 1, 0, 1;
  B << 0, 0.5, 1, 0.5;
  Vector xlo(2), xhi(2), ulo(2), uhi(2);
  xlo << -5, -1;
  xhi << 5, 1;
  ulo << -0.05, -0.05;
  uhi << 0.05, 0.05;
  return LinearSystem(A, B, Polytope::box(xlo, xhi), Polytope::box(ulo, uhi));
}

// Same plant with the second input decoupled from x2 (B(2,2) = 0); the x2
// rate cap drops from 0.075 to 0.05 per step and the ladder deepens.
inline LinearSystem double_integrator_decoupled() {
  Matrix A(2, 2), B(2, 2);
  A << 1, 1, 0, 1;
  B << 0, 0.5, 1, 0;
  Vector xlo(2), xhi(2), ulo(2), uhi(2);
  xlo << -5, -1;
  xhi << 5, 1;
  ulo << -0.05, -0.05;
  uhi << 0.05, 0.05;
  return LinearSystem(A, B, Polytope::box(xlo, xhi), Polytope::box(ulo, uhi));
}

inline LinearSystem harmonic_oscillator() {
  Matrix A(2, 2), B(2, 1);
  A << 1.2775, -1.3499, 1, 0;
  B << 0, 1;
  Vector xlo(2), xhi(2), ulo(1), uhi(1);
  xlo << -5, -5;
  xhi << 5, 5;
  ulo << -1;
  uhi << 1;
  return LinearSystem(A, B, Polytope::box(xlo, xhi), Polytope::box(ulo, uhi));
}

inline ControllerConfig integrator_weights(ControllerFlavor flavor, int horizon) {
  ControllerConfig cfg;
  cfg.horizon = horizon;
  cfg.Q = 0.5 * Matrix::Identity(2, 2);
  cfg.R = 2.0 * Matrix::Identity(2, 2);
  cfg.T = 100.0 * Matrix::Identity(2, 2);
  cfg.flavor = flavor;
  return cfg;
}

inline ControllerConfig oscillator_weights(ControllerFlavor flavor, int horizon) {
  ControllerConfig cfg;
  cfg.horizon = horizon;
  cfg.Q = Matrix::Identity(2, 2);
  cfg.R = 10.0 * Matrix::Identity(1, 1);
  cfg.T = 100.0 * Matrix::Identity(2, 2);
  cfg.flavor = flavor;
  return cfg;
}

}  // namespace setmpc::testing
