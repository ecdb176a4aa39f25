#pragma once

#include "sfopt/core.hpp"

namespace sfopt {

/// One-sample gradient observation (eta / beta) * cost.
struct GradSample {
  Vector g_hat;
};

/// One-sample Hessian observation; exactly symmetric.
struct HessSample {
  Matrix h_hat;
};

/// Both estimators consume the same single cost evaluation
/// h(theta + beta * eta, X) taken at one iteration.
GradSample sf_gradient_sample(const PerturbationVector& p, double beta, double cost);

/// Diagonal: (eta_i^2 - 1) cost / beta^2.  Off-diagonal: eta_i eta_j cost / beta^2.
HessSample sf_hessian_sample(const PerturbationVector& p, double beta, double cost);

}  // namespace sfopt
