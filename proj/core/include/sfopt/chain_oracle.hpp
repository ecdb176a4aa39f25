#pragma once

#include "sfopt/core.hpp"

namespace sfopt {

/// A finite Markov chain whose transition matrix and per-state costs depend
/// differentiably on a parameter vector theta.
class ChainModel {
 public:
  virtual ~ChainModel() = default;

  virtual int n_states() const = 0;
  virtual int dim() const = 0;

  /// Row-stochastic N x N matrix P_theta.
  virtual Matrix transition(const Vector& theta) const = 0;
  /// Per-state cost vector h_theta.
  virtual Vector cost(const Vector& theta) const = 0;
  /// dP_theta / dtheta_k; every row sums to zero.
  virtual Matrix dtransition(const Vector& theta, int k) const = 0;
  /// dh_theta / dtheta_k.
  virtual Vector dcost(const Vector& theta, int k) const = 0;
};

struct ChainAnalytics {
  Vector pi;
  Matrix fundamental;  // (I - P + 1 pi^T)^-1
  double J = 0.0;
  Vector gradJ;
  Matrix hessJ;
};

/// Power iteration on P^T from a non-uniform start. Throws NoConvergence if
/// the iteration does not settle within max_sweeps (periodic chains) or if
/// the limit is not the unique stationary distribution (reducible chains).
Vector stationary_distribution(const Matrix& P, long max_sweeps = 1'000'000);

/// Dense LU inverse of I - P + 1 pi^T. Throws SingularMatrix.
Matrix fundamental_matrix(const Matrix& P, const Vector& pi);

double average_cost(const ChainModel& model, const Vector& theta);

/// grad J = pi^T (dP) Z h + pi^T dh, evaluated for every coordinate.
Vector grad_J(const ChainModel& model, const Vector& theta);

/// Central differences of grad_J with step `delta`, before symmetrization.
Matrix hess_J_raw(const ChainModel& model, const Vector& theta, double delta = 1e-4);

/// Symmetrized (A + A^T) / 2 of hess_J_raw.
Matrix hess_J(const ChainModel& model, const Vector& theta, double delta = 1e-4);

/// Everything at once; `with_hessian` toggles the 2d extra gradient solves.
ChainAnalytics analyze(const ChainModel& model, const Vector& theta, bool with_hessian = true);

/// Inverse-CDF draw from row `state` of P.
int sample_next_state(Rng& rng, const Matrix& P, int state);

/// Inverse-CDF draw from an explicit probability row.
int sample_from_row(Rng& rng, const Eigen::Ref<const Vector>& row);

}  // namespace sfopt
