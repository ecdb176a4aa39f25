#include "sfopt/chain_oracle.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "sfopt/error.hpp"

namespace sfopt {

Vector stationary_distribution(const Matrix& P, long max_sweeps) {
  const auto n = P.rows();
  if (n == 0 || P.cols() != n) {
    throw Error(ErrorKind::DimensionMismatch, "transition matrix must be square and non-empty");
  }
  // Non-uniform start so that periodic chains oscillate instead of sitting
  // on a symmetric fixed point.
  Vector pi = Vector::LinSpaced(n, 1.0, static_cast<double>(n));
  pi /= pi.sum();

  const double tol = 64.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(n);
  const Matrix Pt = P.transpose();
  bool converged = false;
  for (long sweep = 0; sweep < max_sweeps; ++sweep) {
    Vector next = Pt * pi;
    next /= next.sum();
    const double change = (next - pi).cwiseAbs().maxCoeff();
    pi = std::move(next);
    if (change <= tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw Error(ErrorKind::NoConvergence,
                fmt::format("power iteration did not settle in {} sweeps", max_sweeps));
  }

  // A reducible chain converges to *a* stationary vector; uniqueness is
  // equivalent to I - P + 1 pi^T being nonsingular.
  const Matrix A = Matrix::Identity(n, n) - P + Vector::Ones(n) * pi.transpose();
  Eigen::FullPivLU<Matrix> lu(A);
  if (lu.rank() < n) {
    throw Error(ErrorKind::NoConvergence,
                "chain has more than one stationary distribution");
  }
  return pi;
}

Matrix fundamental_matrix(const Matrix& P, const Vector& pi) {
  const auto n = P.rows();
  if (P.cols() != n || pi.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "fundamental_matrix: size mismatch");
  }
  const Matrix A = Matrix::Identity(n, n) - P + Vector::Ones(n) * pi.transpose();
  Eigen::FullPivLU<Matrix> lu(A);
  if (!lu.isInvertible()) {
    throw Error(ErrorKind::SingularMatrix, "I - P + 1 pi^T is singular");
  }
  Matrix Z = lu.inverse();
  const double residual = (Z * A - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
  if (!(residual <= 1e-8)) {
    throw Error(ErrorKind::SingularMatrix,
                fmt::format("fundamental matrix residual {}", residual));
  }
  return Z;
}

double average_cost(const ChainModel& model, const Vector& theta) {
  const Vector pi = stationary_distribution(model.transition(theta));
  return pi.dot(model.cost(theta));
}

namespace {

Vector grad_from(const ChainModel& model, const Vector& theta, const Vector& pi,
                 const Matrix& Z, const Vector& h) {
  const int d = model.dim();
  const Vector Zh = Z * h;
  Vector g(d);
  for (int k = 0; k < d; ++k) {
    g[k] = pi.dot(model.dtransition(theta, k) * Zh) + pi.dot(model.dcost(theta, k));
  }
  return g;
}

}  // namespace

Vector grad_J(const ChainModel& model, const Vector& theta) {
  const Matrix P = model.transition(theta);
  const Vector pi = stationary_distribution(P);
  const Matrix Z = fundamental_matrix(P, pi);
  return grad_from(model, theta, pi, Z, model.cost(theta));
}

Matrix hess_J_raw(const ChainModel& model, const Vector& theta, double delta) {
  const int d = model.dim();
  Matrix A(d, d);
  for (int k = 0; k < d; ++k) {
    Vector plus = theta;
    Vector minus = theta;
    plus[k] += delta;
    minus[k] -= delta;
    A.col(k) = (grad_J(model, plus) - grad_J(model, minus)) / (2.0 * delta);
  }
  return A;
}

Matrix hess_J(const ChainModel& model, const Vector& theta, double delta) {
  const Matrix A = hess_J_raw(model, theta, delta);
  return 0.5 * (A + A.transpose());
}

ChainAnalytics analyze(const ChainModel& model, const Vector& theta, bool with_hessian) {
  ChainAnalytics out;
  const Matrix P = model.transition(theta);
  const Vector h = model.cost(theta);
  out.pi = stationary_distribution(P);
  out.fundamental = fundamental_matrix(P, out.pi);
  out.J = out.pi.dot(h);
  out.gradJ = grad_from(model, theta, out.pi, out.fundamental, h);
  if (with_hessian) out.hessJ = hess_J(model, theta);
  return out;
}

int sample_from_row(Rng& rng, const Eigen::Ref<const Vector>& row) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  int last_positive = 0;
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (row[j] <= 0.0) continue;
    cumulative += row[j];
    last_positive = static_cast<int>(j);
    if (u < cumulative) return static_cast<int>(j);
  }
  // u landed in the rounding gap above the accumulated row sum.
  return last_positive;
}

int sample_next_state(Rng& rng, const Matrix& P, int state) {
  if (state < 0 || state >= P.rows()) {
    throw Error(ErrorKind::DimensionMismatch, fmt::format("state {} out of range", state));
  }
  return sample_from_row(rng, P.row(state).transpose());
}

}  // namespace sfopt
