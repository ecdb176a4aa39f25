#include "sfopt/recursions.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "sfopt/chain_oracle.hpp"
#include "sfopt/error.hpp"

namespace sfopt {

Matrix hessian_track_step(const Matrix& H, const HessSample& h_hat, double b, bool diag_only) {
  if (diag_only) {
    const auto d = H.rows();
    Matrix out = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
      out(i, i) = (1.0 - b) * H(i, i) + b * h_hat.h_hat(i, i);
    }
    return out;
  }
  // Both operands are exactly symmetric and the update is entrywise, so the
  // result is too.
  return (1.0 - b) * H + b * h_hat.h_hat;
}

Vector gradient_track_step(const Vector& Z, const GradSample& g_hat, double c) {
  return (1.0 - c) * Z + c * g_hat.g_hat;
}

namespace {

bool is_diagonal(const Matrix& H) {
  for (Eigen::Index j = 0; j < H.cols(); ++j)
    for (Eigen::Index i = 0; i < H.rows(); ++i)
      if (i != j && H(i, j) != 0.0) return false;
  return true;
}

}  // namespace

PdMatrix project_pd(const Matrix& H, double eps) {
  if (!H.allFinite()) throw Error(ErrorKind::NonFinite, "project_pd: non-finite matrix");
  if (H.rows() != H.cols()) throw Error(ErrorKind::DimensionMismatch, "project_pd: not square");

  if (is_diagonal(H)) {
    PdMatrix out{H, 0.0};
    for (Eigen::Index i = 0; i < H.rows(); ++i) out.value(i, i) = std::max(H(i, i), eps);
    out.min_eigenvalue = out.value.diagonal().minCoeff();
    return out;
  }

  Eigen::SelfAdjointEigenSolver<Matrix> eig(H);
  if (eig.info() != Eigen::Success) {
    throw Error(ErrorKind::NonFinite, "project_pd: eigendecomposition failed");
  }
  const Vector& lambda = eig.eigenvalues();
  if (lambda.minCoeff() >= eps) return {H, lambda.minCoeff()};

  const Vector clipped = lambda.cwiseMax(eps);
  const Matrix& Q = eig.eigenvectors();
  Matrix value = Q * clipped.asDiagonal() * Q.transpose();
  value = 0.5 * (value + value.transpose()).eval();
  return {std::move(value), clipped.minCoeff()};
}

Vector newton_direction(const PdMatrix& Hpd, const Vector& Z) {
  Eigen::LLT<Matrix> llt(Hpd.value);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::SolveFailure, "newton_direction: matrix is not positive definite");
  }
  Vector d = llt.solve(Z);
  const double scale = std::max(Z.norm(), std::numeric_limits<double>::min());
  const double residual = (Hpd.value * d - Z).norm() / scale;
  if (!(residual <= 1e-8) && Z.norm() > 0.0) {
    throw Error(ErrorKind::SolveFailure, fmt::format("newton_direction: residual {}", residual));
  }
  return d;
}

Vector project_box(const Vector& x, const Vector& lower, const Vector& upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

OptimizerState initial_state(const ExperimentConfig& config, int d) {
  OptimizerState s;
  const Vector start = config.theta0.size() == d ? config.theta0 : Vector::Zero(d);
  s.theta = project_box(start, config.box_lower, config.box_upper);
  s.H = Matrix::Identity(d, d);
  s.Z = Vector::Zero(d);
  s.t = 0;
  return s;
}

namespace {

double parameter_step(const ExperimentConfig& config, std::uint64_t t) {
  return config.freeze_theta ? 0.0 : step_size(config.schedule, StepKind::A, t);
}

}  // namespace

OptimizerState nsf1_step(const OptimizerState& state, Env& env, const ExperimentConfig& config,
                         RunStreams& streams) {
  const auto d = static_cast<int>(state.theta.size());
  const std::uint64_t t = state.t;
  const double a = parameter_step(config, t);
  const double b = step_size(config.schedule, StepKind::B, t);
  const double c = step_size(config.schedule, StepKind::C, t);
  const bool diag_only = config.algorithm == Algorithm::NSF1_DIAG;

  const PerturbationVector p = sample_perturbation(streams.perturbation, d);
  const double cost = env.step(state.theta + config.beta * p.eta, streams.environment);

  OptimizerState next;
  next.t = t + 1;
  const Matrix tracked =
      hessian_track_step(state.H, sf_hessian_sample(p, config.beta, cost), b, diag_only);
  PdMatrix projected = project_pd(tracked, config.pd_floor);
  next.Z = gradient_track_step(state.Z, sf_gradient_sample(p, config.beta, cost), c);
  const Vector direction = newton_direction(projected, next.Z);
  next.theta = project_box(state.theta - a * direction, config.box_lower, config.box_upper);
  next.H = std::move(projected.value);
  return next;
}

OptimizerState gsf1_step(const OptimizerState& state, Env& env, const ExperimentConfig& config,
                         RunStreams& streams) {
  const auto d = static_cast<int>(state.theta.size());
  const std::uint64_t t = state.t;
  const double a = parameter_step(config, t);
  const double c = step_size(config.schedule, StepKind::C, t);

  const PerturbationVector p = sample_perturbation(streams.perturbation, d);
  const double cost = env.step(state.theta + config.beta * p.eta, streams.environment);

  OptimizerState next;
  next.t = t + 1;
  next.H = state.H;
  next.Z = gradient_track_step(state.Z, sf_gradient_sample(p, config.beta, cost), c);
  next.theta = project_box(state.theta - a * next.Z, config.box_lower, config.box_upper);
  return next;
}

OptimizerState algorithm_step(const OptimizerState& state, Env& env,
                              const ExperimentConfig& config, RunStreams& streams) {
  return config.algorithm == Algorithm::GSF1 ? gsf1_step(state, env, config, streams)
                                             : nsf1_step(state, env, config, streams);
}

double evaluate_average_cost(const Env& env, const Vector& theta, std::uint64_t warmup,
                             std::uint64_t window, Rng rng) {
  auto rollout = env.fresh();
  for (std::uint64_t i = 0; i < warmup; ++i) rollout->step(theta, rng);
  double sum = 0.0;
  for (std::uint64_t i = 0; i < window; ++i) sum += rollout->step(theta, rng);
  return window > 0 ? sum / static_cast<double>(window) : 0.0;
}

MetricRow measure(const OptimizerState& state, const Env& env, const ExperimentConfig& config) {
  MetricRow row;
  row.t = state.t;
  row.theta = state.theta;
  const bool hessian_run = uses_hessian(config.algorithm);

  if (const ChainModel* model = env.oracle()) {
    const ChainAnalytics exact = analyze(*model, state.theta, hessian_run);
    row.grad_norm_sq = exact.gradJ.squaredNorm();
    row.z_err_sq = (state.Z - exact.gradJ).squaredNorm();
    row.J_exact = exact.J;
    if (hessian_run) row.hess_err_sq = (state.H - exact.hessJ).squaredNorm();
  }
  if (hessian_run) {
    row.hpd_min_eig = Eigen::SelfAdjointEigenSolver<Matrix>(state.H, Eigen::EigenvaluesOnly)
                          .eigenvalues()
                          .minCoeff();
  }
  if (config.eval_window > 0) {
    row.avg_cost = evaluate_average_cost(env, state.theta, config.rollout_warmup,
                                         config.eval_window,
                                         Rng::substream(config.seed, kEvaluationStream));
  }
  return row;
}

}  // namespace sfopt
