#include "sfopt/estimators.hpp"

#include <cmath>

#include <fmt/format.h>

#include "sfopt/error.hpp"

namespace sfopt {

namespace {

void check_inputs(double beta, double cost) {
  if (!std::isfinite(cost)) {
    throw Error(ErrorKind::NonFinite, fmt::format("cost sample {}", cost));
  }
  if (!(beta > 0.0)) {
    throw Error(ErrorKind::ValidationError, "beta must be positive");
  }
}

}  // namespace

GradSample sf_gradient_sample(const PerturbationVector& p, double beta, double cost) {
  check_inputs(beta, cost);
  return {p.eta * (cost / beta)};
}

HessSample sf_hessian_sample(const PerturbationVector& p, double beta, double cost) {
  check_inputs(beta, cost);
  const auto d = p.eta.size();
  const double scale = cost / (beta * beta);
  Matrix h(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    h(i, i) = (p.eta[i] * p.eta[i] - 1.0) * scale;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = p.eta[i] * p.eta[j] * scale;
      h(i, j) = v;
      h(j, i) = v;
    }
  }
  return {std::move(h)};
}

}  // namespace sfopt
