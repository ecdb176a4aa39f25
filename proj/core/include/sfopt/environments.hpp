#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "sfopt/chain_oracle.hpp"
#include "sfopt/core.hpp"

namespace sfopt {

/// Noisy-cost simulator. The internal state evolves under whatever
/// (perturbed) parameter is passed to step(), and step() returns the cost
/// observed after the transition.
class Env {
 public:
  virtual ~Env() = default;

  virtual int dim() const = 0;
  virtual double step(const Vector& theta, Rng& rng) = 0;

  /// A new instance of the same environment in its initial state.
  virtual std::unique_ptr<Env> fresh() const = 0;

  virtual std::string save_state() const = 0;
  virtual void load_state(std::string_view text) = 0;

  /// Analytic model when the environment is a finite chain, else nullptr.
  virtual const ChainModel* oracle() const { return nullptr; }
};

// ---------------------------------------------------------------------------
// Softmax chain family
// ---------------------------------------------------------------------------

struct ChainEnvSpec {
  int n_states = 5;
  int dim = 3;
  std::uint64_t gen_seed = 1;
  /// Std-dev of the logit weights W_s; 0 makes P independent of theta.
  double coupling = 1.0;
  /// Std-dev of the per-state cost centres mu_s.
  double mu_spread = 1.0;
  /// c_s ~ cost_offset * U(0, 1).
  double cost_offset = 1.0;
  /// Per-coordinate curvature kappa_k of the quadratic cost; empty = all ones.
  std::vector<double> curvature;
  /// Multiplies every cost (used to check scale invariance end to end).
  double cost_scale = 1.0;

  friend bool operator==(const ChainEnvSpec&, const ChainEnvSpec&) = default;
};

/// P_theta[s] = softmax(W_s theta + b_s);
/// h(theta, s) = cost_scale * (c_s + 1/2 sum_k kappa_k (theta_k - mu_{s,k})^2).
class SoftmaxChainModel final : public ChainModel {
 public:
  SoftmaxChainModel(std::vector<Matrix> W, Matrix b, Vector c, Matrix mu, Vector curvature,
                    double cost_scale = 1.0);

  static SoftmaxChainModel generate(const ChainEnvSpec& spec);

  int n_states() const override { return static_cast<int>(b_.rows()); }
  int dim() const override { return static_cast<int>(mu_.cols()); }

  Matrix transition(const Vector& theta) const override;
  Vector cost(const Vector& theta) const override;
  Matrix dtransition(const Vector& theta, int k) const override;
  Vector dcost(const Vector& theta, int k) const override;

  /// Row `state` of P_theta without building the full matrix.
  Vector transition_row(const Vector& theta, int state) const;
  double state_cost(const Vector& theta, int state) const;

  const std::vector<Matrix>& weights() const { return W_; }

 private:
  std::vector<Matrix> W_;  // N matrices of shape N x d
  Matrix b_;               // N x N, row s = bias of state s
  Vector c_;
  Matrix mu_;  // N x d
  Vector curvature_;
  double cost_scale_;
};

/// chain_env_make: environment plus analytic model from a generator seed.
class ChainEnv final : public Env {
 public:
  explicit ChainEnv(const ChainEnvSpec& spec);
  explicit ChainEnv(std::shared_ptr<const SoftmaxChainModel> model, int initial_state = 0);

  int dim() const override { return model_->dim(); }
  double step(const Vector& theta, Rng& rng) override;
  std::unique_ptr<Env> fresh() const override;
  std::string save_state() const override;
  void load_state(std::string_view text) override;
  const ChainModel* oracle() const override { return model_.get(); }

  const SoftmaxChainModel& model() const { return *model_; }
  int state() const { return state_; }

 private:
  std::shared_ptr<const SoftmaxChainModel> model_;
  int initial_state_ = 0;
  int state_ = 0;
};

// ---------------------------------------------------------------------------
// Continuous MountainCar, infinite horizon
// ---------------------------------------------------------------------------

namespace mountaincar {
inline constexpr double kMinPosition = -1.2;
inline constexpr double kMaxPosition = 0.6;
inline constexpr double kMaxSpeed = 0.07;
inline constexpr double kForce = 0.0015;
inline constexpr double kGravity = 0.0025;
inline constexpr double kTargetPosition = 0.45;
inline constexpr double kStartPosition = -0.5;
}  // namespace mountaincar

struct CarState {
  double x = mountaincar::kStartPosition;
  double v = 0.0;
};

/// Two-layer tanh network a = tanh(w2 . tanh(W1 s + b1) + b2) on s = (x, v).
/// Flattened layout: W1 (hidden x 2, row-major), b1, w2, b2.
class PolicyNet {
 public:
  explicit PolicyNet(int hidden) : hidden_(hidden) {}

  int hidden() const { return hidden_; }
  int num_params() const { return 4 * hidden_ + 1; }

  /// Throws DimensionMismatch when theta has the wrong length.
  double forward(const Vector& theta, const CarState& s) const;
  /// d action / d theta by backpropagation.
  Vector action_gradient(const Vector& theta, const CarState& s) const;

 private:
  void check(const Vector& theta) const;
  int hidden_;
};

struct MountainCarSpec {
  int hidden = 8;
  double noise_std = 1e-3;

  friend bool operator==(const MountainCarSpec&, const MountainCarSpec&) = default;
};

struct CarTransition {
  CarState next;
  double cost = 0.0;
  double action = 0.0;
};

/// One step of the dynamics with the policy action u = policy(theta, state):
/// v' = clamp(v + 0.0015 u - 0.0025 cos(3x) + noise), x' = clamp(x + v'),
/// v' = 0 at a position bound; cost 0.1 u^2 + (x' - 0.45)^2.
CarTransition mountaincar_step(const CarState& state, const Vector& theta,
                               const PolicyNet& policy, Rng& rng, double noise_std);

class MountainCarEnv final : public Env {
 public:
  explicit MountainCarEnv(const MountainCarSpec& spec, CarState start = {});

  int dim() const override { return policy_.num_params(); }
  double step(const Vector& theta, Rng& rng) override;
  std::unique_ptr<Env> fresh() const override;
  std::string save_state() const override;
  void load_state(std::string_view text) override;

  const CarState& state() const { return state_; }
  const PolicyNet& policy() const { return policy_; }

 private:
  MountainCarSpec spec_;
  PolicyNet policy_;
  CarState start_;
  CarState state_;
};

// ---------------------------------------------------------------------------

using EnvDescriptor = std::variant<ChainEnvSpec, MountainCarSpec>;

std::unique_ptr<Env> make_env(const EnvDescriptor& descriptor);
int env_dim(const EnvDescriptor& descriptor);

}  // namespace sfopt
