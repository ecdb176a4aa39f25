#include "sfopt/environments.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "sfopt/error.hpp"

namespace sfopt {

namespace {

Vector softmax(const Vector& logits) {
  const double top = logits.maxCoeff();
  Vector p = (logits.array() - top).exp().matrix();
  return p / p.sum();
}

}  // namespace

SoftmaxChainModel::SoftmaxChainModel(std::vector<Matrix> W, Matrix b, Vector c, Matrix mu,
                                     Vector curvature, double cost_scale)
    : W_(std::move(W)),
      b_(std::move(b)),
      c_(std::move(c)),
      mu_(std::move(mu)),
      curvature_(std::move(curvature)),
      cost_scale_(cost_scale) {
  const auto n = b_.rows();
  const auto d = mu_.cols();
  bool ok = n >= 1 && b_.cols() == n && c_.size() == n && mu_.rows() == n &&
            curvature_.size() == d && static_cast<Eigen::Index>(W_.size()) == n;
  for (const auto& w : W_) ok = ok && w.rows() == n && w.cols() == d;
  if (!ok) throw Error(ErrorKind::DimensionMismatch, "inconsistent softmax chain parameters");
}

SoftmaxChainModel SoftmaxChainModel::generate(const ChainEnvSpec& spec) {
  if (spec.n_states < 1 || spec.dim < 1) {
    throw Error(ErrorKind::ValidationError, "chain needs n_states >= 1 and dim >= 1");
  }
  const int n = spec.n_states;
  const int d = spec.dim;
  Rng rng(mix_seed(spec.gen_seed, 0xC4A1));

  std::vector<Matrix> W(n, Matrix(n, d));
  for (auto& w : W) {
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < d; ++k) w(i, k) = spec.coupling * rng.normal();
  }
  Matrix b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = rng.normal();
  Vector c(n);
  for (int i = 0; i < n; ++i) c[i] = spec.cost_offset * rng.uniform();
  Matrix mu(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) mu(i, k) = spec.mu_spread * rng.normal();

  Vector curvature = Vector::Ones(d);
  if (spec.curvature.size() == 1) {
    curvature.setConstant(spec.curvature.front());
  } else if (!spec.curvature.empty()) {
    if (static_cast<int>(spec.curvature.size()) != d) {
      throw Error(ErrorKind::DimensionMismatch, "curvature length must be 1 or dim");
    }
    curvature = Eigen::Map<const Vector>(spec.curvature.data(), d);
  }
  return SoftmaxChainModel(std::move(W), std::move(b), std::move(c), std::move(mu),
                           std::move(curvature), spec.cost_scale);
}

Vector SoftmaxChainModel::transition_row(const Vector& theta, int state) const {
  return softmax(W_[state] * theta + b_.row(state).transpose());
}

double SoftmaxChainModel::state_cost(const Vector& theta, int state) const {
  const Vector diff = theta - mu_.row(state).transpose();
  return cost_scale_ * (c_[state] + 0.5 * diff.dot(curvature_.cwiseProduct(diff)));
}

Matrix SoftmaxChainModel::transition(const Vector& theta) const {
  const int n = n_states();
  Matrix P(n, n);
  for (int s = 0; s < n; ++s) P.row(s) = transition_row(theta, s).transpose();
  return P;
}

Vector SoftmaxChainModel::cost(const Vector& theta) const {
  const int n = n_states();
  Vector h(n);
  for (int s = 0; s < n; ++s) h[s] = state_cost(theta, s);
  return h;
}

Matrix SoftmaxChainModel::dtransition(const Vector& theta, int k) const {
  const int n = n_states();
  Matrix dP(n, n);
  for (int s = 0; s < n; ++s) {
    const Vector p = transition_row(theta, s);
    const auto wk = W_[s].col(k);
    const double mean = p.dot(wk);
    dP.row(s) = (p.array() * (wk.array() - mean)).matrix().transpose();
  }
  return dP;
}

Vector SoftmaxChainModel::dcost(const Vector& theta, int k) const {
  const int n = n_states();
  Vector g(n);
  for (int s = 0; s < n; ++s) g[s] = cost_scale_ * curvature_[k] * (theta[k] - mu_(s, k));
  return g;
}

// ---------------------------------------------------------------------------

ChainEnv::ChainEnv(const ChainEnvSpec& spec)
    : ChainEnv(std::make_shared<const SoftmaxChainModel>(SoftmaxChainModel::generate(spec))) {}

ChainEnv::ChainEnv(std::shared_ptr<const SoftmaxChainModel> model, int initial_state)
    : model_(std::move(model)), initial_state_(initial_state), state_(initial_state) {}

double ChainEnv::step(const Vector& theta, Rng& rng) {
  if (theta.size() != model_->dim()) {
    throw Error(ErrorKind::DimensionMismatch, "chain env: parameter length");
  }
  state_ = sample_from_row(rng, model_->transition_row(theta, state_));
  return model_->state_cost(theta, state_);
}

std::unique_ptr<Env> ChainEnv::fresh() const {
  return std::make_unique<ChainEnv>(model_, initial_state_);
}

std::string ChainEnv::save_state() const { return std::to_string(state_); }

void ChainEnv::load_state(std::string_view text) {
  std::istringstream in{std::string(text)};
  int s = -1;
  in >> s;
  if (!in || s < 0 || s >= model_->n_states()) {
    throw Error(ErrorKind::CorruptCheckpoint, "chain env state");
  }
  state_ = s;
}

// ---------------------------------------------------------------------------

void PolicyNet::check(const Vector& theta) const {
  if (theta.size() != num_params()) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("policy expects {} parameters, got {}", num_params(), theta.size()));
  }
}

double PolicyNet::forward(const Vector& theta, const CarState& s) const {
  check(theta);
  const int h = hidden_;
  const double* w1 = theta.data();
  const double* b1 = w1 + 2 * h;
  const double* w2 = b1 + h;
  const double b2 = w2[h];
  double out = b2;
  for (int i = 0; i < h; ++i) {
    out += w2[i] * std::tanh(w1[2 * i] * s.x + w1[2 * i + 1] * s.v + b1[i]);
  }
  return std::tanh(out);
}

Vector PolicyNet::action_gradient(const Vector& theta, const CarState& s) const {
  check(theta);
  const int h = hidden_;
  const double* w1 = theta.data();
  const double* b1 = w1 + 2 * h;
  const double* w2 = b1 + h;
  Vector hidden(h);
  double out = w2[h];
  for (int i = 0; i < h; ++i) {
    hidden[i] = std::tanh(w1[2 * i] * s.x + w1[2 * i + 1] * s.v + b1[i]);
    out += w2[i] * hidden[i];
  }
  const double a = std::tanh(out);
  const double da = 1.0 - a * a;

  Vector g(num_params());
  for (int i = 0; i < h; ++i) {
    const double dz = da * w2[i] * (1.0 - hidden[i] * hidden[i]);
    g[2 * i] = dz * s.x;
    g[2 * i + 1] = dz * s.v;
    g[2 * h + i] = dz;
    g[3 * h + i] = da * hidden[i];
  }
  g[4 * h] = da;
  return g;
}

CarTransition mountaincar_step(const CarState& state, const Vector& theta,
                               const PolicyNet& policy, Rng& rng, double noise_std) {
  using namespace mountaincar;
  const double u = policy.forward(theta, state);
  const double noise = noise_std > 0.0 ? noise_std * rng.normal() : 0.0;

  CarTransition tr;
  tr.action = u;
  double v = state.v + kForce * u - kGravity * std::cos(3.0 * state.x) + noise;
  v = std::clamp(v, -kMaxSpeed, kMaxSpeed);
  double x = std::clamp(state.x + v, kMinPosition, kMaxPosition);
  if (x == kMinPosition || x == kMaxPosition) v = 0.0;
  tr.next = {x, v};
  const double dx = x - kTargetPosition;
  tr.cost = 0.1 * u * u + dx * dx;
  return tr;
}

MountainCarEnv::MountainCarEnv(const MountainCarSpec& spec, CarState start)
    : spec_(spec), policy_(spec.hidden), start_(start), state_(start) {
  if (spec.hidden < 1) throw Error(ErrorKind::ValidationError, "hidden width must be >= 1");
  if (!(spec.noise_std >= 0.0)) throw Error(ErrorKind::ValidationError, "noise_std must be >= 0");
}

double MountainCarEnv::step(const Vector& theta, Rng& rng) {
  const auto tr = mountaincar_step(state_, theta, policy_, rng, spec_.noise_std);
  state_ = tr.next;
  return tr.cost;
}

std::unique_ptr<Env> MountainCarEnv::fresh() const {
  return std::make_unique<MountainCarEnv>(spec_, start_);
}

std::string MountainCarEnv::save_state() const {
  return format_roundtrip(state_.x) + " " + format_roundtrip(state_.v);
}

void MountainCarEnv::load_state(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string xs, vs;
  in >> xs >> vs;
  if (!in) throw Error(ErrorKind::CorruptCheckpoint, "mountaincar env state");
  try {
    state_ = {parse_double(xs), parse_double(vs)};
  } catch (const Error&) {
    throw Error(ErrorKind::CorruptCheckpoint, "mountaincar env state");
  }
}

// ---------------------------------------------------------------------------

std::unique_ptr<Env> make_env(const EnvDescriptor& descriptor) {
  return std::visit(
      [](const auto& spec) -> std::unique_ptr<Env> {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, ChainEnvSpec>) {
          return std::make_unique<ChainEnv>(spec);
        } else {
          return std::make_unique<MountainCarEnv>(spec);
        }
      },
      descriptor);
}

int env_dim(const EnvDescriptor& descriptor) {
  return std::visit(
      [](const auto& spec) -> int {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, ChainEnvSpec>) {
          return spec.dim;
        } else {
          return PolicyNet(spec.hidden).num_params();
        }
      },
      descriptor);
}

}  // namespace sfopt
