#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "sfopt/error.hpp"
#include "sfopt/recursions.hpp"

namespace sfopt {

namespace {

constexpr std::string_view kCheckpointMagic = "sfopt-checkpoint v1";

void put_values(std::ostream& out, const double* data, Eigen::Index n) {
  for (Eigen::Index i = 0; i < n; ++i) out << ' ' << format_roundtrip(data[i]);
}

void put_optional(std::ostream& out, const std::optional<double>& v) {
  out << ' ' << (v ? format_roundtrip(*v) : std::string("-"));
}

[[noreturn]] void corrupt(const std::string& what) {
  throw Error(ErrorKind::CorruptCheckpoint, what);
}

/// Reads "<key> <rest of line>" and returns the rest.
std::string expect_line(std::istream& in, std::string_view key) {
  std::string line;
  if (!std::getline(in, line)) corrupt(fmt::format("missing '{}'", key));
  if (line.compare(0, key.size(), key) != 0 ||
      (line.size() > key.size() && line[key.size()] != ' ')) {
    corrupt(fmt::format("expected '{}'", key));
  }
  return line.size() > key.size() ? line.substr(key.size() + 1) : std::string();
}

double take_double(std::istream& in) {
  std::string token;
  if (!(in >> token)) corrupt("truncated numeric field");
  try {
    return parse_double(token);
  } catch (const Error&) {
    corrupt(fmt::format("bad number '{}'", token));
  }
}

std::optional<double> take_optional(std::istream& in) {
  std::string token;
  if (!(in >> token)) corrupt("truncated row");
  if (token == "-") return std::nullopt;
  try {
    return parse_double(token);
  } catch (const Error&) {
    corrupt(fmt::format("bad number '{}'", token));
  }
}

Vector take_vector(const std::string& text, Eigen::Index n) {
  std::istringstream in(text);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = take_double(in);
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
  const auto d = cp.state.theta.size();
  std::ostringstream out;
  out << kCheckpointMagic << '\n';
  out << "config_hash " << cp.config_hash << '\n';
  out << "t " << cp.state.t << '\n';
  out << "d " << d << '\n';
  out << "theta";
  put_values(out, cp.state.theta.data(), d);
  out << "\nH";
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) out << ' ' << format_roundtrip(cp.state.H(i, j));
  out << "\nZ";
  put_values(out, cp.state.Z.data(), d);
  out << "\nrng_perturbation " << cp.perturbation_rng << '\n';
  out << "rng_environment " << cp.environment_rng << '\n';
  out << "env_state " << cp.env_state << '\n';
  out << "rows " << cp.rows.size() << '\n';
  for (const auto& row : cp.rows) {
    out << "row " << row.t;
    for (Metric m : kAllMetrics) put_optional(out, metric_value(row, m));
    put_optional(out, row.hpd_min_eig);
    out << ' ' << row.theta.size();
    put_values(out, row.theta.data(), row.theta.size());
    out << '\n';
  }
  out << "end\n";

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream file(tmp, std::ios::trunc);
    if (!file) throw Error(ErrorKind::IoError, fmt::format("cannot write '{}'", tmp.string()));
    file << out.str();
    if (!file) throw Error(ErrorKind::IoError, fmt::format("write failed '{}'", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, fmt::format("cannot open '{}'", path.string()));
  std::string magic;
  std::getline(in, magic);
  if (magic != kCheckpointMagic) corrupt("bad header");

  Checkpoint cp;
  cp.config_hash = expect_line(in, "config_hash");
  try {
    cp.state.t = std::stoull(expect_line(in, "t"));
  } catch (const std::logic_error&) {
    corrupt("bad t");
  }
  Eigen::Index d = 0;
  try {
    d = static_cast<Eigen::Index>(std::stoll(expect_line(in, "d")));
  } catch (const std::logic_error&) {
    corrupt("bad d");
  }
  if (d <= 0) corrupt("bad d");
  cp.state.theta = take_vector(expect_line(in, "theta"), d);
  const Vector h = take_vector(expect_line(in, "H"), d * d);
  cp.state.H = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                              Eigen::RowMajor>>(h.data(), d, d);
  cp.state.Z = take_vector(expect_line(in, "Z"), d);
  cp.perturbation_rng = expect_line(in, "rng_perturbation");
  cp.environment_rng = expect_line(in, "rng_environment");
  cp.env_state = expect_line(in, "env_state");

  std::size_t n_rows = 0;
  try {
    n_rows = std::stoull(expect_line(in, "rows"));
  } catch (const std::logic_error&) {
    corrupt("bad row count");
  }
  for (std::size_t i = 0; i < n_rows; ++i) {
    std::istringstream line(expect_line(in, "row"));
    MetricRow row;
    if (!(line >> row.t)) corrupt("bad row t");
    for (Metric m : kAllMetrics) metric_value(row, m) = take_optional(line);
    row.hpd_min_eig = take_optional(line);
    Eigen::Index n = 0;
    if (!(line >> n) || n < 0) corrupt("bad row theta length");
    row.theta.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) row.theta[k] = take_double(line);
    cp.rows.push_back(std::move(row));
  }
  expect_line(in, "end");
  return cp;
}

namespace {

struct Runner {
  const ExperimentConfig& config;
  Env& env;
  const RunOptions& options;
  std::string hash;
  std::vector<std::uint64_t> grid;

  RunTrace loop(OptimizerState state, RunStreams streams, std::vector<MetricRow> rows,
                bool resumed) {
    RunTrace trace;
    trace.config_hash = hash;
    trace.seed = config.seed;
    trace.rows = std::move(rows);

    bool skip_bookkeeping = resumed;
    try {
      while (true) {
        if (!skip_bookkeeping) {
          if (std::binary_search(grid.begin(), grid.end(), state.t)) {
            MetricRow row = measure(state, env, config);
            if (options.on_record) options.on_record(state, row);
            trace.rows.push_back(std::move(row));
          }
          if (options.checkpoint_every > 0 && state.t % options.checkpoint_every == 0 &&
              !options.checkpoint_path.empty()) {
            write_checkpoint(options.checkpoint_path,
                             {hash, state, streams.perturbation.serialize(),
                              streams.environment.serialize(), env.save_state(), trace.rows});
          }
        }
        skip_bookkeeping = false;
        if (options.stop_at && state.t == *options.stop_at && state.t < config.horizon) {
          trace.status = RunStatus::Interrupted;
          return trace;
        }
        if (state.t >= config.horizon) break;
        state = algorithm_step(state, env, config, streams);
      }
    } catch (const Error& e) {
      trace.status = RunStatus::Failed;
      trace.failure = fmt::format("t={}: {}", state.t, e.what());
      return trace;
    }
    trace.status = RunStatus::Completed;
    return trace;
  }
};

}  // namespace

RunTrace run(const ExperimentConfig& config, Env& env, const RunOptions& options) {
  validate(config);
  if (env.dim() != env_dim(config.env)) {
    throw Error(ErrorKind::DimensionMismatch, "environment does not match config");
  }
  Runner runner{config, env, options, config_hash(config),
                recording_grid(config.horizon, config.grid_ratio, config.eval_every)};
  return runner.loop(initial_state(config, env.dim()), RunStreams::from_seed(config.seed), {},
                     false);
}

RunTrace resume(const ExperimentConfig& config, Env& env,
                const std::filesystem::path& checkpoint_path, const RunOptions& options) {
  validate(config);
  Checkpoint cp = read_checkpoint(checkpoint_path);
  const std::string hash = config_hash(config);
  if (cp.config_hash != hash) {
    throw Error(ErrorKind::CorruptCheckpoint,
                fmt::format("checkpoint config hash {} does not match {}", cp.config_hash, hash));
  }
  if (cp.state.theta.size() != env.dim()) corrupt("parameter dimension");
  env.load_state(cp.env_state);
  RunStreams streams{Rng::deserialize(cp.perturbation_rng),
                     Rng::deserialize(cp.environment_rng)};
  Runner runner{config, env, options, hash,
                recording_grid(config.horizon, config.grid_ratio, config.eval_every)};
  return runner.loop(std::move(cp.state), std::move(streams), std::move(cp.rows), true);
}

}  // namespace sfopt
