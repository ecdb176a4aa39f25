#include "sfopt/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "sfopt/error.hpp"

namespace sfopt {

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::GSF1: return "gsf1";
    case Algorithm::NSF1: return "nsf1";
    case Algorithm::NSF1_DIAG: return "nsf1_diag";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "gsf1") return Algorithm::GSF1;
  if (lower == "nsf1") return Algorithm::NSF1;
  if (lower == "nsf1_diag" || lower == "nsf1-diag") return Algorithm::NSF1_DIAG;
  throw Error(ErrorKind::ValidationError, fmt::format("algorithm: unknown '{}'", text));
}

void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::ValidationError, what); };
  if (!(c.beta > 0.0)) fail("beta: must be > 0");
  if (!(c.pd_floor > 0.0)) fail("pd_floor: must be > 0");
  if (!(c.grid_ratio > 1.0)) fail("grid_ratio: must be > 1");
  if (c.burn_in != 0 && c.burn_in >= c.horizon) fail("burn_in: must be < horizon");
  try {
    validate_schedule(c.schedule, timescale_mode(c.algorithm));
  } catch (const Error& e) {
    throw Error(e.kind(), fmt::format("schedule: {}", e.detail()));
  }

  if (const auto* chain = std::get_if<ChainEnvSpec>(&c.env)) {
    if (chain->n_states < 1) fail("env.n_states: must be >= 1");
    if (chain->dim < 1) fail("env.dim: must be >= 1");
    if (!chain->curvature.empty() && chain->curvature.size() != 1 &&
        static_cast<int>(chain->curvature.size()) != chain->dim) {
      fail("env.curvature: length must be 1 or dim");
    }
  } else if (const auto* car = std::get_if<MountainCarSpec>(&c.env)) {
    if (car->hidden < 1) fail("env.hidden: must be >= 1");
    if (!(car->noise_std >= 0.0)) fail("env.noise_std: must be >= 0");
  }

  const int d = env_dim(c.env);
  if (c.box_lower.size() != d || c.box_upper.size() != d) {
    fail(fmt::format("box_lower/box_upper: expected length {}", d));
  }
  for (int i = 0; i < d; ++i) {
    if (!(c.box_lower[i] < c.box_upper[i])) fail("box_lower < box_upper componentwise");
  }
  if (c.theta0.size() != 0 && c.theta0.size() != d) {
    fail(fmt::format("theta0: expected length {}", d));
  }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

std::string render_vector(const Vector& v) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_roundtrip(v[i]);
  }
  return out + "]";
}

std::string render_vector(const std::vector<double>& v) {
  return render_vector(Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())));
}

}  // namespace

std::string to_toml(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "[run]\n";
  out << "algorithm = \"" << to_string(c.algorithm) << "\"\n";
  out << "beta = " << format_roundtrip(c.beta) << "\n";
  out << "horizon = " << c.horizon << "\n";
  out << "burn_in = " << c.burn_in << "\n";
  out << "seed = " << c.seed << "\n";
  out << "pd_floor = " << format_roundtrip(c.pd_floor) << "\n";
  out << "eval_every = " << c.eval_every << "\n";
  out << "grid_ratio = " << format_roundtrip(c.grid_ratio) << "\n";
  out << "eval_window = " << c.eval_window << "\n";
  out << "rollout_warmup = " << c.rollout_warmup << "\n";
  out << "box_lower = " << render_vector(c.box_lower) << "\n";
  out << "box_upper = " << render_vector(c.box_upper) << "\n";
  if (c.theta0.size() > 0) out << "theta0 = " << render_vector(c.theta0) << "\n";
  out << "freeze_theta = " << (c.freeze_theta ? "true" : "false") << "\n";

  out << "\n[schedule]\n";
  out << "sigma = " << format_roundtrip(c.schedule.sigma) << "\n";
  out << "alpha = " << format_roundtrip(c.schedule.alpha) << "\n";
  if (c.schedule.nu) out << "nu = " << format_roundtrip(*c.schedule.nu) << "\n";
  out << "a0 = " << format_roundtrip(c.schedule.a0) << "\n";
  out << "b0 = " << format_roundtrip(c.schedule.b0) << "\n";
  out << "c0 = " << format_roundtrip(c.schedule.c0) << "\n";

  out << "\n[env]\n";
  if (const auto* chain = std::get_if<ChainEnvSpec>(&c.env)) {
    out << "kind = \"chain\"\n";
    out << "n_states = " << chain->n_states << "\n";
    out << "dim = " << chain->dim << "\n";
    out << "gen_seed = " << chain->gen_seed << "\n";
    out << "coupling = " << format_roundtrip(chain->coupling) << "\n";
    out << "mu_spread = " << format_roundtrip(chain->mu_spread) << "\n";
    out << "cost_offset = " << format_roundtrip(chain->cost_offset) << "\n";
    out << "cost_scale = " << format_roundtrip(chain->cost_scale) << "\n";
    if (!chain->curvature.empty()) out << "curvature = " << render_vector(chain->curvature) << "\n";
  } else {
    const auto& car = std::get<MountainCarSpec>(c.env);
    out << "kind = \"mountaincar\"\n";
    out << "hidden = " << car.hidden << "\n";
    out << "noise_std = " << format_roundtrip(car.noise_std) << "\n";
  }
  return out.str();
}

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_toml(config)) {
    hash ^= ch;
    hash *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", hash);
}

// ---------------------------------------------------------------------------
// Parsing: the TOML subset used by experiment files (sections, scalar
// numbers/strings/booleans, single-line numeric arrays, # comments).
// ---------------------------------------------------------------------------

namespace {

struct Value {
  enum class Type { String, Bool, Number, Array };
  Type type = Type::Number;
  std::string text;                // scalar payload
  std::vector<std::string> items;  // array payload
  int line = 0;
};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string strip_comment(std::string_view line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

[[noreturn]] void parse_fail(int line, const std::string& what) {
  throw Error(ErrorKind::ParseError, fmt::format("line {}: {}", line, what));
}

std::string clean_number(std::string_view raw) {
  std::string s;
  for (char ch : raw)
    if (ch != '_') s += ch;
  return s;
}

Value parse_value(const std::string& raw, int line) {
  Value v;
  v.line = line;
  if (raw.empty()) parse_fail(line, "missing value");
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') parse_fail(line, "unterminated string");
    v.type = Value::Type::String;
    v.text = raw.substr(1, raw.size() - 2);
    return v;
  }
  if (raw == "true" || raw == "false") {
    v.type = Value::Type::Bool;
    v.text = raw;
    return v;
  }
  if (raw.front() == '[') {
    if (raw.back() != ']') parse_fail(line, "unterminated array");
    v.type = Value::Type::Array;
    std::stringstream body(raw.substr(1, raw.size() - 2));
    std::string item;
    while (std::getline(body, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      v.items.push_back(clean_number(item));
    }
    return v;
  }
  v.type = Value::Type::Number;
  v.text = clean_number(raw);
  return v;
}

using Table = std::map<std::string, Value>;

Table parse_table(std::string_view text) {
  Table table;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw_line;
  int line_no = 0;
  while (std::getline(in, raw_line)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw_line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') parse_fail(line_no, "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) parse_fail(line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) parse_fail(line_no, "empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (table.count(full)) parse_fail(line_no, fmt::format("duplicate key '{}'", full));
    table[full] = parse_value(trim(line.substr(eq + 1)), line_no);
  }
  return table;
}

class Reader {
 public:
  explicit Reader(Table table) : table_(std::move(table)) {}

  bool has(const std::string& key) const { return table_.count(key) > 0; }

  const Value& get(const std::string& key) {
    auto it = table_.find(key);
    if (it == table_.end()) {
      throw Error(ErrorKind::ValidationError, fmt::format("missing required key '{}'", key));
    }
    used_.insert(key);
    return it->second;
  }

  double number(const std::string& key) {
    const Value& v = get(key);
    if (v.type != Value::Type::Number) wrong_type(key, v, "a number");
    return to_double(v.text, key, v.line);
  }
  double number(const std::string& key, double fallback) {
    return has(key) ? number(key) : fallback;
  }

  std::uint64_t unsigned_int(const std::string& key) {
    const Value& v = get(key);
    if (v.type != Value::Type::Number) wrong_type(key, v, "an integer");
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v.text.data(), v.text.data() + v.text.size(), out);
    if (ec != std::errc() || ptr != v.text.data() + v.text.size()) {
      parse_fail(v.line, fmt::format("'{}' must be a non-negative integer", key));
    }
    return out;
  }
  std::uint64_t unsigned_int(const std::string& key, std::uint64_t fallback) {
    return has(key) ? unsigned_int(key) : fallback;
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Value& v = get(key);
    if (v.type != Value::Type::Bool) wrong_type(key, v, "true or false");
    return v.text == "true";
  }

  std::string string(const std::string& key) {
    const Value& v = get(key);
    if (v.type != Value::Type::String) wrong_type(key, v, "a quoted string");
    return v.text;
  }

  /// Scalars broadcast to `size`; arrays must already have that size
  /// (size < 0 accepts any length).
  std::vector<double> numbers(const std::string& key, int size) {
    const Value& v = get(key);
    std::vector<double> out;
    if (v.type == Value::Type::Number) {
      out.assign(size < 0 ? 1 : size, to_double(v.text, key, v.line));
    } else if (v.type == Value::Type::Array) {
      for (const auto& item : v.items) out.push_back(to_double(item, key, v.line));
      if (size >= 0 && static_cast<int>(out.size()) != size) {
        throw Error(ErrorKind::ValidationError,
                    fmt::format("{}: expected {} entries, got {}", key, size, out.size()));
      }
    } else {
      wrong_type(key, v, "a number or numeric array");
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& [key, value] : table_) {
      if (!used_.count(key)) parse_fail(value.line, fmt::format("unknown key '{}'", key));
    }
  }

 private:
  [[noreturn]] static void wrong_type(const std::string& key, const Value& v, const char* want) {
    parse_fail(v.line, fmt::format("'{}' must be {}", key, want));
  }

  static double to_double(const std::string& text, const std::string& key, int line) {
    try {
      return parse_double(text);
    } catch (const Error&) {
      parse_fail(line, fmt::format("'{}': not a number '{}'", key, text));
    }
  }

  Table table_;
  std::set<std::string> used_;
};

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

ExperimentConfig parse_config_text(std::string_view text,
                                   const std::vector<std::string>& overrides) {
  Table table = parse_table(text);
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::ParseError, fmt::format("override '{}': expected key=value", item));
    }
    const std::string key = trim(std::string_view(item).substr(0, eq));
    if (key.find('.') == std::string::npos) {
      throw Error(ErrorKind::ParseError,
                  fmt::format("override '{}': key must be section.key", item));
    }
    table[key] = parse_value(trim(std::string_view(item).substr(eq + 1)), 0);
  }

  Reader r(std::move(table));
  ExperimentConfig c;

  // [env] first: its dimension sizes the box and theta0 arrays.
  const std::string kind = r.string("env.kind");
  if (kind == "chain") {
    ChainEnvSpec spec;
    spec.n_states = static_cast<int>(r.unsigned_int("env.n_states", 5));
    spec.dim = static_cast<int>(r.unsigned_int("env.dim", 3));
    spec.gen_seed = r.unsigned_int("env.gen_seed", 1);
    spec.coupling = r.number("env.coupling", spec.coupling);
    spec.mu_spread = r.number("env.mu_spread", spec.mu_spread);
    spec.cost_offset = r.number("env.cost_offset", spec.cost_offset);
    spec.cost_scale = r.number("env.cost_scale", spec.cost_scale);
    if (r.has("env.curvature")) spec.curvature = r.numbers("env.curvature", -1);
    c.env = spec;
  } else if (kind == "mountaincar") {
    MountainCarSpec spec;
    spec.hidden = static_cast<int>(r.unsigned_int("env.hidden", 8));
    spec.noise_std = r.number("env.noise_std", spec.noise_std);
    c.env = spec;
  } else {
    throw Error(ErrorKind::ValidationError, fmt::format("env.kind: unknown '{}'", kind));
  }
  const int d = env_dim(c.env);

  c.algorithm = parse_algorithm(r.string("run.algorithm"));
  if (!r.has("run.beta")) throw Error(ErrorKind::ValidationError, "beta");
  c.beta = r.number("run.beta");
  c.horizon = r.unsigned_int("run.horizon");
  c.burn_in = r.unsigned_int("run.burn_in", 0);
  c.seed = r.unsigned_int("run.seed", 1);
  c.pd_floor = r.number("run.pd_floor", c.pd_floor);
  c.eval_every = r.unsigned_int("run.eval_every", c.eval_every);
  c.grid_ratio = r.number("run.grid_ratio", c.grid_ratio);
  c.eval_window = r.unsigned_int("run.eval_window", c.eval_window);
  c.rollout_warmup = r.unsigned_int("run.rollout_warmup", c.rollout_warmup);
  c.freeze_theta = r.boolean("run.freeze_theta", false);
  c.box_lower = to_vector(r.numbers("run.box_lower", d));
  c.box_upper = to_vector(r.numbers("run.box_upper", d));
  if (r.has("run.theta0")) c.theta0 = to_vector(r.numbers("run.theta0", d));

  c.schedule.sigma = r.number("schedule.sigma");
  c.schedule.alpha = r.number("schedule.alpha");
  if (r.has("schedule.nu")) c.schedule.nu = r.number("schedule.nu");
  c.schedule.a0 = r.number("schedule.a0", 1.0);
  c.schedule.b0 = r.number("schedule.b0", 1.0);
  c.schedule.c0 = r.number("schedule.c0", 1.0);

  r.reject_unknown();
  validate(c);
  return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path,
                              const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, fmt::format("cannot open config '{}'", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), overrides);
}

}  // namespace sfopt
