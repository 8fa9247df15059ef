#pragma once

// Shared vocabulary: actions, state keys, feedback vectors and run configuration.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace interrl {

enum class EnvKind { pacman, cartpole };

/// Shaping method that can act inside a portfolio. Q is the unshaped baseline.
enum class MethodId { Q, AB, CS, RS, QA };

/// What a run executes: a single method or the adaptive selector (AL).
enum class RunMethod { Q, AB, CS, RS, QA, AL };

enum class Strategy { early, sporadic, late };

enum class Origin { simulated, human };

struct Action {
  std::size_t index = 0;
  friend bool operator==(Action, Action) = default;
};

struct StateId {
  std::uint64_t key = 0;
  friend auto operator<=>(StateId, StateId) = default;
};

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// ---------------------------------------------------------------------------
// Names

inline constexpr std::array<std::string_view, 4> kPacmanActions{"up", "down", "left", "right"};
inline constexpr std::array<std::string_view, 2> kCartpoleActions{"left", "right"};

inline std::span<const std::string_view> action_labels(EnvKind env) {
  if (env == EnvKind::pacman) return kPacmanActions;
  return kCartpoleActions;
}

inline std::size_t action_count(EnvKind env) { return action_labels(env).size(); }

inline std::optional<Action> parse_action(EnvKind env, std::string_view label) {
  auto labels = action_labels(env);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) return Action{i};
  return std::nullopt;
}

inline std::string_view action_label(EnvKind env, Action a) {
  auto labels = action_labels(env);
  if (a.index >= labels.size()) throw std::invalid_argument("action index out of range");
  return labels[a.index];
}

inline std::string_view to_string(EnvKind e) { return e == EnvKind::pacman ? "pacman" : "cartpole"; }

inline std::optional<EnvKind> parse_env(std::string_view s) {
  if (s == "pacman") return EnvKind::pacman;
  if (s == "cartpole") return EnvKind::cartpole;
  return std::nullopt;
}

inline constexpr std::array<std::string_view, 5> kMethodNames{"Q", "AB", "CS", "RS", "QA"};

inline std::string_view to_string(MethodId m) { return kMethodNames[static_cast<std::size_t>(m)]; }

inline std::string_view to_string(RunMethod m) {
  if (m == RunMethod::AL) return "AL";
  return kMethodNames[static_cast<std::size_t>(m)];
}

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::optional<MethodId> parse_method_id(std::string_view s) {
  auto lower = lowercase(s);
  for (std::size_t i = 0; i < kMethodNames.size(); ++i)
    if (lowercase(kMethodNames[i]) == lower) return static_cast<MethodId>(i);
  return std::nullopt;
}

inline std::optional<RunMethod> parse_run_method(std::string_view s) {
  if (lowercase(s) == "al") return RunMethod::AL;
  if (auto m = parse_method_id(s)) return static_cast<RunMethod>(*m);
  return std::nullopt;
}

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::early: return "early";
    case Strategy::sporadic: return "sporadic";
    case Strategy::late: return "late";
  }
  return "?";
}

inline std::optional<Strategy> parse_strategy(std::string_view s) {
  if (s == "early") return Strategy::early;
  if (s == "sporadic") return Strategy::sporadic;
  if (s == "late") return Strategy::late;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Feedback

/// A teacher's suggestion: one action the teacher considers best, optionally with
/// the teacher's own action values for that state.
struct FeedbackSignal {
  Action suggested_action;
  std::optional<std::vector<double>> value_row;
  Origin origin = Origin::simulated;
};

/// +r_h on the suggested action, -r_h elsewhere. The all-zero vector means "no feedback",
/// which makes every shaping rule collapse to its unshaped form.
class FeedbackVector {
 public:
  static FeedbackVector absent(std::size_t action_count) {
    FeedbackVector v;
    v.entries_.assign(action_count, 0.0);
    return v;
  }

  std::span<const double> entries() const { return entries_; }
  double operator[](std::size_t i) const { return entries_[i]; }
  double operator[](Action a) const { return entries_[a.index]; }
  std::size_t size() const { return entries_.size(); }
  double magnitude() const { return r_h_; }
  bool present() const { return r_h_ > 0.0; }

  std::optional<Action> suggested() const {
    if (!present()) return std::nullopt;
    auto it = std::max_element(entries_.begin(), entries_.end());
    return Action{static_cast<std::size_t>(it - entries_.begin())};
  }

  friend bool operator==(const FeedbackVector&, const FeedbackVector&) = default;

 private:
  friend FeedbackVector make_feedback_vector(Action, double, std::size_t);
  std::vector<double> entries_;
  double r_h_ = 0.0;
};

inline FeedbackVector make_feedback_vector(Action suggested, double r_h, std::size_t action_count) {
  if (suggested.index >= action_count)
    throw std::invalid_argument("suggested action " + std::to_string(suggested.index) +
                                " out of range for " + std::to_string(action_count) + " actions");
  if (!(r_h > 0.0) || !std::isfinite(r_h)) throw std::invalid_argument("r_h must be positive");
  FeedbackVector v;
  v.entries_.assign(action_count, -r_h);
  v.entries_[suggested.index] = r_h;
  v.r_h_ = r_h;
  return v;
}

/// Everything a shaping method sees from the teacher at one decision.
struct Advice {
  FeedbackVector H;
  /// Teacher action values; only value-based combiners read these.
  std::optional<std::vector<double>> value_row;

  static Advice none(std::size_t action_count) { return {FeedbackVector::absent(action_count), std::nullopt}; }

  static Advice from_signal(const FeedbackSignal& s, double r_h, std::size_t action_count) {
    return {make_feedback_vector(s.suggested_action, r_h, action_count), s.value_row};
  }

  bool present() const { return H.present(); }
};

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  EnvKind env = EnvKind::pacman;
  RunMethod method = RunMethod::Q;
  int episodes = 30000;
  int runs = 20;
  std::uint64_t seed = 1;

  double alpha = 0.3;
  double gamma = 0.7;
  double epsilon = 0.1;

  double B0 = 1.0;
  double B_decrement = 1.0 / 30000.0;
  double r_h = 10.0;

  double beta = 5.0;
  double tau = 0.1;
  std::vector<MethodId> portfolio{MethodId::AB, MethodId::CS, MethodId::RS, MethodId::QA};

  double L = 0.01;
  double C = 0.8;
  Strategy strategy = Strategy::early;
  bool q_access = false;
  std::optional<int> disable_at;
  int oracle_episodes = 30000;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

inline RunConfig default_config(EnvKind env) {
  RunConfig c;
  c.env = env;
  if (env == EnvKind::cartpole) {
    c.gamma = 0.99;
    c.epsilon = 0.3;
    c.B_decrement = 1.0 / 2000.0;
    c.episodes = 2000;
    c.oracle_episodes = 5000;
  }
  return c;
}

class InvalidConfig : public std::invalid_argument {
 public:
  explicit InvalidConfig(std::vector<std::string> errors)
      : std::invalid_argument(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errors) {
    std::string out;
    for (const auto& e : errors) {
      if (!out.empty()) out += "; ";
      out += e;
    }
    return out;
  }
  std::vector<std::string> errors_;
};

inline std::vector<std::string> config_errors(const RunConfig& c) {
  std::vector<std::string> errs;
  auto check = [&](bool ok, std::string msg) {
    if (!ok) errs.push_back(std::move(msg));
  };
  check(c.episodes > 0, "episodes must be > 0");
  check(c.runs > 0, "runs must be > 0");
  check(c.alpha > 0.0 && c.alpha <= 1.0, "alpha out of (0,1]");
  check(c.gamma > 0.0 && c.gamma < 1.0, "gamma out of (0,1)");
  check(c.epsilon >= 0.0 && c.epsilon <= 1.0, "epsilon out of [0,1]");
  check(c.B0 >= 0.0 && std::isfinite(c.B0), "B0 must be >= 0");
  check(c.B_decrement >= 0.0 && std::isfinite(c.B_decrement), "B_decrement must be >= 0");
  check(c.r_h > 0.0 && std::isfinite(c.r_h), "r_h must be > 0");
  check(c.beta >= 0.0 && std::isfinite(c.beta), "beta must be >= 0");
  check(c.tau >= 0.0 && c.tau <= 1.0, "tau out of [0,1]");
  check(c.L >= 0.0 && c.L <= 1.0, "L out of [0,1]");
  check(c.C >= 0.0 && c.C <= 1.0, "C out of [0,1]");
  check(!c.disable_at || *c.disable_at >= 0, "disable_at must be >= 0");
  check(c.oracle_episodes > 0, "oracle_episodes must be > 0");
  if (c.method == RunMethod::AL) {
    check(c.portfolio.size() >= 2, "portfolio needs at least two methods");
    auto sorted = c.portfolio;
    std::sort(sorted.begin(), sorted.end());
    check(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "portfolio has duplicate methods");
  }
  return errs;
}

/// Returns the config unchanged when valid; throws InvalidConfig listing every violation.
inline RunConfig validate_config(RunConfig c) {
  auto errs = config_errors(c);
  if (!errs.empty()) throw InvalidConfig(std::move(errs));
  return c;
}

// ---------------------------------------------------------------------------
// Flat `key = value` text format

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  std::string tmp(s);
  char* end = nullptr;
  double v = std::strtod(tmp.c_str(), &end);
  if (end != tmp.c_str() + tmp.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

template <class Int>
std::optional<Int> parse_int(std::string_view s) {
  s = trim(s);
  Int v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<bool> parse_bool(std::string_view s) {
  s = trim(s);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  return std::nullopt;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

struct KeyValue {
  std::string key;
  std::string value;
  int line = 0;
};

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
inline std::vector<KeyValue> parse_key_values(std::string_view text, std::vector<std::string>& errors) {
  std::vector<KeyValue> out;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    auto line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++line_no;
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    auto hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      errors.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    out.push_back({std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))), line_no});
  }
  return out;
}

inline std::string join_methods(const std::vector<MethodId>& ms) {
  std::string out;
  for (auto m : ms) {
    if (!out.empty()) out += ",";
    out += to_string(m);
  }
  return out;
}

}  // namespace detail

/// Applies one `key = value` assignment. Returns an error message on failure.
inline std::optional<std::string> apply_config_key(RunConfig& c, std::string_view key, std::string_view value) {
  using namespace detail;
  auto bad = [&] { return std::string(key) + ": invalid value '" + std::string(value) + "'"; };
  auto set_double = [&](double& field) -> std::optional<std::string> {
    auto v = parse_double(value);
    if (!v) return bad();
    field = *v;
    return std::nullopt;
  };
  auto set_int = [&](int& field) -> std::optional<std::string> {
    auto v = parse_int<int>(value);
    if (!v) return bad();
    field = *v;
    return std::nullopt;
  };

  if (key == "env") {
    auto e = parse_env(value);
    if (!e) return bad();
    c.env = *e;
    return std::nullopt;
  }
  if (key == "method") {
    auto m = parse_run_method(value);
    if (!m) return bad();
    c.method = *m;
    return std::nullopt;
  }
  if (key == "episodes") return set_int(c.episodes);
  if (key == "runs") return set_int(c.runs);
  if (key == "seed") {
    auto v = parse_int<std::uint64_t>(value);
    if (!v) return bad();
    c.seed = *v;
    return std::nullopt;
  }
  if (key == "alpha") return set_double(c.alpha);
  if (key == "gamma") return set_double(c.gamma);
  if (key == "epsilon") return set_double(c.epsilon);
  if (key == "B0") return set_double(c.B0);
  if (key == "B_decrement") return set_double(c.B_decrement);
  if (key == "r_h") return set_double(c.r_h);
  if (key == "beta") return set_double(c.beta);
  if (key == "tau") return set_double(c.tau);
  if (key == "L") return set_double(c.L);
  if (key == "C") return set_double(c.C);
  if (key == "oracle_episodes") return set_int(c.oracle_episodes);
  if (key == "portfolio") {
    std::vector<MethodId> ms;
    for (auto part : split(value, ',')) {
      auto m = parse_method_id(part);
      if (!m) return bad();
      ms.push_back(*m);
    }
    c.portfolio = std::move(ms);
    return std::nullopt;
  }
  if (key == "strategy") {
    auto s = parse_strategy(value);
    if (!s) return bad();
    c.strategy = *s;
    return std::nullopt;
  }
  if (key == "q_access") {
    auto b = parse_bool(value);
    if (!b) return bad();
    c.q_access = *b;
    return std::nullopt;
  }
  if (key == "disable_at") {
    if (trim(value) == "none") {
      c.disable_at.reset();
      return std::nullopt;
    }
    auto v = parse_int<int>(value);
    if (!v) return bad();
    c.disable_at = *v;
    return std::nullopt;
  }
  return "unknown key '" + std::string(key) + "'";
}

inline std::string to_config_text(const RunConfig& c) {
  using detail::format_double;
  std::ostringstream os;
  os << "env = " << to_string(c.env) << '\n'
     << "method = " << to_string(c.method) << '\n'
     << "episodes = " << c.episodes << '\n'
     << "runs = " << c.runs << '\n'
     << "seed = " << c.seed << '\n'
     << "alpha = " << format_double(c.alpha) << '\n'
     << "gamma = " << format_double(c.gamma) << '\n'
     << "epsilon = " << format_double(c.epsilon) << '\n'
     << "B0 = " << format_double(c.B0) << '\n'
     << "B_decrement = " << format_double(c.B_decrement) << '\n'
     << "r_h = " << format_double(c.r_h) << '\n'
     << "beta = " << format_double(c.beta) << '\n'
     << "tau = " << format_double(c.tau) << '\n'
     << "portfolio = " << detail::join_methods(c.portfolio) << '\n'
     << "L = " << format_double(c.L) << '\n'
     << "C = " << format_double(c.C) << '\n'
     << "strategy = " << to_string(c.strategy) << '\n'
     << "q_access = " << (c.q_access ? "true" : "false") << '\n'
     << "disable_at = " << (c.disable_at ? std::to_string(*c.disable_at) : "none") << '\n'
     << "oracle_episodes = " << c.oracle_episodes << '\n';
  return os.str();
}

/// Parses a config file. Environment defaults are applied first (from the `env` key,
/// wherever it appears), then every other key overrides them. Throws InvalidConfig
/// with all parse and validation errors.
inline RunConfig parse_config_text(std::string_view text) {
  std::vector<std::string> errors;
  auto kvs = detail::parse_key_values(text, errors);
  EnvKind env = EnvKind::pacman;
  for (const auto& kv : kvs) {
    if (kv.key != "env") continue;
    if (auto e = parse_env(kv.value)) env = *e;
  }
  RunConfig c = default_config(env);
  for (const auto& kv : kvs) {
    if (auto err = apply_config_key(c, kv.key, kv.value))
      errors.push_back("line " + std::to_string(kv.line) + ": " + *err);
  }
  if (errors.empty()) errors = config_errors(c);
  if (!errors.empty()) throw InvalidConfig(std::move(errors));
  return c;
}

}  // namespace interrl
