#pragma once

// Batch experiments: seeded multi-run sweeps, moving averages, CSV output and summaries.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "interrl/core.hpp"
#include "interrl/environments.hpp"
#include "interrl/teacher.hpp"
#include "interrl/trainer.hpp"

namespace interrl {

/// Calls `fn` with a freshly constructed environment of the requested kind.
template <class Fn>
decltype(auto) with_environment(EnvKind kind, Fn&& fn) {
  if (kind == EnvKind::pacman) return fn(PacmanEnv{});
  return fn(CartpoleEnv{});
}

/// Moving-average window used for plots and convergence statistics.
inline int plot_window(EnvKind env) { return env == EnvKind::pacman ? 100 : 10; }

// ---------------------------------------------------------------------------
// Teachers

inline bool needs_teacher(const RunConfig& c) {
  if (c.L <= 0.0) return false;
  if (c.method == RunMethod::Q) return false;
  if (c.method == RunMethod::AL)
    return std::any_of(c.portfolio.begin(), c.portfolio.end(), [](MethodId m) { return m != MethodId::Q; });
  return true;
}

/// Seed used to train the oracle for a config; independent of the per-run seeds.
inline std::uint64_t oracle_seed(const RunConfig& c) { return c.seed ^ 0x5eedf00dULL; }

inline TeacherQ train_teacher(const RunConfig& c) {
  return with_environment(c.env, [&](auto env) {
    return train_oracle(env, c.oracle_episodes, LearnerParams{c.alpha, c.gamma, c.epsilon}, oracle_seed(c));
  });
}

// ---------------------------------------------------------------------------
// Single runs

/// Seed of run k.
inline std::uint64_t run_seed(const RunConfig& c, int run) { return c.seed + static_cast<std::uint64_t>(run); }

template <Environment Env>
std::vector<EpisodeLog> run_with(Env env, const RunConfig& c, int run, const TeacherQ* teacher) {
  const std::uint64_t seed = run_seed(c, run);
  Trainer<Env> trainer(std::move(env), trainer_settings(c), seed);
  Rng teacher_rng(seed, Stream::teacher);
  const OracleParams op = oracle_params(c);
  const std::size_t n = trainer.action_count();

  std::vector<EpisodeLog> logs;
  logs.reserve(static_cast<std::size_t>(c.episodes));
  for (int ep = 0; ep < c.episodes; ++ep) {
    logs.push_back(run_episode(trainer, [&](StateId s, int episode) {
      if (!teacher) return Advice::none(n);
      return teacher_advice(*teacher, op, s, episode, c.episodes, teacher_rng);
    }));
  }
  return logs;
}

/// One seeded run of `c.episodes` episodes. `teacher` may be null when no advice is needed.
inline std::vector<EpisodeLog> run_single(const RunConfig& c, int run, const TeacherQ* teacher) {
  if (needs_teacher(c) && !teacher) throw std::invalid_argument("run_single: configuration needs a teacher");
  return with_environment(c.env, [&](auto env) { return run_with(std::move(env), c, run, teacher); });
}

// ---------------------------------------------------------------------------
// Result tables

struct ResultRow {
  int run = 0;
  int episode = 0;
  std::string method;
  double return_R = 0.0;
  std::vector<double> weights;
  std::vector<double> probabilities;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct ResultTable {
  /// Empty for single-method runs; otherwise the portfolio column order.
  std::vector<MethodId> portfolio;
  std::vector<ResultRow> rows;

  friend bool operator==(const ResultTable&, const ResultTable&) = default;

  int run_count() const {
    int n = 0;
    for (const auto& r : rows) n = std::max(n, r.run + 1);
    return n;
  }

  /// Returns of one run in episode order.
  std::vector<double> returns(int run) const {
    std::vector<double> out;
    for (const auto& r : rows)
      if (r.run == run) out.push_back(r.return_R);
    return out;
  }
};

inline void append_run(ResultTable& table, int run, const std::vector<EpisodeLog>& logs) {
  for (const auto& log : logs)
    table.rows.push_back({run, log.episode, std::string(to_string(log.method_chosen)), log.return_R, log.weights,
                          log.probabilities});
}

/// All runs of one configuration. Runs are independent and may execute on `threads`
/// workers; rows are merged in run order either way.
inline ResultTable run_config(const RunConfig& c, const TeacherQ* teacher, unsigned threads = 1) {
  validate_config(c);
  ResultTable table;
  if (c.method == RunMethod::AL) table.portfolio = c.portfolio;
  std::vector<std::vector<EpisodeLog>> runs(static_cast<std::size_t>(c.runs));
  if (threads <= 1) {
    for (int k = 0; k < c.runs; ++k) runs[static_cast<std::size_t>(k)] = run_single(c, k, teacher);
  } else {
    for (int start = 0; start < c.runs; start += static_cast<int>(threads)) {
      std::vector<std::future<std::vector<EpisodeLog>>> batch;
      for (int k = start; k < std::min(c.runs, start + static_cast<int>(threads)); ++k)
        batch.push_back(std::async(std::launch::async, [&, k] { return run_single(c, k, teacher); }));
      for (std::size_t i = 0; i < batch.size(); ++i) runs[static_cast<std::size_t>(start) + i] = batch[i].get();
    }
  }
  for (int k = 0; k < c.runs; ++k) append_run(table, k, runs[static_cast<std::size_t>(k)]);
  return table;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepSpec {
  RunConfig base;
  std::vector<double> L;
  std::vector<double> C;
  std::vector<double> r_h;
  std::vector<RunMethod> methods;
  std::vector<Strategy> strategies;
};

/// Cartesian product of the sweep axes; an empty axis keeps the base value.
inline std::vector<RunConfig> combinations(const SweepSpec& spec) {
  auto axis = [](const auto& values, auto base) {
    using T = std::decay_t<decltype(base)>;
    return values.empty() ? std::vector<T>{base} : std::vector<T>(values.begin(), values.end());
  };
  std::vector<RunConfig> out;
  for (auto m : axis(spec.methods, spec.base.method))
    for (auto L : axis(spec.L, spec.base.L))
      for (auto C : axis(spec.C, spec.base.C))
        for (auto rh : axis(spec.r_h, spec.base.r_h))
          for (auto st : axis(spec.strategies, spec.base.strategy)) {
            RunConfig c = spec.base;
            c.method = m;
            c.L = L;
            c.C = C;
            c.r_h = rh;
            c.strategy = st;
            out.push_back(c);
          }
  return out;
}

/// Parses a sweep file: the RunConfig keys, where `L`, `C`, `r_h`, `method` and `strategy`
/// may hold comma-separated lists.
inline SweepSpec parse_sweep_text(std::string_view text) {
  std::vector<std::string> errors;
  auto kvs = detail::parse_key_values(text, errors);
  std::string base_text;
  SweepSpec spec;
  for (const auto& kv : kvs) {
    auto parts = detail::split(kv.value, ',');
    const bool axis = kv.key == "L" || kv.key == "C" || kv.key == "r_h" || kv.key == "method" || kv.key == "strategy";
    if (!axis) {
      base_text += kv.key + " = " + kv.value + "\n";
      continue;
    }
    for (auto p : parts) {
      auto fail = [&] { errors.push_back("line " + std::to_string(kv.line) + ": bad " + kv.key + " '" + std::string(p) + "'"); };
      if (kv.key == "method") {
        if (auto m = parse_run_method(p)) spec.methods.push_back(*m); else fail();
      } else if (kv.key == "strategy") {
        if (auto s = parse_strategy(p)) spec.strategies.push_back(*s); else fail();
      } else if (auto v = detail::parse_double(p)) {
        (kv.key == "L" ? spec.L : kv.key == "C" ? spec.C : spec.r_h).push_back(*v);
      } else {
        fail();
      }
    }
  }
  if (!errors.empty()) throw InvalidConfig(std::move(errors));
  spec.base = parse_config_text(base_text);
  std::vector<std::string> combo_errors;
  for (const auto& c : combinations(spec))
    for (auto& e : config_errors(c)) combo_errors.push_back(std::move(e));
  if (!combo_errors.empty()) throw InvalidConfig(std::move(combo_errors));
  return spec;
}

struct CombinationResult {
  RunConfig config;
  ResultTable table;
};

/// Runs every combination. Oracles are trained once per distinct training setup and shared
/// read-only. A failing combination is reported by its parameters.
inline std::vector<CombinationResult> run_experiment(const SweepSpec& spec, unsigned threads = 1) {
  std::map<std::string, std::shared_ptr<const TeacherQ>> oracles;
  std::vector<CombinationResult> results;
  for (const auto& c : combinations(spec)) {
    std::shared_ptr<const TeacherQ> teacher;
    if (needs_teacher(c)) {
      std::ostringstream key;
      key << to_string(c.env) << '/' << c.oracle_episodes << '/' << oracle_seed(c) << '/' << c.alpha << '/' << c.gamma
          << '/' << c.epsilon;
      auto& slot = oracles[key.str()];
      if (!slot) slot = std::make_shared<const TeacherQ>(train_teacher(c));
      teacher = slot;
    }
    try {
      results.push_back({c, run_config(c, teacher.get(), threads)});
    } catch (const std::exception& e) {
      throw std::runtime_error("combination method=" + std::string(to_string(c.method)) +
                               " L=" + detail::format_double(c.L) + " C=" + detail::format_double(c.C) +
                               " r_h=" + detail::format_double(c.r_h) + " strategy=" +
                               std::string(to_string(c.strategy)) + " failed: " + e.what());
    }
  }
  return results;
}

inline std::string combination_name(const RunConfig& c) {
  std::ostringstream os;
  os << to_string(c.env) << '_' << to_string(c.method) << "_L" << c.L << "_C" << c.C << "_rh" << c.r_h << '_'
     << to_string(c.strategy);
  return os.str();
}

// ---------------------------------------------------------------------------
// Series statistics

/// Trailing mean over the last `window` values; the first values average what is available.
inline std::vector<double> moving_average(std::span<const double> series, int window) {
  if (window < 1) throw std::invalid_argument("moving_average: window must be >= 1");
  std::vector<double> out(series.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    sum += series[i];
    if (i >= static_cast<std::size_t>(window)) sum -= series[i - static_cast<std::size_t>(window)];
    const auto n = std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
    out[i] = sum / static_cast<double>(n);
  }
  return out;
}

struct Threshold {
  double value = 0.0;
  /// Pac-Man uses "> 0"; Cart-Pole uses ">= 195".
  bool strict = false;

  bool reached(double v) const { return strict ? v > value : v >= value; }
};

inline Threshold convergence_threshold(EnvKind env) {
  return env == EnvKind::pacman ? Threshold{0.0, true} : Threshold{195.0, false};
}

/// Number of episodes until the first full window whose mean reaches the threshold
/// (1-based episode count at that window's end). Series that never reach it count as
/// their length.
inline int episodes_to_threshold(std::span<const double> series, int window, Threshold t) {
  if (window < 1) throw std::invalid_argument("episodes_to_threshold: window must be >= 1");
  double sum = 0.0;
  const auto w = static_cast<std::size_t>(window);
  for (std::size_t i = 0; i < series.size(); ++i) {
    sum += series[i];
    if (i >= w) sum -= series[i - w];
    if (i + 1 >= w && t.reached(sum / static_cast<double>(w))) return static_cast<int>(i + 1);
  }
  return static_cast<int>(series.size());
}

/// Mean of the last `window` values.
inline double final_average(std::span<const double> series, int window) {
  if (series.empty()) throw std::invalid_argument("final_average: empty series");
  const auto n = std::min<std::size_t>(series.size(), static_cast<std::size_t>(window));
  return std::accumulate(series.end() - static_cast<std::ptrdiff_t>(n), series.end(), 0.0) / static_cast<double>(n);
}

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;
};

inline MeanSd mean_sd(std::span<const double> xs) {
  if (xs.empty()) return {};
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() < 2) return {m, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

struct Summary {
  MeanSd final_return;
  MeanSd episodes_to_threshold;
  /// Fraction of episodes in which each method acted, keyed by method name.
  std::map<std::string, double> selection_frequency;
  std::vector<double> per_run_final;
  std::vector<double> per_run_episodes_to_threshold;
};

inline Summary summarize(const ResultTable& table, int window, Threshold threshold) {
  if (table.rows.empty()) throw std::invalid_argument("summarize: empty table");
  Summary s;
  for (int run = 0; run < table.run_count(); ++run) {
    const auto series = table.returns(run);
    if (series.empty()) continue;
    s.per_run_final.push_back(final_average(series, window));
    s.per_run_episodes_to_threshold.push_back(episodes_to_threshold(series, window, threshold));
  }
  s.final_return = mean_sd(s.per_run_final);
  s.episodes_to_threshold = mean_sd(s.per_run_episodes_to_threshold);
  for (const auto& r : table.rows) s.selection_frequency[r.method] += 1.0;
  for (auto& [_, v] : s.selection_frequency) v /= static_cast<double>(table.rows.size());
  return s;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_header(const ResultTable& t) {
  std::string h = "run,episode,method,return";
  for (auto m : t.portfolio) h += ",w_" + std::string(to_string(m));
  for (auto m : t.portfolio) h += ",p_" + std::string(to_string(m));
  return h;
}

inline std::string to_csv(const ResultTable& t) {
  std::ostringstream os;
  os << csv_header(t) << '\n';
  for (const auto& r : t.rows) {
    os << r.run << ',' << r.episode << ',' << r.method << ',' << detail::format_double(r.return_R);
    for (double w : r.weights) os << ',' << detail::format_double(w);
    for (double p : r.probabilities) os << ',' << detail::format_double(p);
    os << '\n';
  }
  return os.str();
}

inline void emit_csv(const ResultTable& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_csv(t);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline ResultTable parse_csv(std::string_view text) {
  ResultTable t;
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("csv: missing header");
  auto header = detail::split(line, ',');
  if (header.size() < 4 || header[0] != "run" || header[1] != "episode" || header[2] != "method" ||
      header[3] != "return" || (header.size() - 4) % 2 != 0)
    throw std::runtime_error("csv: unexpected header");
  const std::size_t k = (header.size() - 4) / 2;
  for (std::size_t i = 0; i < k; ++i) {
    auto m = parse_method_id(header[4 + i].substr(2));
    if (!m) throw std::runtime_error("csv: bad portfolio column");
    t.portfolio.push_back(*m);
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = detail::split(line, ',');
    if (cells.size() != header.size()) throw std::runtime_error("csv line " + std::to_string(line_no) + ": column count");
    ResultRow r;
    auto run = detail::parse_int<int>(cells[0]);
    auto ep = detail::parse_int<int>(cells[1]);
    auto ret = detail::parse_double(cells[3]);
    if (!run || !ep || !ret) throw std::runtime_error("csv line " + std::to_string(line_no) + ": bad number");
    r.run = *run;
    r.episode = *ep;
    r.method = std::string(cells[2]);
    r.return_R = *ret;
    for (std::size_t i = 0; i < 2 * k; ++i) {
      auto v = detail::parse_double(cells[4 + i]);
      if (!v) throw std::runtime_error("csv line " + std::to_string(line_no) + ": bad number");
      (i < k ? r.weights : r.probabilities).push_back(*v);
    }
    t.rows.push_back(std::move(r));
  }
  return t;
}

}  // namespace interrl
