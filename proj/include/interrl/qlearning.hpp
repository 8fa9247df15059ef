#pragma once

// Tabular Q-learning: value storage, epsilon-greedy selection, the TD update, and
// the epsilon-greedy action distribution.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "interrl/core.hpp"
#include "interrl/rng.hpp"

namespace interrl {

struct LearnerParams {
  double alpha = 0.3;
  double gamma = 0.7;
  double epsilon = 0.1;
};

/// Action values keyed by discrete state. Unseen states read as all zeros.
class QTable {
 public:
  explicit QTable(std::size_t action_count) : action_count_(action_count), zeros_(action_count, 0.0) {
    if (action_count == 0) throw std::invalid_argument("QTable needs at least one action");
  }

  std::size_t action_count() const { return action_count_; }
  std::size_t state_count() const { return index_.size(); }

  std::span<const double> row(StateId s) const {
    auto it = index_.find(s.key);
    if (it == index_.end()) return zeros_;
    return {values_.data() + it->second * action_count_, action_count_};
  }

  double value(StateId s, Action a) const { return row(s)[a.index]; }

  std::span<double> mutable_row(StateId s) {
    auto [it, inserted] = index_.try_emplace(s.key, index_.size());
    if (inserted) {
      values_.resize(values_.size() + action_count_, 0.0);
      visits_.resize(visits_.size() + action_count_, 0);
    }
    return {values_.data() + it->second * action_count_, action_count_};
  }

  void set(StateId s, Action a, double v) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite Q value");
    mutable_row(s)[a.index] = v;
  }

  std::uint64_t visits(StateId s, Action a) const {
    auto it = index_.find(s.key);
    return it == index_.end() ? 0 : visits_[it->second * action_count_ + a.index];
  }

  void count_visit(StateId s, Action a) {
    mutable_row(s);
    ++visits_[index_.at(s.key) * action_count_ + a.index];
  }

  /// Rows ordered by state key.
  std::map<std::uint64_t, std::vector<double>> sorted_rows() const {
    std::map<std::uint64_t, std::vector<double>> out;
    for (const auto& [key, slot] : index_) {
      auto begin = values_.begin() + static_cast<std::ptrdiff_t>(slot * action_count_);
      out.emplace(key, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(action_count_)));
    }
    return out;
  }

  friend bool operator==(const QTable& a, const QTable& b) {
    return a.action_count_ == b.action_count_ && a.sorted_rows() == b.sorted_rows();
  }

 private:
  std::size_t action_count_;
  std::vector<double> zeros_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<double> values_;
  std::vector<std::uint64_t> visits_;
};

/// Lowest index wins ties.
inline Action greedy_action(std::span<const double> row) {
  if (row.empty()) throw ContractViolation("greedy_action on an empty row");
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[best]) best = i;
  return Action{best};
}

inline Action worst_action(std::span<const double> row) {
  if (row.empty()) throw ContractViolation("worst_action on an empty row");
  std::size_t worst = 0;
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] < row[worst]) worst = i;
  return Action{worst};
}

/// Explores with probability eps (uniform over all actions, greedy included), otherwise
/// takes the greedy action. Consumes one draw, plus one more when exploring.
inline Action eps_greedy(std::span<const double> row, double eps, Rng& rng) {
  if (row.empty()) throw ContractViolation("eps_greedy on an empty row");
  if (rng.uniform() < eps) return Action{rng.index(row.size())};
  return greedy_action(row);
}

inline Action select_eps_greedy(const QTable& q, StateId s, double eps, std::span<const Action> actions, Rng& rng) {
  if (actions.empty()) throw ContractViolation("select_eps_greedy with an empty action set");
  auto row = q.row(s);
  if (rng.uniform() < eps) return actions[rng.index(actions.size())];
  Action best = actions.front();
  for (auto a : actions)
    if (row[a.index] > row[best.index]) best = a;
  return best;
}

/// Probability each action is chosen by eps_greedy over `row`.
inline std::vector<double> eps_greedy_distribution(std::span<const double> row, double eps) {
  if (row.empty()) throw ContractViolation("eps_greedy_distribution on an empty row");
  const double n = static_cast<double>(row.size());
  std::vector<double> p(row.size(), eps / n);
  p[greedy_action(row).index] += 1.0 - eps;
  return p;
}

inline std::vector<double> action_distribution(const QTable& q, StateId s, double eps) {
  return eps_greedy_distribution(q.row(s), eps);
}

/// One-step TD update toward r + gamma * max Q(s', .); the bootstrap term is dropped for
/// absorbing successors. Returns the new Q(s, a).
inline double q_update(QTable& q, StateId s, Action a, double r, StateId s_next, bool terminal,
                       const LearnerParams& p) {
  if (!std::isfinite(r)) throw std::invalid_argument("q_update: non-finite reward");
  double target = r;
  if (!terminal) {
    auto next = q.row(s_next);
    target += p.gamma * *std::max_element(next.begin(), next.end());
  }
  auto row = q.mutable_row(s);
  const double updated = row[a.index] + p.alpha * (target - row[a.index]);
  if (!std::isfinite(updated)) throw std::invalid_argument("q_update: non-finite result");
  row[a.index] = updated;
  q.count_visit(s, a);
  return updated;
}

// ---------------------------------------------------------------------------
// Snapshot format: one `state_key<TAB>a0,a1,...` line per stored state.

inline std::string to_snapshot_text(const QTable& q) {
  std::ostringstream os;
  for (const auto& [key, row] : q.sorted_rows()) {
    os << key << '\t';
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) os << ',';
      os << detail::format_double(row[i]);
    }
    os << '\n';
  }
  return os.str();
}

inline QTable parse_snapshot_text(std::string_view text, std::size_t action_count) {
  QTable q(action_count);
  int line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fail = [&](const std::string& why) {
      throw std::runtime_error("snapshot line " + std::to_string(line_no) + ": " + why);
    };
    auto tab = line.find('\t');
    if (tab == std::string::npos) fail("missing tab");
    auto key = detail::parse_int<std::uint64_t>(std::string_view(line).substr(0, tab));
    if (!key) fail("bad state key");
    auto parts = detail::split(std::string_view(line).substr(tab + 1), ',');
    if (parts.size() != action_count) fail("expected " + std::to_string(action_count) + " values");
    auto row = q.mutable_row(StateId{*key});
    for (std::size_t i = 0; i < parts.size(); ++i) {
      auto v = detail::parse_double(parts[i]);
      if (!v) fail("bad value");
      row[i] = *v;
    }
  }
  return q;
}

inline void save_snapshot(const QTable& q, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_snapshot_text(q);
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline QTable load_snapshot(const std::string& path, std::size_t action_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_snapshot_text(ss.str(), action_count);
}

}  // namespace interrl
