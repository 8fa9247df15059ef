#pragma once

// Simulated teacher: a converged Q-learning table that gives advice with a configurable
// likelihood (L), consistency (C) and temporal strategy, and that can be switched to
// deliberately wrong advice from a given episode on.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "interrl/core.hpp"
#include "interrl/environments.hpp"
#include "interrl/qlearning.hpp"
#include "interrl/rng.hpp"

namespace interrl {

struct OracleParams {
  double L = 0.01;
  double C = 0.8;
  Strategy strategy = Strategy::early;
  double r_h = 10.0;
  bool q_access = false;
  std::optional<int> disable_at;
};

inline OracleParams oracle_params(const RunConfig& c) {
  return {c.L, c.C, c.strategy, c.r_h, c.q_access, c.disable_at};
}

/// Frozen teacher values.
class TeacherQ {
 public:
  explicit TeacherQ(QTable q) : q_(std::move(q)) {}

  const QTable& table() const { return q_; }
  std::size_t action_count() const { return q_.action_count(); }
  Action best(StateId s) const { return greedy_action(q_.row(s)); }
  Action worst(StateId s) const { return worst_action(q_.row(s)); }
  std::span<const double> values(StateId s) const { return q_.row(s); }

 private:
  QTable q_;
};

/// Per-step probability that the teacher speaks. Early and late give advice at every step
/// of the first (last) ceil(L*N) episodes; sporadic gives it with probability L everywhere.
inline double advice_probability(Strategy strategy, double L, int episode, int total_episodes) {
  if (strategy == Strategy::sporadic) return L;
  // Guard against L*N landing a hair above an integer.
  const int window = static_cast<int>(std::ceil(L * total_episodes - 1e-9));
  if (strategy == Strategy::early) return episode < window ? 1.0 : 0.0;
  return episode >= total_episodes - window ? 1.0 : 0.0;
}

namespace detail {

/// A permutation of `row` that puts its largest value on `target`, the rest shuffled.
inline std::vector<double> misleading_row(std::span<const double> row, Action target, Rng& rng) {
  std::vector<double> out(row.size());
  const Action top = greedy_action(row);
  std::vector<double> rest;
  for (std::size_t i = 0; i < row.size(); ++i)
    if (i != top.index) rest.push_back(row[i]);
  std::shuffle(rest.begin(), rest.end(), rng.engine());
  out[target.index] = row[top.index];
  std::size_t k = 0;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (i != target.index) out[i] = rest[k++];
  return out;
}

}  // namespace detail

/// Draws the teacher's response for one step. Correct advice is the teacher's greedy action
/// (probability C); incorrect advice is uniform over the other actions. Once disabled, the
/// teacher always names its worst action.
inline std::optional<FeedbackSignal> query(const TeacherQ& oracle, const OracleParams& p, StateId s, int episode,
                                           int total_episodes, Rng& rng) {
  const double prob = advice_probability(p.strategy, p.L, episode, total_episodes);
  if (prob <= 0.0) return std::nullopt;
  if (prob < 1.0 && !rng.bernoulli(prob)) return std::nullopt;

  const auto values = oracle.values(s);
  const Action best = greedy_action(values);
  const std::size_t n = values.size();

  FeedbackSignal sig;
  sig.origin = Origin::simulated;
  bool correct = true;
  if (p.disable_at && episode >= *p.disable_at) {
    sig.suggested_action = worst_action(values);
    correct = sig.suggested_action == best;
  } else if (n > 1 && !rng.bernoulli(p.C)) {
    std::size_t pick = rng.index(n - 1);
    if (pick >= best.index) ++pick;
    sig.suggested_action = Action{pick};
    correct = false;
  } else {
    sig.suggested_action = best;
  }

  if (p.q_access) {
    if (correct)
      sig.value_row = std::vector<double>(values.begin(), values.end());
    else
      sig.value_row = detail::misleading_row(values, sig.suggested_action, rng);
  }
  return sig;
}

/// The per-step shaping input derived from the teacher, or "no advice".
inline Advice teacher_advice(const TeacherQ& oracle, const OracleParams& p, StateId s, int episode,
                             int total_episodes, Rng& rng) {
  auto sig = query(oracle, p, s, episode, total_episodes, rng);
  if (!sig) return Advice::none(oracle.action_count());
  return Advice::from_signal(*sig, p.r_h, oracle.action_count());
}

// ---------------------------------------------------------------------------
// Training and evaluation

/// Plain epsilon-greedy Q-learning for `episodes` episodes; the resulting table is frozen.
template <Environment Env>
TeacherQ train_oracle(Env env, int episodes, const LearnerParams& params, std::uint64_t seed) {
  Rng agent(seed, Stream::oracle);
  Rng world(seed, Stream::env);
  QTable q(env.action_count());
  for (int ep = 0; ep < episodes; ++ep) {
    StateId s = env.reset(world);
    while (!env.done()) {
      const Action a = eps_greedy(q.row(s), params.epsilon, agent);
      const Transition t = env.step(a, world);
      q_update(q, s, a, t.reward, t.next, t.absorbing(), params);
      s = t.next;
    }
  }
  return TeacherQ(std::move(q));
}

/// Mean undiscounted return of the greedy policy over `episodes` episodes.
template <Environment Env>
double evaluate_greedy(Env env, const QTable& q, int episodes, std::uint64_t seed) {
  Rng world(seed, Stream::env);
  double total = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    StateId s = env.reset(world);
    while (!env.done()) {
      const Transition t = env.step(greedy_action(q.row(s)), world);
      total += t.reward;
      s = t.next;
    }
  }
  return total / episodes;
}

}  // namespace interrl
