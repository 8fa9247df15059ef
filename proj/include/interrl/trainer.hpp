#pragma once

// Step-granular training loop shared by the batch harness and the live gateway.
//
// A Trainer owns one environment, one Q-table and the random streams of a single run.
// It either runs one fixed shaping method or, with a portfolio, samples a method per
// episode and updates the portfolio weights when the episode ends. All methods of a
// portfolio read and write the same Q-table.

#include <optional>
#include <vector>

#include "interrl/adaptive.hpp"
#include "interrl/core.hpp"
#include "interrl/environments.hpp"
#include "interrl/qlearning.hpp"
#include "interrl/rng.hpp"
#include "interrl/shaping.hpp"

namespace interrl {

struct TrainerSettings {
  LearnerParams learner;
  ShapingParams shaping;
  MethodId method = MethodId::Q;
  /// When set, the trainer runs the adaptive selector over this portfolio.
  std::optional<PortfolioState> portfolio;
};

inline TrainerSettings trainer_settings(const RunConfig& c) {
  TrainerSettings s;
  s.learner = {c.alpha, c.gamma, c.epsilon};
  s.shaping = {c.B0, c.B_decrement, c.r_h};
  if (c.method == RunMethod::AL)
    s.portfolio = PortfolioState(c.portfolio, c.beta, c.tau);
  else
    s.method = static_cast<MethodId>(c.method);
  return s;
}

struct EpisodeLog {
  int episode = 0;
  MethodId method_chosen = MethodId::Q;
  /// Sum of environment rewards (shaping never enters it).
  double return_R = 0.0;
  int steps = 0;
  int advised_steps = 0;
  std::optional<bool> won;
  /// Adaptive runs only: similarity shares, and weights / selection probabilities after
  /// the end-of-episode update.
  std::vector<double> shares;
  std::vector<double> weights;
  std::vector<double> probabilities;
};

struct StepRecord {
  StateId state;
  Action action;
  double reward = 0.0;
  StateId next;
  bool advised = false;
};

struct StepReport {
  StepRecord record;
  /// Present on the step that ended the episode.
  std::optional<EpisodeLog> finished;
};

template <Environment Env>
class Trainer {
 public:
  Trainer(Env env, TrainerSettings settings, std::uint64_t seed)
      : env_(std::move(env)),
        settings_(std::move(settings)),
        q_(env_.action_count()),
        agent_rng_(seed, Stream::agent),
        env_rng_(seed, Stream::env),
        selector_rng_(seed, Stream::selector) {}

  bool adaptive() const { return settings_.portfolio.has_value(); }
  bool in_episode() const { return in_episode_; }
  int episode() const { return episode_; }
  int step_in_episode() const { return current_.steps; }
  StateId state() const { return state_; }
  MethodId current_method() const { return current_.method_chosen; }
  double B() const { return settings_.shaping.B; }
  std::size_t action_count() const { return env_.action_count(); }

  const QTable& q() const { return q_; }
  const Env& env() const { return env_; }
  const TrainerSettings& settings() const { return settings_; }
  const std::optional<PortfolioState>& portfolio() const { return settings_.portfolio; }

  /// Resets the environment and, for adaptive runs, samples this episode's method.
  void begin_episode() {
    if (in_episode_) throw ContractViolation("begin_episode while an episode is running");
    current_ = EpisodeLog{};
    current_.episode = episode_;
    if (auto& ps = settings_.portfolio) {
      const auto probs = method_probabilities(*ps);
      current_.method_chosen = ps->methods[sample_index(probs, selector_rng_)];
      similarity_ = SimilarityAccumulator(ps->size());
    } else {
      current_.method_chosen = settings_.method;
    }
    state_ = env_.reset(env_rng_);
    in_episode_ = true;
  }

  /// One decision, environment step and TD update under the given advice.
  StepReport step(const Advice& advice) {
    if (!in_episode_) throw ContractViolation("step outside an episode");
    if (advice.H.size() != env_.action_count()) throw std::invalid_argument("advice has wrong action count");

    const MethodId m = current_.method_chosen;
    const double B = settings_.shaping.B;
    const double eps = settings_.learner.epsilon;
    const StateId s = state_;
    const auto row = q_.row(s);
    const Action a = select_action(m, row, advice, B, eps, agent_rng_);

    if (auto& ps = settings_.portfolio) {
      probs_.resize(ps->size());
      for (std::size_t i = 0; i < ps->size(); ++i)
        probs_[i] = method_action_distribution(ps->methods[i], row, advice, B, eps)[a.index];
      similarity_ = accumulate(std::move(similarity_), probs_);
    }

    const Transition t = env_.step(a, env_rng_);
    q_update(q_, s, a, learning_reward(m, t.reward, a, advice, B), t.next, t.absorbing(), settings_.learner);

    current_.return_R += t.reward;
    ++current_.steps;
    if (advice.present()) ++current_.advised_steps;
    state_ = t.next;

    StepReport report{{s, a, t.reward, t.next, advice.present()}, std::nullopt};
    if (t.terminal) {
      current_.won = t.won;
      report.finished = finish_episode();
    }
    return report;
  }

 private:
  EpisodeLog finish_episode() {
    if (auto& ps = settings_.portfolio) {
      current_.shares = shares(similarity_);
      *ps = update_weights(std::move(*ps), current_.shares, current_.return_R);
      current_.weights = ps->weights;
      current_.probabilities = method_probabilities(*ps);
    }
    settings_.shaping = decay_B(settings_.shaping);
    in_episode_ = false;
    ++episode_;
    return current_;
  }

  Env env_;
  TrainerSettings settings_;
  QTable q_;
  Rng agent_rng_;
  Rng env_rng_;
  Rng selector_rng_;

  bool in_episode_ = false;
  int episode_ = 0;
  StateId state_{};
  EpisodeLog current_;
  SimilarityAccumulator similarity_;
  std::vector<double> probs_;
};

/// Runs one full episode, asking `advice_for(state, episode)` before every decision.
template <Environment Env, class AdviceFn>
EpisodeLog run_episode(Trainer<Env>& trainer, AdviceFn&& advice_for) {
  trainer.begin_episode();
  while (true) {
    auto report = trainer.step(advice_for(trainer.state(), trainer.episode()));
    if (report.finished) return *report.finished;
  }
}

}  // namespace interrl
