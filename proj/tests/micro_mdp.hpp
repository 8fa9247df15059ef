#pragma once

// Two-state task where following the teacher is strictly better than greedy Q-learning.
//
//   s0 --a0--> end, +0.1
//   s0 --a1--> s1,  -0.2
//   s1 --a1--> end, +1
//   s1 --a0--> end,  0
//
// With gamma = 0.05 the Q-learning target for (s0,a1) never exceeds -0.15, so the greedy
// learner always bails out with 0.1. A teacher that always suggests a1 steers action
// biasing through s1 for a return of 0.8.

#include <array>
#include <vector>

#include "interrl/teacher.hpp"
#include "interrl/trainer.hpp"

namespace micro {

using namespace interrl;

inline constexpr double kBail = 0.1;
inline constexpr double kDetour = -0.2;
inline constexpr double kGoal = 1.0;
inline constexpr double kMiss = 0.0;

class MicroEnv {
 public:
  std::size_t action_count() const { return 2; }
  StateId reset(Rng&) {
    state_ = 0;
    return StateId{0};
  }
  Transition step(Action a, Rng&) {
    if (state_ == 2) throw ContractViolation("micro env already finished");
    if (state_ == 0 && a.index == 0) return finish(kBail);
    if (state_ == 0) {
      state_ = 1;
      return {StateId{1}, kDetour, false, std::nullopt, false};
    }
    return finish(a.index == 1 ? kGoal : kMiss);
  }
  StateId state_id() const { return StateId{static_cast<std::uint64_t>(state_)}; }
  bool done() const { return state_ == 2; }

 private:
  Transition finish(double r) {
    state_ = 2;
    return {StateId{2}, r, true, std::nullopt, false};
  }
  int state_ = 0;
};

/// Returns of the four deterministic policies, indexed [action at s0][action at s1].
inline std::array<std::array<double, 2>, 2> policy_returns() {
  std::array<std::array<double, 2>, 2> out{};
  for (std::size_t a0 = 0; a0 < 2; ++a0)
    for (std::size_t a1 = 0; a1 < 2; ++a1) {
      MicroEnv env;
      Rng rng(0, Stream::env);
      env.reset(rng);
      double r = 0.0;
      auto t = env.step(Action{a0}, rng);
      r += t.reward;
      if (!t.terminal) r += env.step(Action{a1}, rng).reward;
      out[a0][a1] = r;
    }
  return out;
}

inline TeacherQ teacher() {
  QTable q(2);
  q.set(StateId{0}, Action{1}, 1.0);
  q.set(StateId{1}, Action{1}, 1.0);
  return TeacherQ(std::move(q));
}

inline OracleParams teacher_params() {
  OracleParams p;
  p.L = 1.0;
  p.C = 1.0;
  p.strategy = Strategy::sporadic;
  p.r_h = 1.0;
  return p;
}

inline TrainerSettings settings(std::optional<std::vector<MethodId>> portfolio, MethodId single = MethodId::Q) {
  TrainerSettings s;
  s.learner = {0.3, 0.05, 0.0};
  s.shaping = {1.0, 0.0, 1.0};
  s.method = single;
  if (portfolio) s.portfolio = PortfolioState(*portfolio, 5.0, 0.1);
  return s;
}

inline std::vector<EpisodeLog> run(TrainerSettings s, std::uint64_t seed, int episodes) {
  Trainer<MicroEnv> trainer(MicroEnv{}, std::move(s), seed);
  const TeacherQ oracle = teacher();
  const OracleParams p = teacher_params();
  Rng teacher_rng(seed, Stream::teacher);
  std::vector<EpisodeLog> logs;
  for (int ep = 0; ep < episodes; ++ep)
    logs.push_back(run_episode(trainer, [&](StateId st, int e) {
      return teacher_advice(oracle, p, st, e, episodes, teacher_rng);
    }));
  return logs;
}

}  // namespace micro
