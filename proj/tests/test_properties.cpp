#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "interrl/adaptive.hpp"
#include "interrl/harness.hpp"
#include "interrl/shaping.hpp"
#include "interrl/teacher.hpp"
#include "interrl/trainer.hpp"
#include "trajectory.hpp"

using namespace interrl;
using namespace traj;

namespace {

constexpr std::array kAllMethods{MethodId::Q, MethodId::AB, MethodId::CS, MethodId::RS, MethodId::QA};

std::vector<double> random_row(Rng& rng, std::size_t n, double scale = 50.0) {
  std::vector<double> row(n);
  for (auto& v : row) v = rng.uniform(-scale, scale);
  return row;
}

Advice random_advice(Rng& rng, std::size_t n) {
  if (rng.bernoulli(0.2)) return Advice::none(n);
  Advice a{make_feedback_vector(Action{rng.index(n)}, rng.uniform(0.5, 20.0), n), std::nullopt};
  if (rng.bernoulli(0.3)) a.value_row = random_row(rng, n);
  return a;
}

}  // namespace

TEST(Property, ActionDistributionsSumToOne) {
  Rng rng(101, Stream::agent);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 2 + rng.index(4);
    const auto row = random_row(rng, n);
    const auto adv = random_advice(rng, n);
    const double B = rng.uniform(0.0, 2.0), eps = rng.uniform();
    for (auto m : kAllMethods) {
      auto p = method_action_distribution(m, row, adv, B, eps);
      ASSERT_EQ(p.size(), n);
      double total = 0;
      for (double v : p) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-12) << to_string(m);
    }
  }
}

TEST(Property, TdUpdateMovesTowardTarget) {
  Rng rng(102, Stream::agent);
  for (int trial = 0; trial < 1000; ++trial) {
    QTable q(3);
    const StateId s{1}, next{2};
    for (std::size_t a = 0; a < 3; ++a) {
      q.set(s, Action{a}, rng.uniform(-10, 10));
      q.set(next, Action{a}, rng.uniform(-10, 10));
    }
    LearnerParams p{rng.uniform(0.01, 1.0), rng.uniform(0.01, 0.99), 0.1};
    const double r = rng.uniform(-5, 5);
    const bool absorbing = rng.bernoulli(0.3);
    const Action a{rng.index(3)};
    auto nrow = q.row(next);
    const double target = r + (absorbing ? 0.0 : p.gamma * *std::max_element(nrow.begin(), nrow.end()));
    const double before = q.value(s, a);
    const double after = q_update(q, s, a, r, next, absorbing, p);
    EXPECT_NEAR(std::abs(after - target), (1 - p.alpha) * std::abs(before - target), 1e-9);
  }
}

TEST(Property, BiasingIsShiftInvariant) {
  Rng rng(103, Stream::agent);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.index(3);
    const auto row = random_row(rng, n);
    const auto adv = random_advice(rng, n);
    const double c = rng.uniform(-1000, 1000);
    std::vector<double> shifted = row;
    for (auto& v : shifted) v += c;
    const double B = rng.uniform(0, 1), eps = rng.uniform(0, 0.5);
    for (auto m : {MethodId::AB, MethodId::QA})
      EXPECT_EQ(method_action_distribution(m, row, adv, B, eps), method_action_distribution(m, shifted, adv, B, eps));
  }
}

TEST(Property, RewardShapingIsQLearningOnShapedReward) {
  Rng rng(104, Stream::agent);
  LearnerParams p{0.3, 0.9, 0.1};
  QTable shaped(4), manual(4);
  for (int step = 0; step < 5000; ++step) {
    const StateId s{rng.index(10)}, next{rng.index(10)};
    const Action a{rng.index(4)};
    const double r = rng.uniform(-1, 1), B = rng.uniform(0, 1);
    const auto adv = random_advice(rng, 4);
    const bool absorbing = rng.bernoulli(0.1);
    q_update(shaped, s, a, learning_reward(MethodId::RS, r, a, adv, B), next, absorbing, p);
    q_update(manual, s, a, r + B * adv.H[a], next, absorbing, p);
  }
  EXPECT_EQ(shaped, manual);
}

TEST(Property, SoftmaxShiftInvariantAndMonotone) {
  Rng rng(105, Stream::selector);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 2 + rng.index(4);
    PortfolioState ps(std::vector<MethodId>(kAllMethods.begin(), kAllMethods.begin() + static_cast<long>(k)),
                      rng.uniform(0, 10), 0.1);
    ps.weights = random_row(rng, k, 20.0);
    const auto p = method_probabilities(ps);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);

    PortfolioState shifted = ps;
    const double c = rng.uniform(-100, 100);
    for (auto& w : shifted.weights) w += c;
    const auto ps2 = method_probabilities(shifted);
    for (std::size_t i = 0; i < k; ++i) EXPECT_NEAR(p[i], ps2[i], 1e-9);

    PortfolioState raised = ps;
    const std::size_t i = rng.index(k);
    raised.weights[i] += rng.uniform(0.01, 1.0);
    EXPECT_GE(method_probabilities(raised)[i], p[i]);
  }
}

TEST(Property, WeightsStayWithinObservedReturns) {
  Rng rng(106, Stream::selector);
  for (int trial = 0; trial < 200; ++trial) {
    PortfolioState ps({MethodId::AB, MethodId::CS, MethodId::RS}, 5.0, rng.uniform(0, 1));
    double lo = 0, hi = 0;
    for (int ep = 0; ep < 100; ++ep) {
      const double R = rng.uniform(-600, 600);
      lo = std::min(lo, R);
      hi = std::max(hi, R);
      std::vector<double> share(3);
      for (auto& s : share) s = rng.uniform();
      const double total = share[0] + share[1] + share[2];
      for (auto& s : share) s /= total;
      ps = update_weights(ps, share, R);
      for (double w : ps.weights) {
        ASSERT_GE(w, lo - 1e-9);
        ASSERT_LE(w, hi + 1e-9);
      }
    }
  }
}

TEST(Property, LogSpaceSharesMatchDirectProducts) {
  Rng rng(107, Stream::selector);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t k = 2 + rng.index(4);
    const int steps = 1 + static_cast<int>(rng.index(20));
    SimilarityAccumulator acc(k);
    std::vector<double> prod(k, 1.0);
    for (int t = 0; t < steps; ++t) {
      std::vector<double> p(k);
      for (std::size_t i = 0; i < k; ++i) {
        p[i] = rng.uniform(0.01, 1.0);
        prod[i] *= p[i];
      }
      acc = accumulate(acc, p);
    }
    const double total = std::accumulate(prod.begin(), prod.end(), 0.0);
    const auto s = shares(acc);
    for (std::size_t i = 0; i < k; ++i) EXPECT_NEAR(s[i], prod[i] / total, 1e-9);
  }
}

TEST(Property, DegeneracyPacman) {
  for (const auto& f : degeneracy_failures<PacmanEnv>(EnvKind::pacman)) ADD_FAILURE() << f;
}

TEST(Property, DegeneracyCartpole) {
  for (const auto& f : degeneracy_failures<CartpoleEnv>(EnvKind::cartpole)) ADD_FAILURE() << f;
}

TEST(Property, PacmanReturnIdentityAndFoodMonotone) {
  Rng env_rng(108, Stream::env), act(108, Stream::agent);
  int wins = 0, losses = 0;
  for (int ep = 0; ep < 3000; ++ep) {
    PacmanState s = pacman_reset();
    double R = 0;
    int steps = 0;
    std::optional<bool> won;
    while (!s.terminal()) {
      auto o = pacman_step(s, Action{act.index(4)}, env_rng);
      EXPECT_EQ(o.next_state.food_mask & ~s.food_mask, 0);
      EXPECT_TRUE(pacman::inside(o.next_state.pacman_pos));
      EXPECT_TRUE(pacman::inside(o.next_state.ghost_pos));
      R += o.reward;
      ++steps;
      won = o.won;
      s = o.next_state;
    }
    ASSERT_TRUE(won.has_value());
    const int eaten = 2 - s.foods_left();
    const double expected = -steps + 10.0 * eaten + (*won ? 500.0 : -500.0);
    EXPECT_DOUBLE_EQ(R, expected);
    (*won ? wins : losses)++;
  }
  EXPECT_GT(wins, 0);
  EXPECT_GT(losses, 0);
}

TEST(Property, CartpoleReturnIdentity) {
  Rng env_rng(109, Stream::env), act(109, Stream::agent);
  for (int ep = 0; ep < 500; ++ep) {
    CartpoleEnv env;
    env.reset(env_rng);
    double R = 0;
    int steps = 0;
    while (!env.done()) {
      // A biased random policy so that some episodes survive longer.
      const bool lean = env.state().theta + 0.3 * env.state().theta_dot > 0;
      auto t = env.step(act.bernoulli(0.8) == lean ? cartpole::kRight : cartpole::kLeft, env_rng);
      R += t.reward;
      ++steps;
    }
    EXPECT_DOUBLE_EQ(R, steps - 2.0 * env.state().failed());
    EXPECT_LE(steps, cartpole::kMaxSteps);
  }
}

TEST(Property, EnvironmentsAreDeterministicGivenSeeds) {
  for (std::uint64_t seed : {1u, 7u, 99u}) {
    auto a = trajectory<PacmanEnv>(settings_for(EnvKind::pacman, MethodId::Q, 1.0), seed, 20, false);
    auto b = trajectory<PacmanEnv>(settings_for(EnvKind::pacman, MethodId::Q, 1.0), seed, 20, false);
    EXPECT_TRUE(same_steps(a.steps, b.steps));
    auto c = trajectory<CartpoleEnv>(settings_for(EnvKind::cartpole, MethodId::Q, 1.0), seed, 20, false);
    auto d = trajectory<CartpoleEnv>(settings_for(EnvKind::cartpole, MethodId::Q, 1.0), seed, 20, false);
    EXPECT_TRUE(same_steps(c.steps, d.steps));
  }
}

TEST(Property, SporadicRateAndConsistency) {
  QTable q(4);
  q.set(StateId{0}, Action{2}, 1.0);
  const TeacherQ teacher(std::move(q));
  for (double L : {0.05, 0.3, 0.9})
    for (double C : {0.2, 0.8}) {
      OracleParams p;
      p.L = L;
      p.C = C;
      p.strategy = Strategy::sporadic;
      Rng rng(110, Stream::teacher);
      const int n = 50000;
      int spoke = 0, right = 0;
      for (int i = 0; i < n; ++i)
        if (auto sig = query(teacher, p, StateId{0}, 0, 100, rng)) {
          ++spoke;
          right += sig->suggested_action == Action{2};
        }
      EXPECT_NEAR(spoke, n * L, 3 * std::sqrt(n * L * (1 - L)));
      EXPECT_NEAR(right, spoke * C, 3 * std::sqrt(spoke * C * (1 - C)));
    }
}

TEST(Property, ConfigTextRoundTrip) {
  Rng rng(111, Stream::agent);
  for (int trial = 0; trial < 500; ++trial) {
    RunConfig c = default_config(rng.bernoulli(0.5) ? EnvKind::pacman : EnvKind::cartpole);
    c.method = static_cast<RunMethod>(rng.index(6));
    c.episodes = 1 + static_cast<int>(rng.index(50000));
    c.runs = 1 + static_cast<int>(rng.index(50));
    c.seed = rng.engine()();
    c.alpha = rng.uniform(0.001, 1.0);
    c.gamma = rng.uniform(0.001, 0.999);
    c.epsilon = rng.uniform();
    c.B0 = rng.uniform(0, 3);
    c.B_decrement = rng.uniform(0, 0.01);
    c.r_h = rng.uniform(0.1, 200);
    c.beta = rng.uniform(0, 10);
    c.tau = rng.uniform();
    c.L = rng.uniform();
    c.C = rng.uniform();
    c.strategy = static_cast<Strategy>(rng.index(3));
    c.q_access = rng.bernoulli(0.5);
    if (rng.bernoulli(0.5)) c.disable_at = static_cast<int>(rng.index(1000));
    c.oracle_episodes = 1 + static_cast<int>(rng.index(40000));
    c.portfolio = {MethodId::AB, MethodId::RS};
    if (rng.bernoulli(0.5)) c.portfolio.push_back(MethodId::Q);
    EXPECT_EQ(parse_config_text(to_config_text(c)), c);
  }
}
