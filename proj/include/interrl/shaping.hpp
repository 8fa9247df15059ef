#pragma once

// The four explicit combiners of human feedback with Q-learning (action biasing, control
// sharing, reward shaping, Q augmentation) and the per-method action distribution that the
// adaptive selector uses to compare methods.

#include <algorithm>
#include <span>
#include <stdexcept>
#include <vector>

#include "interrl/core.hpp"
#include "interrl/qlearning.hpp"
#include "interrl/rng.hpp"

namespace interrl {

struct ShapingParams {
  double B = 1.0;
  double B_decrement = 0.0;
  double r_h = 10.0;
};

/// End-of-episode decay, floored at zero.
inline ShapingParams decay_B(ShapingParams p) {
  p.B = std::max(0.0, p.B - p.B_decrement);
  return p;
}

namespace detail {

inline void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

}  // namespace detail

/// Elementwise Q + B * H_v. Selection-time only; nothing is written back to the table.
inline std::vector<double> qa_augment(std::span<const double> q_row, std::span<const double> h_v, double B) {
  detail::require_same_length(q_row.size(), h_v.size(), "qa_augment");
  std::vector<double> out(q_row.begin(), q_row.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B * h_v[i];
  return out;
}

inline double rs_shape_reward(double r, double h_entry, double B) { return r + B * h_entry; }

inline Action ab_select(std::span<const double> q_row, const FeedbackVector& H, double B, double eps, Rng& rng) {
  detail::require_same_length(q_row.size(), H.size(), "ab_select");
  return eps_greedy(qa_augment(q_row, H.entries(), B), eps, rng);
}

/// Probability that control sharing hands the decision to the teacher.
inline double follow_probability(double B) { return std::clamp(B, 0.0, 1.0); }

/// With feedback present, follows the suggested action with probability min(B, 1), otherwise
/// acts epsilon-greedily on Q. The coin is only drawn when the outcome is uncertain, so B = 0
/// and B >= 1 consume exactly the random numbers of plain selection.
inline Action cs_select(std::span<const double> q_row, const FeedbackVector& H, double B, double eps, Rng& rng) {
  detail::require_same_length(q_row.size(), H.size(), "cs_select");
  if (H.present()) {
    const double p = follow_probability(B);
    const bool follow = p >= 1.0 || (p > 0.0 && rng.bernoulli(p));
    if (follow) return *H.suggested();
  }
  return eps_greedy(q_row, eps, rng);
}

/// The values QA adds to Q: the teacher's own value row when it was shared, else H.
inline std::span<const double> qa_values(const Advice& advice) {
  if (advice.value_row && advice.H.present()) return *advice.value_row;
  return advice.H.entries();
}

/// The action method `m` takes at a state with value row `q_row`.
inline Action select_action(MethodId m, std::span<const double> q_row, const Advice& advice, double B, double eps,
                            Rng& rng) {
  switch (m) {
    case MethodId::Q:
    case MethodId::RS: return eps_greedy(q_row, eps, rng);
    case MethodId::AB: return ab_select(q_row, advice.H, B, eps, rng);
    case MethodId::CS: return cs_select(q_row, advice.H, B, eps, rng);
    case MethodId::QA: return eps_greedy(qa_augment(q_row, qa_values(advice), B), eps, rng);
  }
  throw std::invalid_argument("unknown method id");
}

/// Reward fed to the TD update. Only reward shaping alters it.
inline double learning_reward(MethodId m, double r, Action a, const Advice& advice, double B) {
  if (m == MethodId::RS) return rs_shape_reward(r, advice.H[a], B);
  return r;
}

/// The exact action distribution method `m` would use. Reward shaping is ranked by Q + B*H,
/// the preference its shaped reward expresses, even though it acts on Q alone.
inline std::vector<double> method_action_distribution(MethodId m, std::span<const double> q_row, const Advice& advice,
                                                      double B, double eps) {
  detail::require_same_length(q_row.size(), advice.H.size(), "method_action_distribution");
  switch (m) {
    case MethodId::Q: return eps_greedy_distribution(q_row, eps);
    case MethodId::AB:
    case MethodId::RS: return eps_greedy_distribution(qa_augment(q_row, advice.H.entries(), B), eps);
    case MethodId::QA: return eps_greedy_distribution(qa_augment(q_row, qa_values(advice), B), eps);
    case MethodId::CS: {
      auto agent = eps_greedy_distribution(q_row, eps);
      if (!advice.H.present()) return agent;
      const double p = follow_probability(B);
      for (auto& v : agent) v *= 1.0 - p;
      agent[advice.H.suggested()->index] += p;
      return agent;
    }
  }
  throw std::invalid_argument("unknown method id");
}

}  // namespace interrl
