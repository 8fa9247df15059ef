#pragma once

// Adaptive selection over a portfolio of shaping methods: a softmax over per-method weights
// picks the method for each episode; after the episode every weight moves toward the
// episode return in proportion to how likely that method was to produce the observed actions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "interrl/core.hpp"
#include "interrl/rng.hpp"

namespace interrl {

struct PortfolioState {
  std::vector<MethodId> methods;
  std::vector<double> weights;
  double beta = 5.0;
  double tau = 0.1;

  PortfolioState() = default;
  PortfolioState(std::vector<MethodId> ms, double beta_, double tau_)
      : methods(std::move(ms)), weights(methods.size(), 0.0), beta(beta_), tau(tau_) {
    if (methods.empty()) throw std::invalid_argument("portfolio must not be empty");
  }

  std::size_t size() const { return methods.size(); }
};

/// P(m_i) = exp(beta (w_i - min w)) / sum_j exp(beta (w_j - min w)).
inline std::vector<double> method_probabilities(const PortfolioState& ps) {
  if (ps.weights.empty()) throw std::invalid_argument("empty portfolio");
  for (double w : ps.weights)
    if (!std::isfinite(w)) throw std::invalid_argument("non-finite portfolio weight");
  const double lo = *std::min_element(ps.weights.begin(), ps.weights.end());
  std::vector<double> p(ps.weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(ps.beta * (ps.weights[i] - lo));
    total += p[i];
  }
  // Large beta*(w - min w) overflows; fall back to the equivalent max-shifted form.
  if (!std::isfinite(total)) {
    const double hi = *std::max_element(ps.weights.begin(), ps.weights.end());
    total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = std::exp(ps.beta * (ps.weights[i] - hi));
      total += p[i];
    }
  }
  for (auto& v : p) v /= total;
  return p;
}

/// Inverse-CDF draw; consumes exactly one uniform.
inline std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  return probs.size() - 1;
}

inline constexpr double kProbabilityFloor = 1e-12;

/// Running per-method log-similarity for one episode; starts at log 1 = 0.
struct SimilarityAccumulator {
  std::vector<double> log_sim;
  int step_count = 0;

  explicit SimilarityAccumulator(std::size_t n = 0) : log_sim(n, 0.0) {}
};

inline SimilarityAccumulator accumulate(SimilarityAccumulator acc, std::span<const double> per_method_prob) {
  if (per_method_prob.size() != acc.log_sim.size()) throw std::invalid_argument("accumulate: size mismatch");
  for (std::size_t i = 0; i < per_method_prob.size(); ++i) {
    const double p = per_method_prob[i];
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("accumulate: probability outside [0,1]");
    acc.log_sim[i] += std::log(std::max(p, kProbabilityFloor));
  }
  ++acc.step_count;
  return acc;
}

/// sim_i / sum_j sim_j, evaluated with log-sum-exp.
inline std::vector<double> shares(const SimilarityAccumulator& acc) {
  if (acc.log_sim.empty()) throw std::invalid_argument("shares: empty accumulator");
  const double hi = *std::max_element(acc.log_sim.begin(), acc.log_sim.end());
  std::vector<double> out(acc.log_sim.size());
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(acc.log_sim[i] - hi);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

/// w_i += tau * share_i * (R - w_i) for every method.
inline PortfolioState update_weights(PortfolioState ps, std::span<const double> share, double R) {
  if (share.size() != ps.weights.size()) throw std::invalid_argument("update_weights: size mismatch");
  for (std::size_t i = 0; i < share.size(); ++i) ps.weights[i] += ps.tau * share[i] * (R - ps.weights[i]);
  return ps;
}

}  // namespace interrl
