#pragma once

// Small-grid Pac-Man and Cart-Pole, each with a discrete state encoder.

#include <array>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>

#include <json.hpp>

#include "interrl/core.hpp"
#include "interrl/rng.hpp"

namespace interrl {

template <class S>
struct EnvOutcome {
  S next_state;
  double reward = 0.0;
  bool terminal = false;
  /// Set on terminal steps: true for a win (all food eaten, or the pole survived the cap).
  std::optional<bool> won;
  /// Terminal only because of the step cap, so learners should still bootstrap.
  bool truncated = false;
};

// ---------------------------------------------------------------------------
// Pac-Man

struct Cell {
  int col = 0;
  int row = 0;
  friend bool operator==(Cell, Cell) = default;
};

namespace pacman {

inline constexpr int kWidth = 5;
inline constexpr int kHeight = 5;
inline constexpr Cell kPacmanStart{2, 0};
inline constexpr Cell kGhostStart{2, 4};
inline constexpr std::array<Cell, 2> kFoodCells{Cell{0, 4}, Cell{4, 4}};

inline constexpr Action kUp{0};
inline constexpr Action kDown{1};
inline constexpr Action kLeft{2};
inline constexpr Action kRight{3};

inline constexpr double kStepReward = -1.0;
inline constexpr double kFoodReward = 10.0;
inline constexpr double kWinReward = 500.0;
inline constexpr double kLoseReward = -500.0;

// Row 0 is the bottom of the board; `up` increases the row.
inline constexpr Cell offset(Action a) {
  switch (a.index) {
    case 0: return {0, 1};
    case 1: return {0, -1};
    case 2: return {-1, 0};
    default: return {1, 0};
  }
}

inline constexpr bool inside(Cell c) { return c.col >= 0 && c.col < kWidth && c.row >= 0 && c.row < kHeight; }

}  // namespace pacman

struct PacmanState {
  Cell pacman_pos = pacman::kPacmanStart;
  Cell ghost_pos = pacman::kGhostStart;
  Action ghost_dir = pacman::kDown;
  /// Bit i set while food i is still on the board.
  std::uint8_t food_mask = 0b11;

  bool caught() const { return pacman_pos == ghost_pos; }
  bool cleared() const { return food_mask == 0; }
  bool terminal() const { return caught() || cleared(); }
  int foods_left() const { return std::popcount(food_mask); }

  friend bool operator==(const PacmanState&, const PacmanState&) = default;
};

inline PacmanState pacman_reset() { return PacmanState{}; }

inline StateId encode(const PacmanState& s) {
  auto cell = [](Cell c) { return static_cast<std::uint64_t>(c.col * pacman::kHeight + c.row); };
  std::uint64_t key = cell(s.pacman_pos);
  key = key * 25 + cell(s.ghost_pos);
  key = key * 4 + s.ghost_dir.index;
  key = key * 4 + s.food_mask;
  return StateId{key};
}

/// Pac-Man moves first (walls stop it in place), then food and win are resolved, then the
/// ghost takes a uniformly random legal move. Landing on the ghost, or the ghost landing
/// on (or swapping through) Pac-Man, loses the game.
inline EnvOutcome<PacmanState> pacman_step(const PacmanState& s, Action a, Rng& rng) {
  using namespace pacman;
  if (s.terminal()) throw ContractViolation("pacman_step called on a terminal state");
  if (a.index >= 4) throw std::invalid_argument("pacman action out of range");

  EnvOutcome<PacmanState> out;
  out.next_state = s;
  PacmanState& n = out.next_state;
  out.reward = kStepReward;

  const Cell from = s.pacman_pos;
  Cell to{from.col + offset(a).col, from.row + offset(a).row};
  if (inside(to)) n.pacman_pos = to;

  if (n.pacman_pos == s.ghost_pos) {
    out.reward += kLoseReward;
    out.terminal = true;
    out.won = false;
    return out;
  }

  for (std::size_t i = 0; i < kFoodCells.size(); ++i) {
    const auto bit = static_cast<std::uint8_t>(1u << i);
    if ((n.food_mask & bit) && n.pacman_pos == kFoodCells[i]) {
      n.food_mask = static_cast<std::uint8_t>(n.food_mask & ~bit);
      out.reward += kFoodReward;
    }
  }
  if (n.cleared()) {
    out.reward += kWinReward;
    out.terminal = true;
    out.won = true;
    return out;
  }

  std::array<Action, 4> moves{};
  std::size_t legal = 0;
  for (std::size_t d = 0; d < 4; ++d) {
    Cell c{s.ghost_pos.col + offset(Action{d}).col, s.ghost_pos.row + offset(Action{d}).row};
    if (inside(c)) moves[legal++] = Action{d};
  }
  const Action gm = moves[rng.index(legal)];
  n.ghost_dir = gm;
  n.ghost_pos = Cell{s.ghost_pos.col + offset(gm).col, s.ghost_pos.row + offset(gm).row};

  const bool swapped = n.ghost_pos == from && n.pacman_pos == s.ghost_pos;
  if (n.caught() || swapped) {
    out.reward += kLoseReward;
    out.terminal = true;
    out.won = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cart-Pole

namespace cartpole {

inline constexpr double kGravity = 9.8;
inline constexpr double kCartMass = 1.0;
inline constexpr double kPoleMass = 0.1;
inline constexpr double kTotalMass = kCartMass + kPoleMass;
inline constexpr double kHalfLength = 0.5;
inline constexpr double kPoleMassLength = kPoleMass * kHalfLength;
inline constexpr double kForce = 10.0;
inline constexpr double kDt = 0.02;
inline constexpr double kThetaLimit = 12.0 * std::numbers::pi / 180.0;
inline constexpr double kThetaDotLimit = 2.0;
inline constexpr int kMaxSteps = 200;
inline constexpr int kBins = 10;

inline constexpr Action kLeft{0};
inline constexpr Action kRight{1};

}  // namespace cartpole

struct CartpoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;
  double theta_dot = 0.0;
  /// Steps taken so far in this episode.
  int steps = 0;

  bool failed() const { return std::abs(theta) > cartpole::kThetaLimit; }
  bool terminal() const { return failed() || steps >= cartpole::kMaxSteps; }

  friend bool operator==(const CartpoleState&, const CartpoleState&) = default;
};

inline CartpoleState cartpole_reset(Rng& rng) {
  CartpoleState s;
  s.x = rng.uniform(-0.05, 0.05);
  s.x_dot = rng.uniform(-0.05, 0.05);
  s.theta = rng.uniform(-0.05, 0.05);
  s.theta_dot = rng.uniform(-0.05, 0.05);
  return s;
}

/// One Euler tick of the pole-balancing dynamics. +1 while the pole stays inside the angle
/// limit; -1 and terminal once it falls. Reaching the step cap ends the episode as a win.
inline EnvOutcome<CartpoleState> cartpole_step(const CartpoleState& s, Action a) {
  using namespace cartpole;
  if (s.terminal()) throw ContractViolation("cartpole_step called on a terminal state");
  if (a.index >= 2) throw std::invalid_argument("cartpole action out of range");

  const double force = a == kRight ? kForce : -kForce;
  const double cos_t = std::cos(s.theta);
  const double sin_t = std::sin(s.theta);
  const double temp = (force + kPoleMassLength * s.theta_dot * s.theta_dot * sin_t) / kTotalMass;
  const double theta_acc =
      (kGravity * sin_t - cos_t * temp) / (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / kTotalMass));
  const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;

  EnvOutcome<CartpoleState> out;
  out.next_state = s;
  CartpoleState& n = out.next_state;
  n.x = s.x + kDt * s.x_dot;
  n.x_dot = s.x_dot + kDt * x_acc;
  n.theta = s.theta + kDt * s.theta_dot;
  n.theta_dot = s.theta_dot + kDt * theta_acc;
  n.steps = s.steps + 1;

  if (n.failed()) {
    out.reward = -1.0;
    out.terminal = true;
    out.won = false;
  } else {
    out.reward = 1.0;
    if (n.steps >= kMaxSteps) {
      out.terminal = true;
      out.won = true;
      out.truncated = true;
    }
  }
  return out;
}

struct BinPair {
  int theta_bin = 0;
  int theta_dot_bin = 0;
  friend bool operator==(BinPair, BinPair) = default;
};

namespace cartpole {

inline int bin_of(double v, double limit) {
  const double scaled = (v + limit) / (2.0 * limit) * kBins;
  if (scaled <= 0.0) return 0;
  if (scaled >= kBins) return kBins - 1;
  return std::min(static_cast<int>(scaled), kBins - 1);
}

}  // namespace cartpole

/// Even 10x10 bins over the pole angle and angular velocity; cart position and velocity
/// are not part of the key.
inline BinPair cartpole_bins(const CartpoleState& s) {
  if (std::isnan(s.theta) || std::isnan(s.theta_dot)) throw std::invalid_argument("cart-pole state is NaN");
  return {cartpole::bin_of(s.theta, cartpole::kThetaLimit), cartpole::bin_of(s.theta_dot, cartpole::kThetaDotLimit)};
}

inline StateId discretize(const CartpoleState& s) {
  auto b = cartpole_bins(s);
  return StateId{static_cast<std::uint64_t>(b.theta_bin * cartpole::kBins + b.theta_dot_bin)};
}

inline StateId encode(const CartpoleState& s) { return discretize(s); }

// ---------------------------------------------------------------------------
// Stateful wrappers used by the learners

/// One step as seen by a learner: reward plus the discrete key of the next state.
struct Transition {
  StateId next;
  double reward = 0.0;
  bool terminal = false;
  std::optional<bool> won;
  bool truncated = false;

  /// Whether the TD target should drop the bootstrap term.
  bool absorbing() const { return terminal && !truncated; }
};

template <class E>
concept Environment = requires(E e, const E ce, Action a, Rng& rng) {
  { ce.action_count() } -> std::convertible_to<std::size_t>;
  { e.reset(rng) } -> std::same_as<StateId>;
  { e.step(a, rng) } -> std::same_as<Transition>;
  { ce.state_id() } -> std::same_as<StateId>;
  { ce.done() } -> std::convertible_to<bool>;
};

template <class S>
Transition to_transition(const EnvOutcome<S>& o) {
  return {encode(o.next_state), o.reward, o.terminal, o.won, o.truncated};
}

class PacmanEnv {
 public:
  static constexpr EnvKind kind = EnvKind::pacman;

  std::size_t action_count() const { return 4; }

  StateId reset(Rng&) {
    state_ = pacman_reset();
    done_ = false;
    return encode(state_);
  }

  Transition step(Action a, Rng& rng) {
    auto o = pacman_step(state_, a, rng);
    state_ = o.next_state;
    done_ = o.terminal;
    return to_transition(o);
  }

  StateId state_id() const { return encode(state_); }
  bool done() const { return done_; }
  const PacmanState& state() const { return state_; }

 private:
  PacmanState state_;
  bool done_ = false;
};

class CartpoleEnv {
 public:
  static constexpr EnvKind kind = EnvKind::cartpole;

  std::size_t action_count() const { return 2; }

  StateId reset(Rng& rng) {
    state_ = cartpole_reset(rng);
    done_ = false;
    return discretize(state_);
  }

  Transition step(Action a, Rng&) {
    auto o = cartpole_step(state_, a);
    state_ = o.next_state;
    done_ = o.terminal;
    return to_transition(o);
  }

  StateId state_id() const { return discretize(state_); }
  bool done() const { return done_; }
  const CartpoleState& state() const { return state_; }

 private:
  CartpoleState state_;
  bool done_ = false;
};

inline std::vector<Action> legal_actions(EnvKind env) {
  std::vector<Action> out;
  for (std::size_t i = 0; i < action_count(env); ++i) out.push_back(Action{i});
  return out;
}

// ---------------------------------------------------------------------------
// Render payloads for the live gateway

inline nlohmann::json render(const PacmanState& s) {
  auto cells = nlohmann::json::array();
  for (int row = 0; row < pacman::kHeight; ++row) {
    auto line = nlohmann::json::array();
    for (int col = 0; col < pacman::kWidth; ++col) {
      const Cell c{col, row};
      bool food = false;
      for (std::size_t i = 0; i < pacman::kFoodCells.size(); ++i)
        food = food || (((s.food_mask >> i) & 1u) != 0 && pacman::kFoodCells[i] == c);
      line.push_back({{"wall", false}, {"food", food}, {"agent", s.pacman_pos == c}, {"ghost", s.ghost_pos == c}});
    }
    cells.push_back(std::move(line));
  }
  return {{"env", "pacman"},
          {"width", pacman::kWidth},
          {"height", pacman::kHeight},
          {"cells", std::move(cells)},
          {"ghost_dir", kPacmanActions[s.ghost_dir.index]}};
}

inline nlohmann::json render(const CartpoleState& s) {
  auto b = cartpole_bins(s);
  return {{"env", "cartpole"},     {"x", s.x},
          {"x_dot", s.x_dot},      {"theta", s.theta},
          {"theta_dot", s.theta_dot}, {"bins", {b.theta_bin, b.theta_dot_bin}}};
}

}  // namespace interrl
