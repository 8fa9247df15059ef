#pragma once

// Live training session: a sequential simulation loop that consumes client messages only at
// step boundaries. Networking lives in server.hpp; this header has no transport.

#include <atomic>
#include <chrono>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "interrl/core.hpp"
#include "interrl/harness.hpp"
#include "interrl/teacher.hpp"
#include "interrl/trainer.hpp"

namespace interrl::gateway {

using nlohmann::json;

enum class Mode { autonomous, human_interaction, default_repeat };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::autonomous: return "autonomous";
    case Mode::human_interaction: return "human_interaction";
    case Mode::default_repeat: return "default_repeat";
  }
  return "?";
}

inline std::optional<Mode> parse_mode(std::string_view s) {
  if (s == "autonomous") return Mode::autonomous;
  if (s == "human_interaction") return Mode::human_interaction;
  if (s == "default_repeat") return Mode::default_repeat;
  return std::nullopt;
}

enum class Control { start, pause, reset, config };

inline std::optional<Control> parse_control(std::string_view s) {
  if (s == "start") return Control::start;
  if (s == "pause") return Control::pause;
  if (s == "reset") return Control::reset;
  if (s == "config") return Control::config;
  return std::nullopt;
}

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Client messages

struct FeedbackMsg {
  std::int64_t seq = 0;
  std::string action;  ///< action label or "none"
};

struct ModeMsg {
  std::int64_t seq = 0;
  Mode target = Mode::autonomous;
};

struct ControlMsg {
  std::int64_t seq = 0;
  Control target = Control::start;
  json payload;
};

using ClientMessage = std::variant<FeedbackMsg, ModeMsg, ControlMsg>;

inline std::int64_t seq_of(const ClientMessage& m) {
  return std::visit([](const auto& x) { return x.seq; }, m);
}

/// Validates one client record. Throws ProtocolError on anything malformed.
inline ClientMessage parse_client_message(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("message is not a JSON object");
  if (!j.contains("kind") || !j["kind"].is_string()) throw ProtocolError("missing kind");
  if (!j.contains("seq") || !j["seq"].is_number_integer()) throw ProtocolError("missing integer seq");
  const auto kind = j["kind"].get<std::string>();
  const auto seq = j["seq"].get<std::int64_t>();

  if (kind == "feedback") {
    if (!j.contains("action") || !j["action"].is_string()) throw ProtocolError("feedback needs an action label");
    return FeedbackMsg{seq, j["action"].get<std::string>()};
  }
  if (kind == "mode") {
    if (!j.contains("target") || !j["target"].is_string()) throw ProtocolError("mode needs a target");
    auto m = parse_mode(j["target"].get<std::string>());
    if (!m) throw ProtocolError("unknown mode: " + j["target"].get<std::string>());
    return ModeMsg{seq, *m};
  }
  if (kind == "control") {
    if (!j.contains("target") || !j["target"].is_string()) throw ProtocolError("control needs a target");
    auto c = parse_control(j["target"].get<std::string>());
    if (!c) throw ProtocolError("unknown control: " + j["target"].get<std::string>());
    json payload = j.contains("payload") ? j["payload"] : json::object();
    if (*c == Control::config && !payload.is_object()) throw ProtocolError("config payload must be an object");
    return ControlMsg{seq, *c, std::move(payload)};
  }
  throw ProtocolError("unknown kind: " + kind);
}

// ---------------------------------------------------------------------------
// Session

struct SessionOptions {
  /// Steps per second in the human modes.
  double pace = 2.0;
  /// In autonomous mode a state message is emitted every this many steps.
  int emit_every = 1;
  /// Hybrid sessions fall back to this teacher when the human is silent.
  std::shared_ptr<const TeacherQ> oracle;
};

class Session {
 public:
  Session(std::string id, RunConfig config, SessionOptions options = {})
      : id_(std::move(id)), config_(std::move(config)), options_(std::move(options)) {
    validate_config(config_);
    if (!(options_.pace > 0.0)) throw InvalidConfig({"pace must be positive"});
    if (options_.emit_every < 1) throw InvalidConfig({"emit_every must be >= 1"});
    rebuild();
    emit_state();
  }

  const std::string& id() const { return id_; }
  const RunConfig& config() const { return config_; }

  // --- receiving side (any thread) -------------------------------------------------

  /// Queues a client record for the next step boundary. Malformed records and
  /// non-increasing sequence numbers are answered with an error right away.
  void post(std::string_view text) {
    std::lock_guard lock(inbox_mutex_);
    try {
      auto msg = parse_client_message(text);
      if (last_client_seq_ && seq_of(msg) <= *last_client_seq_)
        throw ProtocolError("seq must increase (got " + std::to_string(seq_of(msg)) + ", last " +
                            std::to_string(*last_client_seq_) + ")");
      last_client_seq_ = seq_of(msg);
      inbox_.push_back(std::move(msg));
    } catch (const ProtocolError& e) {
      push_error(e.what(), std::nullopt);
    }
  }

  /// A new client starts its own sequence numbering.
  void client_attached() {
    std::lock_guard lock(inbox_mutex_);
    last_client_seq_.reset();
  }

  /// Queued on the receiving side; the loop applies it at the next boundary.
  void client_detached() {
    std::lock_guard lock(inbox_mutex_);
    detach_pending_ = true;
  }

  std::vector<json> take_outbound() {
    std::lock_guard lock(outbox_mutex_);
    std::vector<json> out(std::make_move_iterator(outbox_.begin()), std::make_move_iterator(outbox_.end()));
    outbox_.clear();
    return out;
  }

  // --- simulation side (loop thread) ----------------------------------------------

  /// One step boundary: apply queued messages, then take one step if running.
  void advance() {
    drain_inbox();
    if (!running_) return;

    if (!trainer_in_episode()) begin_episode();
    const Advice advice = advice_for_step();
    step(advice);
  }

  bool running() const { return running_; }
  Mode mode() const { return mode_; }
  int advised_steps() const { return advised_steps_; }
  int total_steps() const { return total_steps_; }
  double l_counter() const { return total_steps_ > 0 ? static_cast<double>(advised_steps_) / total_steps_ : 0.0; }
  std::optional<Action> last_feedback() const { return last_feedback_; }
  int episode() const {
    return std::visit([](const auto& t) { return t->episode(); }, trainer_);
  }

  /// Time the loop waits before each decision.
  std::chrono::milliseconds window() const {
    if (mode_ == Mode::autonomous) return std::chrono::milliseconds(0);
    return std::chrono::milliseconds(static_cast<long long>(1000.0 / options_.pace));
  }

  const QTable& q() const {
    return std::visit([](const auto& t) -> const QTable& { return t->q(); }, trainer_);
  }

 private:
  using PacTrainer = Trainer<PacmanEnv>;
  using CartTrainer = Trainer<CartpoleEnv>;

  void rebuild() {
    const std::uint64_t seed = run_seed(config_, 0);
    if (config_.env == EnvKind::pacman)
      trainer_ = std::make_unique<PacTrainer>(PacmanEnv{}, trainer_settings(config_), seed);
    else
      trainer_ = std::make_unique<CartTrainer>(CartpoleEnv{}, trainer_settings(config_), seed);
    teacher_rng_ = Rng(seed, Stream::teacher);
    advised_steps_ = 0;
    total_steps_ = 0;
    pending_feedback_.reset();
    last_feedback_.reset();
    last_action_.reset();
    last_H_.reset();
    if (mode_ == Mode::default_repeat) mode_ = Mode::human_interaction;
  }

  bool trainer_in_episode() const {
    return std::visit([](const auto& t) { return t->in_episode(); }, trainer_);
  }

  void begin_episode() {
    std::visit([](auto& t) { t->begin_episode(); }, trainer_);
  }

  std::size_t n_actions() const { return action_count(config_.env); }

  Advice advice_for_step() {
    std::optional<Action> chosen;
    if (pending_feedback_) {
      chosen = *pending_feedback_;
      last_feedback_ = chosen;
      pending_feedback_.reset();
    } else if (mode_ == Mode::default_repeat) {
      chosen = last_feedback_;
    }
    if (chosen) return {make_feedback_vector(*chosen, config_.r_h, n_actions()), std::nullopt};
    if (options_.oracle) {
      const StateId s = std::visit([](const auto& t) { return t->state(); }, trainer_);
      return teacher_advice(*options_.oracle, oracle_params(config_), s, episode(), config_.episodes, teacher_rng_);
    }
    return Advice::none(n_actions());
  }

  void step(const Advice& advice) {
    StepReport report = std::visit([&](auto& t) { return t->step(advice); }, trainer_);
    ++total_steps_;
    if (advice.present()) ++advised_steps_;
    last_action_ = report.record.action;
    last_H_ = std::vector<double>(advice.H.entries().begin(), advice.H.entries().end());

    if (report.finished) {
      emit_state(report.finished->steps);
      emit_episode_end(*report.finished);
    } else if (mode_ != Mode::autonomous || total_steps_ % options_.emit_every == 0) {
      emit_state();
    }
  }

  void drain_inbox() {
    std::deque<ClientMessage> batch;
    bool detach = false;
    {
      std::lock_guard lock(inbox_mutex_);
      batch.swap(inbox_);
      detach = std::exchange(detach_pending_, false);
    }
    for (auto& msg : batch) std::visit([&](auto& m) { apply(m); }, msg);
    if (detach && running_) running_ = false;
  }

  void apply(const FeedbackMsg& m) {
    if (m.action == "none") {
      pending_feedback_.reset();
      return;
    }
    auto a = parse_action(config_.env, m.action);
    if (!a) {
      push_error("action not available in this environment: " + m.action, m.seq);
      return;
    }
    // Latest wins; explicit feedback also ends default-repeat.
    pending_feedback_ = *a;
    if (mode_ == Mode::default_repeat) mode_ = Mode::human_interaction;
  }

  void apply(const ModeMsg& m) {
    if (m.target == Mode::default_repeat) {
      if (mode_ != Mode::human_interaction) {
        push_error("default_repeat requires human_interaction mode", m.seq);
        return;
      }
      if (!last_feedback_ && !pending_feedback_) {
        push_error("default_repeat requires a prior feedback", m.seq);
        return;
      }
      if (pending_feedback_) last_feedback_ = pending_feedback_;
    }
    mode_ = m.target;
    ack(m.seq, std::string(to_string(mode_)));
  }

  void apply(const ControlMsg& m) {
    switch (m.target) {
      case Control::start:
        running_ = true;
        ack(m.seq, "start");
        break;
      case Control::pause:
        running_ = false;
        ack(m.seq, "pause");
        break;
      case Control::reset:
        rebuild();
        ack(m.seq, "reset");
        emit_state();
        break;
      case Control::config: {
        if (running_) {
          push_error("config changes are only accepted while paused", m.seq);
          return;
        }
        RunConfig next = config_;
        std::vector<std::string> errors;
        for (const auto& [key, value] : m.payload.items()) {
          const std::string text = value.is_string() ? value.get<std::string>() : value.dump();
          if (auto err = apply_config_key(next, key, text)) errors.push_back(*err);
        }
        for (auto& e : config_errors(next)) errors.push_back(std::move(e));
        if (!errors.empty()) {
          std::string joined;
          for (const auto& e : errors) joined += (joined.empty() ? "" : "; ") + e;
          push_error("invalid config: " + joined, m.seq);
          return;
        }
        config_ = std::move(next);
        rebuild();
        ack(m.seq, "config");
        emit_state();
        break;
      }
    }
  }

  json render_now() const {
    return std::visit([](const auto& t) { return render(t->env().state()); }, trainer_);
  }

  void emit_state(std::optional<int> step_override = std::nullopt) {
    json j{{"kind", "state"},
           {"episode", episode()},
           {"step", step_override ? *step_override
                                  : std::visit([](const auto& t) { return t->step_in_episode(); }, trainer_)},
           {"mode", to_string(mode_)},
           {"l_counter", l_counter()},
           {"l_target", config_.L},
           {"window_ms", window().count()},
           {"render", render_now()},
           {"running", running_}};
    j["action"] = last_action_ ? json(std::string(action_label(config_.env, *last_action_))) : json(nullptr);
    j["feedback"] = last_H_ ? json(*last_H_) : json(nullptr);
    push(std::move(j));
  }

  void emit_episode_end(const EpisodeLog& log) {
    json j{{"kind", "episode_end"},
           {"episode", log.episode},
           {"return", log.return_R},
           {"method", to_string(static_cast<RunMethod>(log.method_chosen))},
           {"steps", log.steps},
           {"advised_steps", log.advised_steps}};
    j["weights"] = log.weights.empty() ? json(nullptr) : json(log.weights);
    j["won"] = log.won ? json(*log.won) : json(nullptr);
    push(std::move(j));
  }

  void ack(std::int64_t ref, std::string target) {
    push(json{{"kind", "ack"}, {"target", std::move(target)}, {"ref_seq", ref}});
  }

  void push_error(std::string message, std::optional<std::int64_t> ref) {
    json j{{"kind", "error"}, {"message", std::move(message)}};
    j["ref_seq"] = ref ? json(*ref) : json(nullptr);
    push(std::move(j));
  }

  void push(json j) {
    std::lock_guard lock(outbox_mutex_);
    j["seq"] = ++out_seq_;
    outbox_.push_back(std::move(j));
  }

  std::string id_;
  RunConfig config_;
  SessionOptions options_;

  std::variant<std::unique_ptr<PacTrainer>, std::unique_ptr<CartTrainer>> trainer_;
  Rng teacher_rng_{0, Stream::teacher};

  bool running_ = false;
  Mode mode_ = Mode::autonomous;
  int advised_steps_ = 0;
  int total_steps_ = 0;
  std::optional<Action> pending_feedback_;
  std::optional<Action> last_feedback_;
  std::optional<Action> last_action_;
  std::optional<std::vector<double>> last_H_;

  std::mutex inbox_mutex_;
  std::deque<ClientMessage> inbox_;
  std::optional<std::int64_t> last_client_seq_;
  bool detach_pending_ = false;

  std::mutex outbox_mutex_;
  std::deque<json> outbox_;
  std::int64_t out_seq_ = 0;
};

}  // namespace interrl::gateway
