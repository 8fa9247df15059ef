// Command-line front end: batch runs, sweeps, oracle training and the live gateway.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "interrl/harness.hpp"
#include "interrl/server.hpp"

using namespace interrl;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Builds a config from an optional file plus command-line overrides. The env line goes
/// first so that its defaults apply before anything else.
RunConfig build_config(const std::string& env, const std::string& file,
                       const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::string text;
  if (!env.empty()) text += "env = " + env + "\n";
  if (!file.empty()) text += read_file(file) + "\n";
  for (const auto& [k, v] : overrides) text += k + " = " + v + "\n";
  return parse_config_text(text);
}

void print_summary(std::ostream& os, const RunConfig& c, const ResultTable& table) {
  const auto s = summarize(table, plot_window(c.env), convergence_threshold(c.env));
  os << combination_name(c) << ": final " << s.final_return.mean << " (sd " << s.final_return.sd
     << "), episodes to threshold " << s.episodes_to_threshold.mean << " (sd " << s.episodes_to_threshold.sd << ")";
  if (c.method == RunMethod::AL) {
    os << ", selected";
    for (const auto& [m, f] : s.selection_frequency) os << ' ' << m << '=' << f;
  }
  os << '\n';
}

struct Overrides {
  std::vector<std::pair<std::string, std::string>> kv;
  void add(CLI::App* app, const std::string& flag, const std::string& key, std::string& slot,
           const std::string& help) {
    app->add_option(flag, slot, help);
    keys.emplace_back(key, &slot);
  }
  void collect() {
    for (auto& [k, slot] : keys)
      if (!slot->empty()) kv.emplace_back(k, *slot);
  }
  std::vector<std::pair<std::string, std::string*>> keys;
};

std::shared_ptr<const TeacherQ> load_or_train(const RunConfig& c, const std::string& oracle_file) {
  if (!oracle_file.empty()) return std::make_shared<const TeacherQ>(load_snapshot(oracle_file, action_count(c.env)));
  if (!needs_teacher(c)) return nullptr;
  return std::make_shared<const TeacherQ>(train_teacher(c));
}

std::atomic<gateway::Server*> g_server{nullptr};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interactive Q-learning workbench with human-feedback shaping"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run one configuration and write per-episode returns as CSV");
  std::string run_env, run_config_file, run_out, run_oracle;
  unsigned run_threads = 1;
  std::array<std::string, 13> rv;
  Overrides ro;
  ro.add(run, "--method", "method", rv[0], "q|ab|cs|rs|qa|al");
  ro.add(run, "--episodes", "episodes", rv[1], "Episodes per run");
  ro.add(run, "--runs", "runs", rv[2], "Independent runs");
  ro.add(run, "--L", "L", rv[3], "Advice likelihood");
  ro.add(run, "--C", "C", rv[4], "Advice consistency");
  ro.add(run, "--rh", "r_h", rv[5], "Feedback magnitude");
  ro.add(run, "--strategy", "strategy", rv[6], "early|sporadic|late");
  ro.add(run, "--B0", "B0", rv[7], "Initial shaping weight");
  ro.add(run, "--seed", "seed", rv[8], "Base seed; run k uses seed+k");
  ro.add(run, "--disable-at", "disable_at", rv[9], "Episode from which the teacher gives its worst action");
  ro.add(run, "--portfolio", "portfolio", rv[10], "Comma-separated methods for al");
  ro.add(run, "--q-access", "q_access", rv[11], "Share teacher values with qa (true|false)");
  ro.add(run, "--oracle-episodes", "oracle_episodes", rv[12], "Training episodes for the simulated teacher");
  run->add_option("--env", run_env, "pacman|cartpole");
  run->add_option("--config", run_config_file, "Config file (key = value lines)");
  run->add_option("--oracle", run_oracle, "Pre-trained teacher snapshot");
  run->add_option("--threads", run_threads, "Parallel runs");
  run->add_option("--out", run_out, "CSV output path")->required();

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run every combination of a sweep file");
  std::string sweep_spec, sweep_out;
  unsigned sweep_threads = 1;
  sweep->add_option("--spec", sweep_spec, "Sweep file")->required();
  sweep->add_option("--out", sweep_out, "Output directory")->required();
  sweep->add_option("--threads", sweep_threads, "Parallel runs");

  // oracle train
  auto* oracle = app.add_subcommand("oracle", "Simulated teacher utilities");
  oracle->require_subcommand(1);
  auto* train = oracle->add_subcommand("train", "Train and save a teacher Q-table");
  std::string tr_env, tr_out;
  int tr_episodes = 0;
  std::uint64_t tr_seed = 1;
  train->add_option("--env", tr_env, "pacman|cartpole")->required();
  train->add_option("--episodes", tr_episodes, "Training episodes")->required();
  train->add_option("--seed", tr_seed, "Seed");
  train->add_option("--out", tr_out, "Snapshot path")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Serve live training sessions over WebSocket");
  int sv_port = 0;
  std::string sv_env, sv_method, sv_config, sv_oracle, sv_bind = "127.0.0.1";
  double sv_pace = 2.0;
  int sv_emit = 1;
  bool sv_hybrid = false;
  serve->add_option("--port", sv_port, "TCP port")->required()->check(CLI::Range(0, 65535));
  serve->add_option("--env", sv_env, "pacman|cartpole")->required();
  serve->add_option("--method", sv_method, "q|ab|cs|rs|qa|al")->required();
  serve->add_option("--config", sv_config, "Config file");
  serve->add_option("--bind", sv_bind, "Listen address");
  serve->add_option("--pace", sv_pace, "Steps per second in human modes");
  serve->add_option("--emit-every", sv_emit, "State message interval in autonomous mode");
  serve->add_flag("--hybrid", sv_hybrid, "Fall back to the simulated teacher when the human is silent");
  serve->add_option("--oracle", sv_oracle, "Teacher snapshot for --hybrid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) {
      ro.collect();
      const RunConfig c = build_config(run_env, run_config_file, ro.kv);
      const auto teacher = load_or_train(c, run_oracle);
      const ResultTable table = run_config(c, teacher.get(), run_threads);
      emit_csv(table, run_out);
      print_summary(std::cout, c, table);
    } else if (*sweep) {
      const SweepSpec spec = parse_sweep_text(read_file(sweep_spec));
      std::filesystem::create_directories(sweep_out);
      const auto results = run_experiment(spec, sweep_threads);
      std::ofstream summary(std::filesystem::path(sweep_out) / "summary.csv");
      summary << "combination,final_mean,final_sd,episodes_to_threshold_mean,episodes_to_threshold_sd\n";
      for (const auto& r : results) {
        const std::string name = combination_name(r.config);
        emit_csv(r.table, (std::filesystem::path(sweep_out) / (name + ".csv")).string());
        const auto s = summarize(r.table, plot_window(r.config.env), convergence_threshold(r.config.env));
        summary << name << ',' << detail::format_double(s.final_return.mean) << ','
                << detail::format_double(s.final_return.sd) << ','
                << detail::format_double(s.episodes_to_threshold.mean) << ','
                << detail::format_double(s.episodes_to_threshold.sd) << '\n';
        print_summary(std::cout, r.config, r.table);
      }
      if (!summary) throw std::runtime_error("cannot write summary in " + sweep_out);
    } else if (*train) {
      const auto env = parse_env(tr_env);
      if (!env) throw InvalidConfig({"unknown env: " + tr_env});
      if (tr_episodes < 1) throw InvalidConfig({"episodes must be >= 1"});
      const RunConfig c = default_config(*env);
      const TeacherQ t = with_environment(*env, [&](auto e) {
        return train_oracle(e, tr_episodes, LearnerParams{c.alpha, c.gamma, c.epsilon}, tr_seed);
      });
      save_snapshot(t.table(), tr_out);
      const double greedy =
          with_environment(*env, [&](auto e) { return evaluate_greedy(e, t.table(), 100, tr_seed + 1); });
      std::cout << "trained " << t.table().state_count() << " states; greedy mean return " << greedy << '\n';
    } else if (*serve) {
      const RunConfig c = build_config(sv_env, sv_config, {{"method", sv_method}});
      gateway::SessionOptions opts;
      opts.pace = sv_pace;
      opts.emit_every = sv_emit;
      if (sv_hybrid) {
        opts.oracle = sv_oracle.empty() ? std::make_shared<const TeacherQ>(train_teacher(c))
                                        : std::make_shared<const TeacherQ>(load_snapshot(sv_oracle, action_count(c.env)));
      }
      gateway::Server server(c, opts, static_cast<unsigned short>(sv_port), sv_bind);
      std::cout << "listening on ws://" << sv_bind << ':' << server.port() << "/?session=<id>" << std::endl;
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (auto* s = g_server.load()) s->stop_async();
      });
      server.run();
      g_server = nullptr;
    }
  } catch (const InvalidConfig& e) {
    std::cerr << "error: invalid configuration\n";
    for (const auto& m : e.errors()) std::cerr << "  " << m << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
