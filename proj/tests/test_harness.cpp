#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "interrl/harness.hpp"

using namespace interrl;

namespace {

RunConfig small_cartpole(RunMethod m = RunMethod::Q) {
  RunConfig c = default_config(EnvKind::cartpole);
  c.method = m;
  c.episodes = 40;
  c.runs = 3;
  c.oracle_episodes = 300;
  return c;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST(MovingAverage, Basics) {
  const std::vector<double> s{0, 10};
  EXPECT_EQ(moving_average(s, 2), (std::vector<double>{0, 5}));
  const std::vector<double> t{3, -1, 4, 1, 5};
  EXPECT_EQ(moving_average(t, 1), t);
  auto m = moving_average(t, 3);
  EXPECT_DOUBLE_EQ(m[2], 2.0);
  EXPECT_DOUBLE_EQ(m[4], 10.0 / 3.0);
  EXPECT_THROW(moving_average(t, 0), std::invalid_argument);
}

TEST(MovingAverage, PlotWindows) {
  EXPECT_EQ(plot_window(EnvKind::pacman), 100);
  EXPECT_EQ(plot_window(EnvKind::cartpole), 10);
}

TEST(EpisodesToThreshold, CartpoleFirstFullWindowAt195) {
  std::vector<double> s(30, 100.0);
  for (int i = 12; i < 30; ++i) s[i] = 200.0;
  const int got = episodes_to_threshold(s, 10, convergence_threshold(EnvKind::cartpole));
  int expected = -1;
  for (int end = 10; end <= 30 && expected < 0; ++end) {
    double sum = 0;
    for (int k = end - 10; k < end; ++k) sum += s[k];
    if (sum / 10 >= 195) expected = end;
  }
  EXPECT_EQ(got, expected);
  EXPECT_EQ(got, 22);
}

TEST(EpisodesToThreshold, IgnoresPartialWindowsAndCensors) {
  std::vector<double> s{500, -500, -500, -500};
  EXPECT_EQ(episodes_to_threshold(s, 3, convergence_threshold(EnvKind::pacman)), 4);
  std::vector<double> pos{1, 1, 1};
  EXPECT_EQ(episodes_to_threshold(pos, 3, convergence_threshold(EnvKind::pacman)), 3);
  std::vector<double> zero{0, 0, 0};
  EXPECT_EQ(episodes_to_threshold(zero, 3, convergence_threshold(EnvKind::pacman)), 3);
}

TEST(FinalAverage, LastWindow) {
  std::vector<double> s{1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(final_average(s, 2), 4.5);
  EXPECT_DOUBLE_EQ(final_average(s, 10), 3.0);
}

TEST(Summarize, IdenticalRunsHaveZeroSpread) {
  ResultTable t;
  for (int run = 0; run < 3; ++run)
    for (int ep = 0; ep < 12; ++ep) t.rows.push_back({run, ep, "Q", ep * 20.0, {}, {}});
  auto s = summarize(t, 10, convergence_threshold(EnvKind::cartpole));
  EXPECT_EQ(s.final_return.sd, 0.0);
  EXPECT_EQ(s.episodes_to_threshold.sd, 0.0);
  EXPECT_EQ(s.selection_frequency.at("Q"), 1.0);
  EXPECT_EQ(s.per_run_final.size(), 3u);
}

TEST(Summarize, EmptyTableThrows) {
  EXPECT_THROW(summarize(ResultTable{}, 10, convergence_threshold(EnvKind::cartpole)), std::invalid_argument);
}

TEST(Summarize, SelectionFrequenciesSumToOne) {
  auto c = small_cartpole(RunMethod::AL);
  c.L = 0.5;
  const TeacherQ t = train_teacher(c);
  auto table = run_config(c, &t);
  auto s = summarize(table, 10, convergence_threshold(EnvKind::cartpole));
  double total = 0;
  for (auto& [_, f] : s.selection_frequency) total += f;
  EXPECT_NEAR(total, 1.0, 1e-12);
  for (const auto& r : table.rows) {
    double p = 0;
    for (double v : r.probabilities) p += v;
    EXPECT_NEAR(p, 1.0, 1e-12);
  }
}

TEST(RunConfigTable, SmokeSpecRowCount) {
  auto c = small_cartpole();
  c.runs = 1;
  c.episodes = 10;
  auto t = run_config(c, nullptr);
  EXPECT_EQ(t.rows.size(), 10u);
  EXPECT_TRUE(t.portfolio.empty());
}

TEST(RunConfigTable, ThreadedEqualsSerial) {
  auto c = small_cartpole();
  c.runs = 5;
  EXPECT_EQ(run_config(c, nullptr, 1), run_config(c, nullptr, 4));
}

TEST(RunConfigTable, MissingTeacherIsAnError) {
  auto c = small_cartpole(RunMethod::AB);
  c.L = 0.5;
  EXPECT_THROW(run_config(c, nullptr), std::invalid_argument);
}

TEST(RunConfigTable, DefaultBudgets) {
  EXPECT_EQ(default_config(EnvKind::pacman).episodes * default_config(EnvKind::pacman).runs, 30000 * 20);
  EXPECT_EQ(default_config(EnvKind::cartpole).episodes, 2000);
  EXPECT_EQ(default_config(EnvKind::cartpole).runs, 20);
}

TEST(Csv, EmptyTableIsHeaderOnly) {
  ResultTable t;
  EXPECT_EQ(to_csv(t), "run,episode,method,return\n");
}

TEST(Csv, AdaptiveColumnCount) {
  ResultTable t;
  t.portfolio = {MethodId::AB, MethodId::CS, MethodId::RS, MethodId::QA};
  EXPECT_EQ(detail::split(csv_header(t), ',').size(), 4u + 2u * 4u);
  EXPECT_EQ(csv_header(t), "run,episode,method,return,w_AB,w_CS,w_RS,w_QA,p_AB,p_CS,p_RS,p_QA");
}

TEST(Csv, RoundTrip) {
  auto c = small_cartpole(RunMethod::AL);
  c.L = 0.5;
  const TeacherQ teacher = train_teacher(c);
  auto t = run_config(c, &teacher);
  EXPECT_EQ(parse_csv(to_csv(t)), t);
  const auto path = (std::filesystem::temp_directory_path() / "interrl_csv_test.csv").string();
  emit_csv(t, path);
  EXPECT_EQ(parse_csv(slurp(path)), t);
  std::filesystem::remove(path);
}

TEST(Csv, UnwritablePathThrows) {
  EXPECT_THROW(emit_csv(ResultTable{}, "/nonexistent-dir/x/y.csv"), std::runtime_error);
}

TEST(Sweep, CombinationsAreTheCartesianProduct) {
  SweepSpec spec;
  spec.base = small_cartpole();
  spec.L = {0.1, 1.0};
  spec.methods = {RunMethod::AB, RunMethod::RS, RunMethod::QA};
  auto combos = combinations(spec);
  ASSERT_EQ(combos.size(), 6u);
  for (const auto& c : combos) EXPECT_EQ(c.C, spec.base.C);
}

TEST(Sweep, ParsesListsAndBaseKeys) {
  auto spec = parse_sweep_text("env = cartpole\nepisodes = 20\nL = 0.1, 1\nmethod = ab,cs\nstrategy = early,late\n");
  EXPECT_EQ(spec.base.env, EnvKind::cartpole);
  EXPECT_EQ(spec.base.episodes, 20);
  EXPECT_EQ(combinations(spec).size(), 8u);
}

TEST(Sweep, RejectsBadValues) {
  EXPECT_THROW(parse_sweep_text("L = 0.1, 2\n"), InvalidConfig);
  EXPECT_THROW(parse_sweep_text("method = ab, zz\n"), InvalidConfig);
}

TEST(Sweep, DeterministicCsv) {
  SweepSpec spec;
  spec.base = small_cartpole();
  spec.methods = {RunMethod::Q, RunMethod::CS};
  spec.L = {0.3};
  auto a = run_experiment(spec), b = run_experiment(spec);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(to_csv(a[i].table), to_csv(b[i].table));
}

TEST(Sweep, CombinationOrderDoesNotChangeRuns) {
  SweepSpec forward;
  forward.base = small_cartpole();
  forward.methods = {RunMethod::AB, RunMethod::RS, RunMethod::AL};
  forward.L = {0.1, 1.0};
  SweepSpec backward = forward;
  std::reverse(backward.methods.begin(), backward.methods.end());
  std::reverse(backward.L.begin(), backward.L.end());
  auto a = run_experiment(forward), b = run_experiment(backward);
  ASSERT_EQ(a.size(), b.size());
  for (const auto& ra : a) {
    auto it = std::find_if(b.begin(), b.end(), [&](const CombinationResult& rb) { return rb.config == ra.config; });
    ASSERT_NE(it, b.end());
    EXPECT_EQ(it->table, ra.table);
  }
}

TEST(Sweep, FailingCombinationIsNamed) {
  SweepSpec spec;
  spec.base = small_cartpole();
  spec.C = {0.5, 7.0};
  try {
    run_experiment(spec);
    FAIL() << "expected failure";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("C=7"), std::string::npos) << e.what();
  }
}
