#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <string>

#include "dlbc/config.hpp"
#include "dlbc/experiment.hpp"
#include "dlbc/io.hpp"
#include "dlbc/render.hpp"

namespace dlbc {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dlbc_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ExperimentConfig tiny_experiment(const fs::path& out) {
  ExperimentConfig c;
  c.train.num_envs = 2;
  c.train.steps_per_rollout = 50;
  c.train.total_steps = 1000;
  c.train.minibatch_size = 32;
  c.train.epochs = 2;
  c.train.hidden = {8};
  c.train.snd_sample_size = 32;
  c.train.seeds = {1, 2};
  c.checkpoint_every = 5;
  c.output_dir = out.string();
  return c;
}

// Final-window mean of one CSV column, parsed without the library reader.
double csv_final_window(const fs::path& csv, const std::string& column) {
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);  // version tag
  std::getline(in, line);
  std::vector<std::string> header;
  std::stringstream hs(line);
  for (std::string cell; std::getline(hs, cell, ',');) header.push_back(cell);
  const auto idx = static_cast<std::size_t>(
      std::find(header.begin(), header.end(), column) - header.begin());
  std::vector<double> values;
  while (std::getline(in, line)) {
    std::stringstream ls(line);
    std::string cell;
    for (std::size_t k = 0; k <= idx; ++k) std::getline(ls, cell, ',');
    values.push_back(std::stod(cell));
  }
  const std::size_t window = (values.size() + 9) / 10;
  double total = 0.0;
  for (std::size_t k = values.size() - window; k < values.size(); ++k) total += values[k];
  return total / static_cast<double>(window);
}

int run_cli(const std::string& args, std::string* output = nullptr) {
  const std::string cmd = std::string(DLBC_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return -1;
  std::string out;
  char buf[512];
  while (std::fgets(buf, sizeof(buf), pipe)) out += buf;
  const int status = pclose(pipe);
  if (output) *output = out;
  return WEXITSTATUS(status);
}

// One shared tiny experiment for the artifact tests.
class TinyRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(scratch("tiny"));
    config_ = new ExperimentConfig(tiny_experiment(*root_ / "run"));
    summary_ = new json(run_experiment(*config_));
  }
  static void TearDownTestSuite() {
    fs::remove_all(*root_);
    delete root_;
    delete config_;
    delete summary_;
  }
  static fs::path* root_;
  static ExperimentConfig* config_;
  static json* summary_;
};
fs::path* TinyRun::root_ = nullptr;
ExperimentConfig* TinyRun::config_ = nullptr;
json* TinyRun::summary_ = nullptr;

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c;
  c.train.alpha_end = 0.9;
  c.train.grouping = train::GroupingMode::kRoundRobin;
  c.train.dlbc.snd_des = 0.45;
  c.env.shaping_coeff = 0.3;
  const json j = to_json(c);
  EXPECT_EQ(to_json(experiment_config_from_json(j)), j);
}

TEST(Config, RejectsUnknownKeys) {
  json j = to_json(ExperimentConfig{});
  j["train"]["learning_rat"] = 0.1;
  EXPECT_THROW(experiment_config_from_json(j), ContractViolation);
}

TEST(Config, BaselineForbidsGroups) {
  ExperimentConfig c;
  c.method = train::Method::kFixedSndBaseline;
  c.train.method = c.method;
  c.num_groups = 2;
  EXPECT_THROW(c.validate(), ContractViolation);
  c.num_groups = 1;
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, MethodFieldsMustAgree) {
  ExperimentConfig c;
  c.method = train::Method::kFixedSndBaseline;
  c.num_groups = 1;
  EXPECT_THROW(c.validate(), ContractViolation);
}

TEST(Config, ScenarioMustMatchEnv) {
  ExperimentConfig c;
  c.scenario = "6v2";
  EXPECT_THROW(c.validate(), ContractViolation);
}

TEST(Metrics, UnknownVersionRejected) {
  const auto dir = scratch("csv");
  std::ofstream(dir / "m.csv") << "#dlbc-metrics v2\n" << join(metrics_header(2), ',') << "\n";
  EXPECT_THROW(read_metrics_csv((dir / "m.csv").string()), ContractViolation);
  std::ofstream(dir / "ok.csv") << kMetricsVersionTag << "\n" << join(metrics_header(2), ',') << "\n";
  EXPECT_TRUE(read_metrics_csv((dir / "ok.csv").string()).empty());
  fs::remove_all(dir);
}

TEST_F(TinyRun, DirectoryStructure) {
  const fs::path run = *root_ / "run";
  EXPECT_TRUE(fs::exists(run / "summary.json"));
  EXPECT_TRUE(fs::exists(run / "config.json"));
  for (int s : {1, 2}) {
    const fs::path seed = run / ("seed_" + std::to_string(s));
    EXPECT_TRUE(fs::exists(seed / "metrics.csv"));
    EXPECT_TRUE(fs::exists(seed / "config.json"));
    EXPECT_TRUE(fs::exists(seed / "final.json"));
    EXPECT_TRUE(fs::exists(seed / "checkpoints" / "rollout_00005.json"));
    EXPECT_TRUE(fs::exists(seed / "checkpoints" / "rollout_00010.json"));
    EXPECT_FALSE(fs::exists(seed / "FAILED"));
    EXPECT_EQ(read_metrics_csv((seed / "metrics.csv").string()).size(), 10u);
  }
}

TEST_F(TinyRun, RerunIsByteIdentical) {
  const std::vector<std::string> files = {"seed_1/metrics.csv", "seed_2/metrics.csv",
                                          "seed_2/final.json", "seed_1/checkpoints/rollout_00005.json",
                                          "summary.json"};
  std::vector<std::string> before;
  for (const auto& f : files) before.push_back(slurp(*root_ / "run" / f));
  run_experiment(*config_);
  for (std::size_t k = 0; k < files.size(); ++k) {
    EXPECT_EQ(before[k], slurp(*root_ / "run" / files[k])) << files[k];
  }
  // The metrics stream does not depend on where it is written.
  auto moved = *config_;
  moved.output_dir = (*root_ / "moved").string();
  run_experiment(moved);
  EXPECT_EQ(before[0], slurp(*root_ / "moved" / files[0]));
}

TEST_F(TinyRun, SummaryMatchesCsvAggregation) {
  const double r1 = csv_final_window(*root_ / "run" / "seed_1" / "metrics.csv", "mean_episode_reward");
  const double r2 = csv_final_window(*root_ / "run" / "seed_2" / "metrics.csv", "mean_episode_reward");
  const auto& r = summary_->at("final_window_reward");
  EXPECT_NEAR(r.at("mean").get<double>(), 0.5 * (r1 + r2), 1e-9 * (1.0 + std::abs(r1 + r2)));
  EXPECT_NEAR(r.at("std").get<double>(), std::abs(r1 - r2) / std::sqrt(2.0), 1e-9 * (1.0 + std::abs(r1 - r2)));
  const double s1 = csv_final_window(*root_ / "run" / "seed_1" / "metrics.csv", "snd_inter");
  const double s2 = csv_final_window(*root_ / "run" / "seed_2" / "metrics.csv", "snd_inter");
  EXPECT_NEAR(summary_->at("final_window_snd_inter").at("mean").get<double>(), 0.5 * (s1 + s2), 1e-9);
}

TEST_F(TinyRun, CheckpointRoundTripAndVersionCheck) {
  const fs::path final_ck = *root_ / "run" / "seed_1" / "final.json";
  const auto ck = load_checkpoint(final_ck.string());
  EXPECT_EQ(ck.step, 1000);
  EXPECT_EQ(checkpoint_to_json(ck.config, ck.seed, ck.step, ck.rollouts, ck.partition, ck.actor,
                               ck.critic),
            read_json_file(final_ck.string()));
  json j = read_json_file(final_ck.string());
  j["version"] = 7;
  try {
    checkpoint_from_json(j);
    FAIL() << "expected a version error";
  } catch (const ContractViolation& e) {
    EXPECT_NE(std::string(e.what()).find("stored version 7"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("expected version 1"), std::string::npos);
  }
}

TEST_F(TinyRun, RenderStructureAndDeterminism) {
  const auto ck = load_checkpoint((*root_ / "run" / "seed_2" / "final.json").string());
  std::vector<TrajectoryFrame> frames;
  const std::string svg = render_checkpoint(ck, 42, &frames);
  EXPECT_EQ(svg, render_checkpoint(ck, 42));
  EXPECT_EQ(frames.size(), 101u);

  const std::regex entity("<circle class=\"(pursuer|evader)\" data-entity=\"(\\d+)\"[^>]*fill=\"(#[0-9a-f]{6})\"");
  std::set<std::string> pursuer_colors;
  int pursuers = 0, evaders = 0;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), entity); it != std::sregex_iterator(); ++it) {
    if ((*it)[1] == "pursuer") {
      ++pursuers;
      pursuer_colors.insert((*it)[3]);
    } else {
      ++evaders;
      EXPECT_EQ((*it)[3], render::kEvaderColor);
    }
  }
  EXPECT_EQ(pursuers, 5);
  EXPECT_EQ(evaders, 2);
  EXPECT_EQ(pursuer_colors.size(), 2u);
  EXPECT_EQ(pursuer_colors.count(render::kEvaderColor), 0u);
}

TEST_F(TinyRun, RenderedPositionsMatchTrajectoryDump) {
  const auto ck = load_checkpoint((*root_ / "run" / "seed_1" / "final.json").string());
  std::vector<TrajectoryFrame> frames;
  const std::string svg = render_checkpoint(ck, 9, &frames);
  const fs::path dump = *root_ / "traj.jsonl";
  write_trajectory(dump.string(), frames);
  const auto loaded = read_trajectory(dump.string());
  ASSERT_EQ(loaded.size(), frames.size());

  const render::ArenaView view{ck.config.env.arena_half_width, ck.config.render.width_px, 20.0};
  const std::regex block("data-entity=\"(\\d+)\"[^\\n]*\\n<animate attributeName=\"cx\"[^>]*values=\"([^\"]*)\"/>\\n"
                         "<animate attributeName=\"cy\"[^>]*values=\"([^\"]*)\"/>");
  int checked = 0;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), block); it != std::sregex_iterator(); ++it) {
    const auto e = static_cast<std::size_t>(std::stoi((*it)[1]));
    std::stringstream xs((*it)[2].str()), ys((*it)[3].str());
    std::string x, y;
    for (std::size_t k = 0; std::getline(xs, x, ';') && std::getline(ys, y, ';'); ++k) {
      EXPECT_NEAR(view.x_of(std::stod(x)), loaded[k].positions[e].x(), 1e-5);
      EXPECT_NEAR(view.y_of(std::stod(y)), loaded[k].positions[e].y(), 1e-5);
    }
    ++checked;
  }
  EXPECT_EQ(checked, 7);
}

TEST_F(TinyRun, PlotBandsAndTable) {
  const auto run = load_run((*root_ / "run").string());
  EXPECT_NE(plot_runs_svg({run}).find("class=\"band\""), std::string::npos);

  RunData single = run;
  single.seeds.resize(1);
  single.rows.resize(1);
  const std::string one = plot_runs_svg({single});
  EXPECT_EQ(one.find("class=\"band\""), std::string::npos);
  EXPECT_EQ(std::count(one.begin(), one.end(), '\n') > 0, true);

  RunData twins = single;
  twins.seeds.push_back(single.seeds[0]);
  twins.rows.push_back(single.rows[0]);
  const auto curve = seed_curve(twins, &train::MetricsRow::mean_episode_reward);
  for (double s : curve.std) EXPECT_EQ(s, 0.0);
  EXPECT_EQ(plot_runs_svg({twins}).find("class=\"band\""), std::string::npos);

  const auto table = comparison_table({run});
  ASSERT_EQ(table.size(), 1u);
  const double r1 = csv_final_window(*root_ / "run" / "seed_1" / "metrics.csv", "mean_episode_reward");
  const double r2 = csv_final_window(*root_ / "run" / "seed_2" / "metrics.csv", "mean_episode_reward");
  EXPECT_NEAR(table[0].reward.mean, 0.5 * (r1 + r2), 1e-9);
  EXPECT_EQ(table[0].seeds, 2u);

  RunData other = run;
  other.config.scenario = "6v2";
  EXPECT_THROW(comparison_table({run, other}), ContractViolation);
}

TEST_F(TinyRun, CliSubcommands) {
  const fs::path cfg = *root_ / "cli_config.json";
  auto c = *config_;
  c.train.total_steps = 200;
  c.output_dir = (*root_ / "unused").string();
  write_json_file(cfg.string(), to_json(c));
  std::string out;
  ASSERT_EQ(run_cli("train --config " + cfg.string() + " --seeds 4 --out " +
                        (*root_ / "cli_run").string(), &out), 0) << out;
  EXPECT_TRUE(fs::exists(*root_ / "cli_run" / "seed_4" / "metrics.csv"));

  ASSERT_EQ(run_cli("compare " + (*root_ / "cli_run").string() + " " + (*root_ / "run").string(), &out), 0) << out;
  EXPECT_NE(out.find("final reward"), std::string::npos);

  const auto svg = *root_ / "ep.svg";
  ASSERT_EQ(run_cli("render --ckpt " + (*root_ / "cli_run" / "seed_4" / "final.json").string() +
                        " --seed 3 --out " + svg.string(), &out), 0) << out;
  EXPECT_EQ(slurp(svg).rfind("<svg", 0), 0u);

  ASSERT_EQ(run_cli("eval --ckpt " + (*root_ / "cli_run" / "seed_4" / "final.json").string() +
                        " --episodes 2", &out), 0) << out;
  EXPECT_NE(out.find("mean_return"), std::string::npos);

  ASSERT_EQ(run_cli("plot " + (*root_ / "cli_run").string() + " --out " + (*root_ / "c.svg").string(), &out), 0);
  EXPECT_TRUE(fs::exists(*root_ / "c.svg"));

  ASSERT_EQ(run_cli("sweep --config " + cfg.string() + " --alpha 0,1 --snd-des 0.2 --seeds 5 --out " +
                        (*root_ / "sweep").string(), &out), 0) << out;
  EXPECT_TRUE(fs::exists(*root_ / "sweep" / "alpha_0_snd_0.2" / "summary.json"));
  EXPECT_TRUE(fs::exists(*root_ / "sweep" / "alpha_1_snd_0.2" / "summary.json"));

  json bad = to_json(c);
  bad["method"] = "fixed_snd_baseline";
  write_json_file((*root_ / "bad.json").string(), bad);
  EXPECT_NE(run_cli("train --config " + (*root_ / "bad.json").string(), &out), 0);
  EXPECT_NE(out.find("forbids"), std::string::npos);
}

}  // namespace
}  // namespace dlbc
