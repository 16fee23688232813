// Command-line entry point: train, eval, render, plot, compare, sweep.

#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "dlbc/config.hpp"
#include "dlbc/experiment.hpp"
#include "dlbc/io.hpp"

namespace {

using dlbc::ExperimentConfig;

ExperimentConfig load_with_overrides(const std::string& path,
                                     const std::vector<std::uint64_t>& seeds,
                                     const std::string& out) {
  ExperimentConfig cfg = dlbc::load_experiment_config(path);
  if (!seeds.empty()) cfg.train.seeds = seeds;
  if (!out.empty()) cfg.output_dir = out;
  cfg.validate();
  return cfg;
}

std::vector<dlbc::RunData> load_runs(const std::vector<std::string>& dirs) {
  std::vector<dlbc::RunData> runs;
  for (const auto& d : dirs) runs.push_back(dlbc::load_run(d));
  return runs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-level behavioral-consistency control for multi-agent PPO"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::vector<std::uint64_t> seeds;
  int jobs = 1;

  auto* train = app.add_subcommand("train", "train one or more seeds of an experiment");
  train->add_option("--config", config_path, "experiment config JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--seeds", seeds, "comma-separated seeds (overrides config)")->delimiter(',');
  train->add_option("--out", out, "output directory (overrides config)");
  train->add_option("--jobs", jobs, "seeds trained concurrently")->check(CLI::PositiveNumber);

  std::string ckpt;
  std::uint64_t seed = 0;
  int episodes = 1;
  std::string traj;
  auto* eval = app.add_subcommand("eval", "greedy evaluation episodes from a checkpoint");
  eval->add_option("--ckpt", ckpt, "checkpoint JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--seed", seed, "first episode seed");
  eval->add_option("--episodes", episodes, "number of episodes")->check(CLI::PositiveNumber);
  eval->add_option("--traj", traj, "write the first episode as JSON lines");

  std::string svg_out;
  auto* render = app.add_subcommand("render", "render one greedy episode to an animated SVG");
  render->add_option("--ckpt", ckpt, "checkpoint JSON")->required()->check(CLI::ExistingFile);
  render->add_option("--seed", seed, "episode seed");
  render->add_option("--out", svg_out, "output SVG")->required();
  render->add_option("--traj", traj, "also write the trajectory as JSON lines");

  std::vector<std::string> run_dirs;
  auto* plot = app.add_subcommand("plot", "plot reward and inter-group SND curves");
  plot->add_option("runs", run_dirs, "experiment directories")->required()->check(CLI::ExistingDirectory);
  plot->add_option("--out", svg_out, "output SVG")->required();

  auto* compare = app.add_subcommand("compare", "final-window comparison table");
  compare->add_option("runs", run_dirs, "experiment directories")->required()->check(CLI::ExistingDirectory);

  std::vector<double> alphas;
  std::vector<double> snd_des;
  auto* sweep = app.add_subcommand("sweep", "grid over alpha and desired SND");
  sweep->add_option("--config", config_path, "experiment config JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--alpha", alphas, "comma-separated alpha values")->delimiter(',')->required();
  sweep->add_option("--snd-des", snd_des, "comma-separated desired SND values")->delimiter(',')->required();
  sweep->add_option("--seeds", seeds, "comma-separated seeds (overrides config)")->delimiter(',');
  sweep->add_option("--out", out, "sweep root directory (overrides config)");
  sweep->add_option("--jobs", jobs, "seeds trained concurrently")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const auto cfg = load_with_overrides(config_path, seeds, out);
      const auto summary = dlbc::run_experiment(cfg, &std::cerr, jobs);
      std::cout << summary.dump(2) << "\n";
    } else if (*eval) {
      const auto ck = dlbc::load_checkpoint(ckpt);
      std::vector<double> returns;
      for (int k = 0; k < episodes; ++k) {
        const auto frames = dlbc::rollout_episode(ck.config.env, ck.actor,
                                                  seed + static_cast<std::uint64_t>(k));
        if (k == 0 && !traj.empty()) dlbc::write_trajectory(traj, frames);
        returns.push_back(dlbc::episode_mean_return(frames));
      }
      const auto ms = dlbc::mean_std(returns);
      std::cout << "episodes " << episodes << " mean_return "
                << dlbc::format_number(ms.mean) << " std " << dlbc::format_number(ms.std)
                << "\n";
    } else if (*render) {
      const auto ck = dlbc::load_checkpoint(ckpt);
      std::vector<dlbc::TrajectoryFrame> frames;
      dlbc::write_text_file(svg_out, dlbc::render_checkpoint(ck, seed, &frames));
      if (!traj.empty()) dlbc::write_trajectory(traj, frames);
      std::cout << "wrote " << svg_out << "\n";
    } else if (*plot) {
      dlbc::write_text_file(svg_out, dlbc::plot_runs_svg(load_runs(run_dirs)));
      std::cout << "wrote " << svg_out << "\n";
    } else if (*compare) {
      std::cout << dlbc::format_table(dlbc::comparison_table(load_runs(run_dirs)));
    } else if (*sweep) {
      const auto cfg = load_with_overrides(config_path, seeds, out);
      const auto points = dlbc::run_sweep(cfg, alphas, snd_des, &std::cerr, jobs);
      std::cout << dlbc::format_sweep(points);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
