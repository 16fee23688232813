#ifndef DLBC_EXPERIMENT_HPP_
#define DLBC_EXPERIMENT_HPP_

// Run orchestration: per-seed training with metrics/checkpoint artifacts,
// cross-seed summaries, run comparison and parameter sweeps.
//
// Layout of an experiment directory:
//   config.json                 materialized ExperimentConfig
//   summary.json                final-window statistics across seeds
//   seed_<s>/config.json        same config, seeds = [s]
//   seed_<s>/metrics.csv        one row per rollout
//   seed_<s>/checkpoints/*.json periodic checkpoints
//   seed_<s>/final.json         final checkpoint
//   seed_<s>/FAILED             only when the seed aborted

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dlbc/config.hpp"
#include "dlbc/io.hpp"
#include "dlbc/render.hpp"
#include "dlbc/trainer.hpp"

namespace dlbc {

namespace fs = std::filesystem;

inline constexpr double kFinalWindowFraction = 0.1;

// Mean over the last 10% of values (at least one).
inline double final_window_mean(const std::vector<double>& values) {
  require(!values.empty(), "final_window_mean: no values");
  const auto n = values.size();
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(kFinalWindowFraction * static_cast<double>(n))));
  double total = 0.0;
  for (std::size_t i = n - k; i < n; ++i) total += values[i];
  return total / static_cast<double>(k);
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for fewer than two values
};

inline MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return out;
}

inline void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw std::runtime_error("cannot create directory '" + dir.string() +
                             "': " + ec.message());
  }
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  std::vector<train::MetricsRow> rows;
};

inline std::vector<double> column(const std::vector<train::MetricsRow>& rows,
                                  double train::MetricsRow::*field) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.*field);
  return out;
}

inline std::string checkpoint_name(long rollouts) {
  std::ostringstream os;
  os << "rollout_" << std::setw(5) << std::setfill('0') << rollouts << ".json";
  return os.str();
}

// Trains one seed into `dir`. Non-finite training aborts the seed and leaves
// a FAILED marker containing the diagnostic.
inline SeedOutcome run_seed(const ExperimentConfig& config, std::uint64_t seed,
                            const fs::path& dir, std::ostream* log = nullptr,
                            std::mutex* log_mutex = nullptr) {
  SeedOutcome outcome;
  outcome.seed = seed;
  ensure_directory(dir / "checkpoints");
  std::error_code ec;
  fs::remove(dir / "FAILED", ec);

  ExperimentConfig seed_config = config;
  seed_config.train.seeds = {seed};
  write_json_file((dir / "config.json").string(), to_json(seed_config));

  auto say = [&](const std::string& msg) {
    if (!log) return;
    std::unique_lock<std::mutex> lock;
    if (log_mutex) lock = std::unique_lock<std::mutex>(*log_mutex);
    *log << msg << std::endl;
  };

  const auto start = std::chrono::steady_clock::now();
  try {
    train::Trainer trainer(config.env, config.train, seed);
    MetricsWriter writer((dir / "metrics.csv").string(),
                         trainer.measure_partition().num_groups());
    auto save = [&](const fs::path& path) {
      write_json_file(path.string(),
                      checkpoint_to_json(config, seed, trainer.env_steps(),
                                         trainer.rollouts_done(),
                                         trainer.measure_partition(), trainer.actor(),
                                         trainer.critic()));
    };
    while (!trainer.finished()) {
      auto row = trainer.iterate();
      if (config.record_wall_time) {
        row.wall_time = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
      }
      writer.write(row);
      outcome.rows.push_back(row);
      if (config.checkpoint_every > 0 &&
          trainer.rollouts_done() % config.checkpoint_every == 0) {
        save(dir / "checkpoints" / checkpoint_name(trainer.rollouts_done()));
      }
      if (trainer.rollouts_done() % 10 == 0 || trainer.finished()) {
        std::ostringstream os;
        os << "[" << to_string(config.method) << " seed " << seed << "] step "
           << row.step << " reward " << format_number(row.mean_episode_reward)
           << " snd_inter " << format_number(row.snd_inter) << " scale "
           << format_number(row.scale);
        say(os.str());
      }
    }
    save(dir / "final.json");
  } catch (const TrainingDiverged& e) {
    outcome.failed = true;
    outcome.failure = e.what();
    write_text_file((dir / "FAILED").string(), std::string(e.what()) + "\n");
    say("[" + to_string(config.method) + " seed " + std::to_string(seed) +
        "] FAILED: " + e.what());
  }
  return outcome;
}

inline json summarize(const ExperimentConfig& config,
                      const std::vector<SeedOutcome>& outcomes) {
  json per_seed = json::array();
  std::vector<double> rewards;
  std::vector<double> inters;
  std::vector<std::uint64_t> failed;
  for (const auto& o : outcomes) {
    json entry = {{"seed", o.seed}, {"rows", o.rows.size()}, {"failed", o.failed}};
    if (o.failed) {
      entry["failure"] = o.failure;
      failed.push_back(o.seed);
    } else {
      const double r = final_window_mean(column(o.rows, &train::MetricsRow::mean_episode_reward));
      const double s = final_window_mean(column(o.rows, &train::MetricsRow::snd_inter));
      entry["final_window_reward"] = r;
      entry["final_window_snd_inter"] = s;
      rewards.push_back(r);
      inters.push_back(s);
    }
    per_seed.push_back(entry);
  }
  const auto r = mean_std(rewards);
  const auto s = mean_std(inters);
  return {{"format", "dlbc-summary"},
          {"version", 1},
          {"scenario", config.scenario},
          {"method", to_string(config.method)},
          {"snd_des", config.train.dlbc.snd_des},
          {"alpha", config.train.dlbc.alpha},
          {"final_window_fraction", kFinalWindowFraction},
          {"per_seed", per_seed},
          {"failed_seeds", failed},
          {"final_window_reward", {{"mean", r.mean}, {"std", r.std}, {"n", rewards.size()}}},
          {"final_window_snd_inter", {{"mean", s.mean}, {"std", s.std}, {"n", inters.size()}}}};
}

// Trains every configured seed (up to `jobs` at a time) and writes the
// experiment directory. Returns the summary document.
inline json run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr,
                           int jobs = 1) {
  config.validate();
  const fs::path root(config.output_dir);
  ensure_directory(root);
  write_json_file((root / "config.json").string(), to_json(config));

  const auto& seeds = config.train.seeds;
  std::vector<SeedOutcome> outcomes(seeds.size());
  std::mutex log_mutex;
  auto run_one = [&](std::size_t k) {
    outcomes[k] = run_seed(config, seeds[k], root / ("seed_" + std::to_string(seeds[k])),
                           log, &log_mutex);
  };
  if (jobs <= 1 || seeds.size() == 1) {
    for (std::size_t k = 0; k < seeds.size(); ++k) run_one(k);
  } else {
    std::size_t next = 0;
    std::mutex next_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min<int>(jobs, static_cast<int>(seeds.size())); ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t k;
          {
            std::lock_guard<std::mutex> lock(next_mutex);
            if (next >= seeds.size()) return;
            k = next++;
          }
          run_one(k);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  json summary = summarize(config, outcomes);
  write_json_file((root / "summary.json").string(), summary);
  return summary;
}

// ---------------------------------------------------------------------------
// Loading finished runs

struct RunData {
  std::string dir;
  ExperimentConfig config;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<train::MetricsRow>> rows;  // per seed
};

inline RunData load_run(const std::string& dir) {
  RunData run;
  run.dir = dir;
  run.config = load_experiment_config((fs::path(dir) / "config.json").string());
  for (auto seed : run.config.train.seeds) {
    const fs::path seed_dir = fs::path(dir) / ("seed_" + std::to_string(seed));
    if (fs::exists(seed_dir / "FAILED")) continue;
    const fs::path csv = seed_dir / "metrics.csv";
    require(fs::exists(csv), "run '" + dir + "': missing " + csv.string());
    auto rows = read_metrics_csv(csv.string());
    require(!rows.empty(), "run '" + dir + "': empty metrics in " + csv.string());
    run.seeds.push_back(seed);
    run.rows.push_back(std::move(rows));
  }
  require(!run.rows.empty(), "run '" + dir + "': no completed seeds");
  return run;
}

inline std::string run_label(const RunData& run) {
  return to_string(run.config.method) + " (" + fs::path(run.dir).filename().string() + ")";
}

struct ComparisonRow {
  std::string label;
  std::string method;
  std::size_t seeds = 0;
  MeanStd reward;
  MeanStd snd_inter;
};

inline void check_same_scenario(const std::vector<RunData>& runs) {
  require(!runs.empty(), "compare: no runs given");
  for (const auto& r : runs) {
    require(r.config.scenario == runs.front().config.scenario,
            "compare: runs use different scenario tiers (" + runs.front().config.scenario +
                " vs " + r.config.scenario + ") and are not comparable");
  }
}

inline std::vector<ComparisonRow> comparison_table(const std::vector<RunData>& runs) {
  check_same_scenario(runs);
  std::vector<ComparisonRow> table;
  for (const auto& run : runs) {
    std::vector<double> rewards;
    std::vector<double> inters;
    for (const auto& rows : run.rows) {
      rewards.push_back(final_window_mean(column(rows, &train::MetricsRow::mean_episode_reward)));
      inters.push_back(final_window_mean(column(rows, &train::MetricsRow::snd_inter)));
    }
    table.push_back({run_label(run), to_string(run.config.method), run.rows.size(),
                     mean_std(rewards), mean_std(inters)});
  }
  return table;
}

inline std::string format_table(const std::vector<ComparisonRow>& table) {
  std::ostringstream os;
  os << std::left << std::setw(40) << "run" << std::setw(8) << "seeds" << std::setw(26)
     << "final reward (mean+-std)" << "final snd_inter (mean+-std)\n";
  for (const auto& row : table) {
    os << std::left << std::setw(40) << row.label << std::setw(8) << row.seeds
       << std::setw(26)
       << (format_number(row.reward.mean) + " +- " + format_number(row.reward.std))
       << format_number(row.snd_inter.mean) << " +- " << format_number(row.snd_inter.std)
       << "\n";
  }
  return os.str();
}

// Mean and std across seeds at each rollout index (truncated to the shortest seed).
inline render::CurveSeries seed_curve(const RunData& run,
                                      double train::MetricsRow::*field) {
  std::size_t n = run.rows.front().size();
  for (const auto& rows : run.rows) n = std::min(n, rows.size());
  render::CurveSeries s;
  s.label = run_label(run);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> values;
    for (const auto& rows : run.rows) values.push_back(rows[k].*field);
    const auto ms = mean_std(values);
    s.x.push_back(static_cast<double>(run.rows.front()[k].step));
    s.mean.push_back(ms.mean);
    s.std.push_back(ms.std);
  }
  return s;
}

inline std::string plot_runs_svg(const std::vector<RunData>& runs) {
  check_same_scenario(runs);
  render::Panel reward{"mean episode reward (" + runs.front().config.scenario + ")", {}};
  render::Panel inter{"inter-group SND", {}};
  for (const auto& run : runs) {
    reward.series.push_back(seed_curve(run, &train::MetricsRow::mean_episode_reward));
    inter.series.push_back(seed_curve(run, &train::MetricsRow::snd_inter));
  }
  return render::render_curves_svg({reward, inter});
}

// ---------------------------------------------------------------------------
// Evaluation and rendering from checkpoints

inline std::string render_checkpoint(const Checkpoint& ck, std::uint64_t seed,
                                     std::vector<TrajectoryFrame>* frames_out = nullptr) {
  auto frames = rollout_episode(ck.config.env, ck.actor, seed);
  std::string svg = render::render_episode_svg(ck.config.env, ck.partition, frames,
                                               ck.config.render);
  if (frames_out) *frames_out = std::move(frames);
  return svg;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepPoint {
  double alpha = 0.0;
  double snd_des = 0.0;
  std::string dir;
  json summary;
};

inline std::string sweep_dir_name(double alpha, double snd_des) {
  return "alpha_" + format_number(alpha) + "_snd_" + format_number(snd_des);
}

inline std::vector<SweepPoint> run_sweep(const ExperimentConfig& base,
                                         const std::vector<double>& alphas,
                                         const std::vector<double>& snd_des_values,
                                         std::ostream* log = nullptr, int jobs = 1) {
  require(!alphas.empty() && !snd_des_values.empty(), "sweep: empty grid");
  std::vector<SweepPoint> points;
  for (double a : alphas) {
    for (double s : snd_des_values) {
      ExperimentConfig cfg = base;
      cfg.train.dlbc.alpha = a;
      cfg.train.dlbc.snd_des = s;
      cfg.output_dir = (fs::path(base.output_dir) / sweep_dir_name(a, s)).string();
      SweepPoint p{a, s, cfg.output_dir, run_experiment(cfg, log, jobs)};
      points.push_back(std::move(p));
    }
  }
  return points;
}

inline std::string format_sweep(const std::vector<SweepPoint>& points) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "alpha" << std::setw(10) << "snd_des" << std::setw(26)
     << "final reward (mean+-std)" << "final snd_inter\n";
  for (const auto& p : points) {
    const auto& r = p.summary.at("final_window_reward");
    os << std::left << std::setw(10) << format_number(p.alpha) << std::setw(10)
       << format_number(p.snd_des) << std::setw(26)
       << (format_number(r.at("mean").get<double>()) + " +- " +
           format_number(r.at("std").get<double>()))
       << format_number(p.summary.at("final_window_snd_inter").at("mean").get<double>())
       << "\n";
  }
  return os.str();
}

}  // namespace dlbc

#endif  // DLBC_EXPERIMENT_HPP_
