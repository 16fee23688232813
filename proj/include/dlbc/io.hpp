#ifndef DLBC_IO_HPP_
#define DLBC_IO_HPP_

// On-disk formats: metrics CSV, checkpoint JSON and trajectory JSON lines.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dlbc/config.hpp"
#include "dlbc/env.hpp"
#include "dlbc/error.hpp"
#include "dlbc/policy.hpp"
#include "dlbc/trainer.hpp"

namespace dlbc {

// ---------------------------------------------------------------------------
// Metrics CSV
//
// Line 1 is a version tag, line 2 the header (MetricsRow fields in order,
// with one snd_intra_<g> column per group), then one row per rollout.

inline constexpr const char* kMetricsVersionTag = "#dlbc-metrics v1";

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline std::vector<std::string> metrics_header(std::size_t num_groups) {
  std::vector<std::string> cols = {"step", "mean_episode_reward"};
  for (std::size_t g = 0; g < num_groups; ++g) {
    cols.push_back("snd_intra_" + std::to_string(g));
  }
  for (const char* c : {"snd_inter", "combined_snd", "scale", "alpha",
                        "policy_loss", "value_loss", "entropy", "kl",
                        "clip_fraction", "wall_time"}) {
    cols.emplace_back(c);
  }
  return cols;
}

inline std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, std::size_t num_groups)
      : path_(path), num_groups_(num_groups), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open '" + path + "' for writing");
    out_ << kMetricsVersionTag << '\n' << join(metrics_header(num_groups), ',') << '\n';
    out_.flush();
  }

  void write(const train::MetricsRow& row) {
    require(row.snd_intra.size() == num_groups_,
            "MetricsWriter: row has the wrong number of groups");
    std::vector<std::string> cells = {std::to_string(row.step),
                                      format_number(row.mean_episode_reward)};
    for (double v : row.snd_intra) cells.push_back(format_number(v));
    for (double v : {row.snd_inter, row.combined_snd, row.scale, row.alpha,
                     row.policy_loss, row.value_loss, row.entropy, row.kl,
                     row.clip_fraction, row.wall_time}) {
      cells.push_back(format_number(v));
    }
    out_ << join(cells, ',') << '\n';
    out_.flush();
    if (!out_) throw std::runtime_error("write failed for '" + path_ + "'");
  }

 private:
  std::string path_;
  std::size_t num_groups_;
  std::ofstream out_;
};

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, sep)) parts.push_back(cell);
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

inline std::vector<train::MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::string line;
  std::getline(in, line);
  require(line == kMetricsVersionTag,
          "metrics '" + path + "': unsupported version tag '" + line + "'");
  std::getline(in, line);
  const auto header = split(line, ',');
  require(header.size() >= 13, "metrics '" + path + "': header too short");
  const std::size_t groups = header.size() - 12;
  require(header == metrics_header(groups),
          "metrics '" + path + "': unexpected column set");

  std::vector<train::MetricsRow> rows;
  long previous_step = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    require(cells.size() == header.size(),
            "metrics '" + path + "': wrong cell count in row " +
                std::to_string(rows.size() + 1));
    std::vector<double> v;
    try {
      for (const auto& c : cells) v.push_back(std::stod(c));
    } catch (const std::exception&) {
      throw ContractViolation("metrics '" + path + "': unparsable number in row " +
                              std::to_string(rows.size() + 1));
    }
    train::MetricsRow r;
    std::size_t k = 0;
    r.step = static_cast<long>(v[k++]);
    r.mean_episode_reward = v[k++];
    for (std::size_t g = 0; g < groups; ++g) r.snd_intra.push_back(v[k++]);
    r.snd_inter = v[k++];
    r.combined_snd = v[k++];
    r.scale = v[k++];
    r.alpha = v[k++];
    r.policy_loss = v[k++];
    r.value_loss = v[k++];
    r.entropy = v[k++];
    r.kl = v[k++];
    r.clip_fraction = v[k++];
    r.wall_time = v[k++];
    require(r.step > previous_step,
            "metrics '" + path + "': steps are not increasing");
    previous_step = r.step;
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr const char* kCheckpointFormat = "dlbc-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  ExperimentConfig config;
  std::uint64_t seed = 0;
  long step = 0;
  long rollouts = 0;
  GroupPartition partition;  // K-group split used for colors and metrics
  DLBCActor actor;
  Critic critic;
};

inline json checkpoint_to_json(const ExperimentConfig& config, std::uint64_t seed,
                               long step, long rollouts,
                               const GroupPartition& partition,
                               const DLBCActor& actor, const Critic& critic) {
  json heads = json::array();
  for (int i = 0; i < actor.num_agents(); ++i) {
    heads.push_back(actor.head(i).flat_parameters());
  }
  json critics = json::array();
  for (int i = 0; i < critic.num_agents(); ++i) {
    critics.push_back(critic.net(i).flat_parameters());
  }
  const auto& log_std = actor.log_std().value();
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"seed", seed},
          {"step", step},
          {"rollouts", rollouts},
          {"config", to_json(config)},
          {"dlbc", to_json(config.train.dlbc)},
          {"partition", partition.assignment()},
          {"actor",
           {{"obs_dim", actor.spec().obs_dim},
            {"action_dim", actor.spec().action_dim},
            {"hidden", actor.spec().hidden},
            {"num_agents", actor.num_agents()},
            {"scale", actor.scale()},
            {"log_std", std::vector<double>(log_std.data(), log_std.data() + log_std.size())},
            {"trunk", actor.trunk().flat_parameters()},
            {"heads", heads}}},
          {"critic", {{"hidden", critic.hidden()}, {"nets", critics}}}};
}

inline Checkpoint checkpoint_from_json(const json& j) {
  require(j.value("format", std::string()) == kCheckpointFormat,
          "checkpoint: not a dlbc checkpoint");
  const int version = j.value("version", -1);
  if (version != kCheckpointVersion) {
    throw ContractViolation("checkpoint: stored version " + std::to_string(version) +
                            " is incompatible with expected version " +
                            std::to_string(kCheckpointVersion));
  }
  Checkpoint ck;
  ck.config = experiment_config_from_json(j.at("config"));
  ck.seed = j.at("seed").get<std::uint64_t>();
  ck.step = j.at("step").get<long>();
  ck.rollouts = j.at("rollouts").get<long>();
  ck.partition = GroupPartition(j.at("partition").get<std::vector<std::size_t>>());

  const auto& a = j.at("actor");
  ActorSpec spec;
  spec.obs_dim = a.at("obs_dim").get<int>();
  spec.action_dim = a.at("action_dim").get<int>();
  spec.hidden = a.at("hidden").get<std::vector<int>>();
  spec.num_agents = a.at("num_agents").get<int>();
  std::mt19937_64 rng(0);  // shapes only; every value is overwritten
  ck.actor = DLBCActor(spec, rng);
  ck.actor.trunk().set_flat_parameters(a.at("trunk").get<std::vector<double>>());
  const auto& heads = a.at("heads");
  require(heads.size() == static_cast<std::size_t>(spec.num_agents),
          "checkpoint: one deviation head per agent required");
  for (int i = 0; i < spec.num_agents; ++i) {
    ck.actor.head(i).set_flat_parameters(
        heads.at(static_cast<std::size_t>(i)).get<std::vector<double>>());
  }
  const auto log_std = a.at("log_std").get<std::vector<double>>();
  require(log_std.size() == static_cast<std::size_t>(spec.action_dim),
          "checkpoint: log_std length mismatch");
  for (int d = 0; d < spec.action_dim; ++d) {
    ck.actor.log_std().mutable_value()(0, d) = log_std[static_cast<std::size_t>(d)];
  }
  ck.actor.set_scale(a.at("scale").get<double>());

  const auto& c = j.at("critic");
  const auto nets = c.at("nets");
  ck.critic = Critic(spec.obs_dim, c.at("hidden").get<std::vector<int>>(),
                     static_cast<int>(nets.size()), rng);
  for (std::size_t i = 0; i < nets.size(); ++i) {
    ck.critic.net(static_cast<int>(i)).set_flat_parameters(
        nets.at(i).get<std::vector<double>>());
  }
  require(ck.partition.num_agents() == static_cast<std::size_t>(spec.num_agents),
          "checkpoint: partition does not cover the actor's agents");
  return ck;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  try {
    return checkpoint_from_json(read_json_file(path));
  } catch (const json::exception& e) {
    throw ContractViolation("checkpoint '" + path + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Trajectories

struct TrajectoryFrame {
  int step = 0;
  std::vector<env::Vec2> positions;
  std::vector<env::Vec2> velocities;
  std::vector<double> rewards;
  int collisions = 0;
};

inline json to_json(const TrajectoryFrame& f) {
  auto pairs = [](const std::vector<env::Vec2>& v) {
    json arr = json::array();
    for (const auto& p : v) arr.push_back({p.x(), p.y()});
    return arr;
  };
  return {{"step", f.step},
          {"positions", pairs(f.positions)},
          {"velocities", pairs(f.velocities)},
          {"rewards", f.rewards},
          {"collisions", f.collisions}};
}

inline TrajectoryFrame trajectory_frame_from_json(const json& j) {
  auto pairs = [](const json& arr) {
    std::vector<env::Vec2> v;
    for (const auto& p : arr) v.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    return v;
  };
  TrajectoryFrame f;
  f.step = j.at("step").get<int>();
  f.positions = pairs(j.at("positions"));
  f.velocities = pairs(j.at("velocities"));
  f.rewards = j.at("rewards").get<std::vector<double>>();
  f.collisions = j.at("collisions").get<int>();
  return f;
}

inline void write_trajectory(const std::string& path,
                             const std::vector<TrajectoryFrame>& frames) {
  std::string text;
  for (const auto& f : frames) text += to_json(f).dump() + "\n";
  write_text_file(path, text);
}

inline std::vector<TrajectoryFrame> read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::vector<TrajectoryFrame> frames;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) frames.push_back(trajectory_frame_from_json(json::parse(line)));
  }
  return frames;
}

// Greedy (mean-action) episode from `seed`. Frame 0 is the reset state.
inline std::vector<TrajectoryFrame> rollout_episode(const env::EnvConfig& cfg,
                                                    const DLBCActor& actor,
                                                    std::uint64_t seed) {
  env::PursuitEnv world(cfg);
  Matrix obs = world.reset(seed);
  std::vector<TrajectoryFrame> frames;
  auto capture = [&](int collisions, std::vector<double> rewards) {
    TrajectoryFrame f;
    f.step = world.state().step;
    f.positions = world.state().position;
    f.velocities = world.state().velocity;
    f.rewards = std::move(rewards);
    f.collisions = collisions;
    frames.push_back(std::move(f));
  };
  capture(0, std::vector<double>(static_cast<std::size_t>(cfg.num_pursuers), 0.0));
  bool done = false;
  while (!done) {
    Matrix actions(cfg.num_pursuers, 2);
    for (int i = 0; i < cfg.num_pursuers; ++i) {
      const auto dist = actor.evaluate(i, obs.row(i));
      actions.row(i) = dist.means.row(0);
    }
    auto result = world.step(actions);
    done = result.done;
    obs = result.observations;
    capture(result.collisions, result.rewards);
  }
  return frames;
}

// Mean over pursuers of the summed rewards in an episode.
inline double episode_mean_return(const std::vector<TrajectoryFrame>& frames) {
  double total = 0.0;
  std::size_t pursuers = 0;
  for (std::size_t k = 1; k < frames.size(); ++k) {
    pursuers = frames[k].rewards.size();
    for (double r : frames[k].rewards) total += r;
  }
  return pursuers == 0 ? 0.0 : total / static_cast<double>(pursuers);
}

}  // namespace dlbc

#endif  // DLBC_IO_HPP_
