#ifndef DLBC_CONFIG_HPP_
#define DLBC_CONFIG_HPP_

// Experiment configuration and its JSON form. Loading is strict: unknown
// keys are rejected, and every default is written back out when a config is
// stored alongside run artifacts.

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "dlbc/diversity.hpp"
#include "dlbc/env.hpp"
#include "dlbc/error.hpp"
#include "dlbc/trainer.hpp"

namespace dlbc {

using json = nlohmann::json;

struct RenderOptions {
  int width_px = 600;
  double frame_seconds = 0.1;
  bool trails = true;
};

struct ExperimentConfig {
  std::string scenario = "5v2";
  train::Method method = train::Method::kDLBC;
  // Groups controlling the scale: num_evaders for dlbc, 1 for the baseline.
  int num_groups = 2;
  env::EnvConfig env = env::tier_config("5v2");
  train::TrainConfig train;
  std::string output_dir = "runs/default";
  // Periodic checkpoint cadence in rollouts; 0 keeps only the final one.
  int checkpoint_every = 0;
  // Off by default so metrics CSVs are byte-reproducible.
  bool record_wall_time = false;
  RenderOptions render;

  void validate() const {
    env.validate();
    train.validate();
    const auto tier = env::tier_config(scenario);
    require(env.num_pursuers == tier.num_pursuers &&
                env.num_evaders == tier.num_evaders,
            "ExperimentConfig: env counts do not match scenario " + scenario);
    require(train.method == method, "ExperimentConfig: train.method disagrees with method");
    if (method == train::Method::kFixedSndBaseline) {
      require(num_groups == 1,
              "ExperimentConfig: fixed_snd_baseline forbids more than one group");
    } else {
      require(num_groups == env.num_evaders,
              "ExperimentConfig: dlbc uses one group per evader");
    }
    require(checkpoint_every >= 0, "ExperimentConfig: checkpoint_every must be >= 0");
    require(render.width_px >= 50, "ExperimentConfig: render width too small");
    require(render.frame_seconds > 0.0, "ExperimentConfig: frame_seconds must be > 0");
    require(!output_dir.empty(), "ExperimentConfig: output_dir is empty");
  }
};

// ---------------------------------------------------------------------------
// Enum names

inline std::string to_string(train::Method m) {
  return m == train::Method::kDLBC ? "dlbc" : "fixed_snd_baseline";
}

inline train::Method parse_method(const std::string& s) {
  if (s == "dlbc") return train::Method::kDLBC;
  if (s == "fixed_snd_baseline") return train::Method::kFixedSndBaseline;
  throw ContractViolation("unknown method '" + s +
                          "' (expected dlbc or fixed_snd_baseline)");
}

inline std::string to_string(train::GroupingMode m) {
  return m == train::GroupingMode::kContiguous ? "contiguous" : "round_robin";
}

inline train::GroupingMode parse_grouping(const std::string& s) {
  if (s == "contiguous") return train::GroupingMode::kContiguous;
  if (s == "round_robin") return train::GroupingMode::kRoundRobin;
  throw ContractViolation("unknown grouping mode '" + s + "'");
}

inline std::string to_string(IntraAggregation m) {
  return m == IntraAggregation::kMean ? "mean" : "agent_weighted";
}

inline IntraAggregation parse_intra_aggregation(const std::string& s) {
  if (s == "mean") return IntraAggregation::kMean;
  if (s == "agent_weighted") return IntraAggregation::kAgentWeighted;
  throw ContractViolation("unknown intra aggregation '" + s + "'");
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline void reject_unknown(const json& j, const std::set<std::string>& known,
                           const std::string& where) {
  require(j.is_object(), where + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    require(known.count(key) == 1, where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline json to_json(const DLBCParams& p) {
  return {{"snd_des", p.snd_des},
          {"alpha", p.alpha},
          {"denom_floor", p.denom_floor},
          {"max_scale", p.max_scale},
          {"intra_aggregation", to_string(p.intra_aggregation)}};
}

inline DLBCParams dlbc_params_from_json(const json& j) {
  detail::reject_unknown(
      j, {"snd_des", "alpha", "denom_floor", "max_scale", "intra_aggregation"},
      "dlbc");
  DLBCParams p;
  detail::read(j, "snd_des", p.snd_des);
  detail::read(j, "alpha", p.alpha);
  detail::read(j, "denom_floor", p.denom_floor);
  detail::read(j, "max_scale", p.max_scale);
  if (j.contains("intra_aggregation")) {
    p.intra_aggregation =
        parse_intra_aggregation(j.at("intra_aggregation").get<std::string>());
  }
  return p;
}

inline json to_json(const env::EnvConfig& c) {
  return {{"num_pursuers", c.num_pursuers},
          {"num_evaders", c.num_evaders},
          {"arena_half_width", c.arena_half_width},
          {"dt", c.dt},
          {"damping", c.damping},
          {"pursuer_max_speed", c.pursuer_max_speed},
          {"evader_max_speed", c.evader_max_speed},
          {"pursuer_radius", c.pursuer_radius},
          {"evader_radius", c.evader_radius},
          {"max_episode_steps", c.max_episode_steps},
          {"collision_reward", c.collision_reward},
          {"shaping_coeff", c.shaping_coeff}};
}

inline env::EnvConfig env_config_from_json(const json& j, env::EnvConfig c) {
  detail::reject_unknown(
      j,
      {"num_pursuers", "num_evaders", "arena_half_width", "dt", "damping",
       "pursuer_max_speed", "evader_max_speed", "pursuer_radius",
       "evader_radius", "max_episode_steps", "collision_reward", "shaping_coeff"},
      "env");
  detail::read(j, "num_pursuers", c.num_pursuers);
  detail::read(j, "num_evaders", c.num_evaders);
  detail::read(j, "arena_half_width", c.arena_half_width);
  detail::read(j, "dt", c.dt);
  detail::read(j, "damping", c.damping);
  detail::read(j, "pursuer_max_speed", c.pursuer_max_speed);
  detail::read(j, "evader_max_speed", c.evader_max_speed);
  detail::read(j, "pursuer_radius", c.pursuer_radius);
  detail::read(j, "evader_radius", c.evader_radius);
  detail::read(j, "max_episode_steps", c.max_episode_steps);
  detail::read(j, "collision_reward", c.collision_reward);
  detail::read(j, "shaping_coeff", c.shaping_coeff);
  return c;
}

inline json to_json(const train::TrainConfig& c) {
  json j = {{"gamma", c.gamma},
            {"gae_lambda", c.gae_lambda},
            {"clip_eps", c.clip_eps},
            {"learning_rate", c.learning_rate},
            {"epochs", c.epochs},
            {"minibatch_size", c.minibatch_size},
            {"num_envs", c.num_envs},
            {"steps_per_rollout", c.steps_per_rollout},
            {"total_steps", c.total_steps},
            {"entropy_coeff", c.entropy_coeff},
            {"value_coeff", c.value_coeff},
            {"max_grad_norm", c.max_grad_norm},
            {"seeds", c.seeds},
            {"dlbc", to_json(c.dlbc)},
            {"alpha_end", c.alpha_end ? json(*c.alpha_end) : json(nullptr)},
            {"grouping", to_string(c.grouping)},
            {"hidden", c.hidden},
            {"init_log_std", c.init_log_std},
            {"snd_sample_size", c.snd_sample_size},
            {"num_workers", c.num_workers}};
  return j;
}

inline train::TrainConfig train_config_from_json(const json& j) {
  detail::reject_unknown(
      j,
      {"gamma", "gae_lambda", "clip_eps", "learning_rate", "epochs",
       "minibatch_size", "num_envs", "steps_per_rollout", "total_steps",
       "entropy_coeff", "value_coeff", "max_grad_norm", "seeds", "dlbc",
       "alpha_end", "grouping", "hidden", "init_log_std", "snd_sample_size",
       "num_workers"},
      "train");
  train::TrainConfig c;
  detail::read(j, "gamma", c.gamma);
  detail::read(j, "gae_lambda", c.gae_lambda);
  detail::read(j, "clip_eps", c.clip_eps);
  detail::read(j, "learning_rate", c.learning_rate);
  detail::read(j, "epochs", c.epochs);
  detail::read(j, "minibatch_size", c.minibatch_size);
  detail::read(j, "num_envs", c.num_envs);
  detail::read(j, "steps_per_rollout", c.steps_per_rollout);
  detail::read(j, "total_steps", c.total_steps);
  detail::read(j, "entropy_coeff", c.entropy_coeff);
  detail::read(j, "value_coeff", c.value_coeff);
  detail::read(j, "max_grad_norm", c.max_grad_norm);
  detail::read(j, "seeds", c.seeds);
  if (j.contains("dlbc")) c.dlbc = dlbc_params_from_json(j.at("dlbc"));
  if (j.contains("alpha_end") && !j.at("alpha_end").is_null()) {
    c.alpha_end = j.at("alpha_end").get<double>();
  }
  if (j.contains("grouping")) {
    c.grouping = parse_grouping(j.at("grouping").get<std::string>());
  }
  detail::read(j, "hidden", c.hidden);
  detail::read(j, "init_log_std", c.init_log_std);
  detail::read(j, "snd_sample_size", c.snd_sample_size);
  detail::read(j, "num_workers", c.num_workers);
  return c;
}

inline json to_json(const ExperimentConfig& c) {
  return {{"scenario", c.scenario},
          {"method", to_string(c.method)},
          {"num_groups", c.num_groups},
          {"env", to_json(c.env)},
          {"train", to_json(c.train)},
          {"output_dir", c.output_dir},
          {"checkpoint_every", c.checkpoint_every},
          {"record_wall_time", c.record_wall_time},
          {"render",
           {{"width_px", c.render.width_px},
            {"frame_seconds", c.render.frame_seconds},
            {"trails", c.render.trails}}}};
}

// The scenario tier fixes the entity counts; num_groups defaults per method.
inline ExperimentConfig experiment_config_from_json(const json& j) {
  detail::reject_unknown(j,
                         {"scenario", "method", "num_groups", "env", "train",
                          "output_dir", "checkpoint_every", "record_wall_time",
                          "render"},
                         "config");
  ExperimentConfig c;
  detail::read(j, "scenario", c.scenario);
  if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
  c.env = env::tier_config(c.scenario);
  if (j.contains("env")) c.env = env_config_from_json(j.at("env"), c.env);
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  c.train.method = c.method;
  c.num_groups = c.method == train::Method::kDLBC ? c.env.num_evaders : 1;
  detail::read(j, "num_groups", c.num_groups);
  detail::read(j, "output_dir", c.output_dir);
  detail::read(j, "checkpoint_every", c.checkpoint_every);
  detail::read(j, "record_wall_time", c.record_wall_time);
  if (j.contains("render")) {
    const auto& r = j.at("render");
    detail::reject_unknown(r, {"width_px", "frame_seconds", "trails"}, "render");
    detail::read(r, "width_px", c.render.width_px);
    detail::read(r, "frame_seconds", c.render.frame_seconds);
    detail::read(r, "trails", c.render.trails);
  }
  c.validate();
  return c;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("malformed JSON in '" + path + "': " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  try {
    return experiment_config_from_json(read_json_file(path));
  } catch (const json::exception& e) {
    throw ContractViolation("config '" + path + "': " + e.what());
  }
}

}  // namespace dlbc

#endif  // DLBC_CONFIG_HPP_
