#ifndef DLBC_TRAINER_HPP_
#define DLBC_TRAINER_HPP_

// Independent PPO over the DLBC actor.
//
// Each rollout phase: refresh the actor's diversity scale from a sample of
// recent observations, collect on-policy transitions from every parallel
// environment, compute per-agent GAE, then run clipped-surrogate updates.
// Each agent has its own surrogate, critic and advantages; the shared trunk
// receives the sum of all agents' gradients.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "dlbc/diversity.hpp"
#include "dlbc/env.hpp"
#include "dlbc/error.hpp"
#include "dlbc/optim.hpp"
#include "dlbc/policy.hpp"
#include "dlbc/tensor.hpp"

namespace dlbc::train {

enum class GroupingMode { kContiguous, kRoundRobin };
enum class Method { kDLBC, kFixedSndBaseline };

// K = num_evaders balanced groups. Contiguous fills group 0 with the first
// ceil(N/K) agents, and so on; round-robin deals agent i to group i % K.
inline GroupPartition assign_groups(int num_pursuers, int num_evaders,
                                    GroupingMode mode) {
  require(num_evaders >= 1, "assign_groups: need at least one evader");
  require(num_pursuers >= num_evaders,
          "assign_groups: fewer pursuers than evaders");
  const auto n = static_cast<std::size_t>(num_pursuers);
  const auto k = static_cast<std::size_t>(num_evaders);
  std::vector<std::size_t> assignment(n);
  if (mode == GroupingMode::kRoundRobin) {
    for (std::size_t i = 0; i < n; ++i) assignment[i] = i % k;
  } else {
    // Balanced sizes: the first n % k groups get one extra member.
    const std::size_t base = n / k;
    const std::size_t extra = n % k;
    std::size_t agent = 0;
    for (std::size_t g = 0; g < k; ++g) {
      const std::size_t size = base + (g < extra ? 1 : 0);
      for (std::size_t m = 0; m < size; ++m) assignment[agent++] = g;
    }
  }
  return GroupPartition(std::move(assignment));
}

inline GroupPartition single_group(int num_agents) {
  return GroupPartition(
      std::vector<std::size_t>(static_cast<std::size_t>(num_agents), 0));
}

struct TrainConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double learning_rate = 3e-4;
  int epochs = 4;
  int minibatch_size = 256;
  int num_envs = 16;
  int steps_per_rollout = 125;
  long total_steps = 300000;
  double entropy_coeff = 0.0;
  double value_coeff = 0.5;
  double max_grad_norm = 0.5;
  std::vector<std::uint64_t> seeds = {0};
  DLBCParams dlbc;
  // When set, alpha moves linearly from dlbc.alpha to alpha_end over training.
  std::optional<double> alpha_end;
  GroupingMode grouping = GroupingMode::kContiguous;
  Method method = Method::kDLBC;
  std::vector<int> hidden = {64, 64};
  double init_log_std = -0.5;
  int snd_sample_size = 512;
  int num_workers = 1;

  long steps_per_phase() const {
    return static_cast<long>(num_envs) * steps_per_rollout;
  }
  long num_rollouts() const { return total_steps / steps_per_phase(); }

  void validate() const {
    require(gamma > 0.0 && gamma <= 1.0, "TrainConfig: gamma outside (0,1]");
    require(gae_lambda >= 0.0 && gae_lambda <= 1.0,
            "TrainConfig: gae_lambda outside [0,1]");
    require(clip_eps > 0.0, "TrainConfig: clip_eps must be > 0");
    require(learning_rate > 0.0, "TrainConfig: learning_rate must be > 0");
    require(epochs >= 1, "TrainConfig: epochs must be >= 1");
    require(minibatch_size >= 1, "TrainConfig: minibatch_size must be >= 1");
    require(num_envs >= 1, "TrainConfig: num_envs must be >= 1");
    require(steps_per_rollout >= 1, "TrainConfig: steps_per_rollout must be >= 1");
    require(total_steps >= steps_per_phase() &&
                total_steps % steps_per_phase() == 0,
            "TrainConfig: total_steps must be a positive multiple of "
            "num_envs * steps_per_rollout");
    require(entropy_coeff >= 0.0 && value_coeff >= 0.0,
            "TrainConfig: loss coefficients must be >= 0");
    require(max_grad_norm > 0.0, "TrainConfig: max_grad_norm must be > 0");
    require(!seeds.empty(), "TrainConfig: seeds list is empty");
    dlbc.validate();
    if (alpha_end) {
      require(*alpha_end >= 0.0 && *alpha_end <= 1.0,
              "TrainConfig: alpha_end outside [0,1]");
    }
    for (int h : hidden) require(h >= 1, "TrainConfig: hidden widths must be >= 1");
    require(snd_sample_size >= 1, "TrainConfig: snd_sample_size must be >= 1");
    require(num_workers >= 1, "TrainConfig: num_workers must be >= 1");
  }

  double alpha_at(double progress) const {
    if (!alpha_end) return dlbc.alpha;
    const double p = std::clamp(progress, 0.0, 1.0);
    return dlbc.alpha + (*alpha_end - dlbc.alpha) * p;
  }
};

// ---------------------------------------------------------------------------
// GAE

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// delta_t = r_t + gamma * V_{t+1} * (1 - done_t) - V_t
// A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
// V_T is `bootstrap_value`.
inline GaeResult compute_gae(std::span<const double> rewards,
                             std::span<const double> values,
                             std::span<const double> dones,
                             double bootstrap_value, double gamma,
                             double lambda) {
  require(rewards.size() == values.size() && rewards.size() == dones.size(),
          "compute_gae: rewards, values and dones differ in length");
  const std::size_t n = rewards.size();
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_advantage = 0.0;
  double next_value = bootstrap_value;
  for (std::size_t k = n; k-- > 0;) {
    const double live = 1.0 - dones[k];
    const double delta = rewards[k] + gamma * next_value * live - values[k];
    next_advantage = delta + gamma * lambda * live * next_advantage;
    out.advantages[k] = next_advantage;
    out.returns[k] = next_advantage + values[k];
    next_value = values[k];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rollout storage

// One agent's transitions; row index = step * num_envs + env.
struct AgentTrajectories {
  Matrix observations;
  Matrix actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<double> dones;
  std::vector<double> advantages;
  std::vector<double> returns;
};

struct RolloutBuffer {
  int num_envs = 0;
  int steps = 0;
  std::vector<AgentTrajectories> agents;
  // Per env, value estimate of the state after the last stored step.
  std::vector<std::vector<double>> bootstrap_values;  // [agent][env]
  bool has_advantages = false;

  std::size_t size() const {
    return static_cast<std::size_t>(num_envs) * static_cast<std::size_t>(steps);
  }
  std::size_t row(int env, int step) const {
    return static_cast<std::size_t>(step) * static_cast<std::size_t>(num_envs) +
           static_cast<std::size_t>(env);
  }
};

// Fills advantages and returns for every agent, one GAE pass per env.
inline void compute_advantages(RolloutBuffer& buffer, double gamma,
                               double lambda) {
  for (std::size_t a = 0; a < buffer.agents.size(); ++a) {
    auto& traj = buffer.agents[a];
    traj.advantages.assign(buffer.size(), 0.0);
    traj.returns.assign(buffer.size(), 0.0);
    std::vector<double> r(static_cast<std::size_t>(buffer.steps));
    std::vector<double> v(r.size());
    std::vector<double> d(r.size());
    for (int e = 0; e < buffer.num_envs; ++e) {
      for (int t = 0; t < buffer.steps; ++t) {
        const auto idx = buffer.row(e, t);
        r[static_cast<std::size_t>(t)] = traj.rewards[idx];
        v[static_cast<std::size_t>(t)] = traj.values[idx];
        d[static_cast<std::size_t>(t)] = traj.dones[idx];
      }
      const auto gae = compute_gae(r, v, d,
                                   buffer.bootstrap_values[a][static_cast<std::size_t>(e)],
                                   gamma, lambda);
      for (int t = 0; t < buffer.steps; ++t) {
        const auto idx = buffer.row(e, t);
        traj.advantages[idx] = gae.advantages[static_cast<std::size_t>(t)];
        traj.returns[idx] = gae.returns[static_cast<std::size_t>(t)];
      }
    }
  }
  buffer.has_advantages = true;
}

// ---------------------------------------------------------------------------
// Parallel environments

struct EnvSlot {
  env::PursuitEnv env;
  Matrix obs;
  std::mt19937_64 rng;
  std::vector<double> episode_return;
};

class VectorEnv {
 public:
  VectorEnv(const env::EnvConfig& cfg, int num_envs, std::uint64_t seed) {
    std::seed_seq seq{seed, std::uint64_t{0x5eed}};
    std::vector<std::uint64_t> seeds(static_cast<std::size_t>(num_envs));
    seq.generate(seeds.begin(), seeds.end());
    for (int e = 0; e < num_envs; ++e) {
      EnvSlot slot{env::PursuitEnv(cfg), Matrix(), std::mt19937_64(seeds[e]), {}};
      slot.obs = slot.env.reset(slot.rng());
      slot.episode_return.assign(static_cast<std::size_t>(cfg.num_pursuers), 0.0);
      slots_.push_back(std::move(slot));
    }
  }

  int size() const { return static_cast<int>(slots_.size()); }
  int num_pursuers() const { return slots_.front().env.num_pursuers(); }
  int observation_size() const { return slots_.front().env.observation_size(); }
  EnvSlot& slot(int e) { return slots_[static_cast<std::size_t>(e)]; }
  const EnvSlot& slot(int e) const { return slots_[static_cast<std::size_t>(e)]; }

  // Observations of `agent` in every env, num_envs x obs_dim.
  Matrix agent_observations(int agent) const {
    Matrix out(size(), observation_size());
    for (int e = 0; e < size(); ++e) out.row(e) = slot(e).obs.row(agent);
    return out;
  }

  // Every agent's observation in every env stacked, (num_envs * N) x obs_dim.
  Matrix all_observations() const {
    const int n = num_pursuers();
    Matrix out(size() * n, observation_size());
    for (int e = 0; e < size(); ++e) out.middleRows(e * n, n) = slot(e).obs;
    return out;
  }

  // Mean-over-pursuers returns of episodes finished since the last drain.
  std::vector<double> drain_finished() {
    std::vector<double> out;
    out.swap(finished_);
    return out;
  }
  void record_finished(double mean_return) { finished_.push_back(mean_return); }

 private:
  std::vector<EnvSlot> slots_;
  std::vector<double> finished_;
};

// Steps one env with pre-sampled actions, storing rewards/dones into the
// buffer row and auto-resetting finished episodes. Returns the mean-over-
// pursuers episode return if the episode ended, NaN otherwise.
inline double step_slot(EnvSlot& slot, const Matrix& actions,
                        RolloutBuffer& buffer, std::size_t row) {
  auto result = slot.env.step(actions);
  for (std::size_t a = 0; a < result.rewards.size(); ++a) {
    buffer.agents[a].rewards[row] = result.rewards[a];
    buffer.agents[a].dones[row] = result.done ? 1.0 : 0.0;
    slot.episode_return[a] += result.rewards[a];
  }
  double finished = std::numeric_limits<double>::quiet_NaN();
  if (result.done) {
    finished = std::accumulate(slot.episode_return.begin(),
                               slot.episode_return.end(), 0.0) /
               static_cast<double>(slot.episode_return.size());
    std::fill(slot.episode_return.begin(), slot.episode_return.end(), 0.0);
    slot.obs = slot.env.reset(slot.rng());
  } else {
    slot.obs = std::move(result.observations);
  }
  return finished;
}

// Collects `steps` transitions per env with the actor's current scale.
// Forward passes are batched over envs; sampling and stepping can fan out
// over `num_workers` threads because every env owns its RNG.
inline RolloutBuffer collect_rollouts(const DLBCActor& actor, const Critic& critic,
                                      VectorEnv& envs, int steps,
                                      int num_workers = 1) {
  require(steps >= 1, "collect_rollouts: steps must be >= 1");
  const int n_agents = envs.num_pursuers();
  require(actor.num_agents() == n_agents && critic.num_agents() == n_agents,
          "collect_rollouts: network agent count does not match the envs");
  const int n_envs = envs.size();
  const int obs_dim = envs.observation_size();
  const int act_dim = actor.spec().action_dim;
  require(act_dim == 2, "collect_rollouts: pursuit actions are 2-D");

  RolloutBuffer buffer;
  buffer.num_envs = n_envs;
  buffer.steps = steps;
  buffer.agents.resize(static_cast<std::size_t>(n_agents));
  for (auto& traj : buffer.agents) {
    traj.observations.resize(static_cast<Eigen::Index>(buffer.size()), obs_dim);
    traj.actions.resize(static_cast<Eigen::Index>(buffer.size()), act_dim);
    traj.log_probs.assign(buffer.size(), 0.0);
    traj.rewards.assign(buffer.size(), 0.0);
    traj.values.assign(buffer.size(), 0.0);
    traj.dones.assign(buffer.size(), 0.0);
  }

  std::vector<AgentPolicyBatch> dists(static_cast<std::size_t>(n_agents));
  std::vector<Matrix> actions(static_cast<std::size_t>(n_envs),
                              Matrix(n_agents, act_dim));
  std::vector<double> finished(static_cast<std::size_t>(n_envs));

  for (int t = 0; t < steps; ++t) {
    for (int a = 0; a < n_agents; ++a) {
      const Matrix obs = envs.agent_observations(a);
      dists[static_cast<std::size_t>(a)] = actor.evaluate(a, obs);
      const Matrix values = critic.evaluate(a, obs);
      auto& traj = buffer.agents[static_cast<std::size_t>(a)];
      for (int e = 0; e < n_envs; ++e) {
        const auto row = buffer.row(e, t);
        traj.observations.row(static_cast<Eigen::Index>(row)) = obs.row(e);
        traj.values[row] = values(e, 0);
      }
    }

    auto work = [&](int begin, int end) {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (int e = begin; e < end; ++e) {
        auto& slot = envs.slot(e);
        const auto row = buffer.row(e, t);
        for (int a = 0; a < n_agents; ++a) {
          const auto& dist = dists[static_cast<std::size_t>(a)];
          const DiagGaussian g(dist.means.row(e).transpose(),
                               dist.stds.row(e).transpose());
          Vector sample(act_dim);
          for (int d = 0; d < act_dim; ++d) {
            sample[d] = g.mean[d] + g.std[d] * normal(slot.rng);
          }
          actions[static_cast<std::size_t>(e)].row(a) = sample.transpose();
          auto& traj = buffer.agents[static_cast<std::size_t>(a)];
          traj.actions.row(static_cast<Eigen::Index>(row)) = sample.transpose();
          traj.log_probs[row] = log_prob(g, sample);
        }
        finished[static_cast<std::size_t>(e)] =
            step_slot(slot, actions[static_cast<std::size_t>(e)], buffer, row);
      }
    };

    const int workers = std::min(num_workers, n_envs);
    if (workers <= 1) {
      work(0, n_envs);
    } else {
      std::vector<std::thread> pool;
      const int chunk = (n_envs + workers - 1) / workers;
      for (int w = 0; w < workers; ++w) {
        const int begin = w * chunk;
        const int end = std::min(n_envs, begin + chunk);
        if (begin < end) pool.emplace_back(work, begin, end);
      }
      for (auto& th : pool) th.join();
    }
    for (int e = 0; e < n_envs; ++e) {
      if (!std::isnan(finished[static_cast<std::size_t>(e)])) {
        envs.record_finished(finished[static_cast<std::size_t>(e)]);
      }
    }
  }

  buffer.bootstrap_values.resize(static_cast<std::size_t>(n_agents));
  for (int a = 0; a < n_agents; ++a) {
    const Matrix values = critic.evaluate(a, envs.agent_observations(a));
    auto& boot = buffer.bootstrap_values[static_cast<std::size_t>(a)];
    boot.resize(static_cast<std::size_t>(n_envs));
    for (int e = 0; e < n_envs; ++e) boot[static_cast<std::size_t>(e)] = values(e, 0);
  }
  return buffer;
}

// ---------------------------------------------------------------------------
// PPO

// One agent's minibatch, already gathered out of the rollout buffer.
struct Minibatch {
  Matrix observations;
  Matrix actions;
  Eigen::VectorXd old_log_probs;
  Eigen::VectorXd advantages;  // normalized
  Eigen::VectorXd returns;
};

inline Minibatch gather_minibatch(const AgentTrajectories& traj,
                                  std::span<const std::size_t> rows) {
  require(!rows.empty(), "gather_minibatch: no rows");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Minibatch mb;
  mb.observations.resize(n, traj.observations.cols());
  mb.actions.resize(n, traj.actions.cols());
  mb.old_log_probs.resize(n);
  mb.advantages.resize(n);
  mb.returns.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto r = rows[static_cast<std::size_t>(k)];
    mb.observations.row(k) = traj.observations.row(static_cast<Eigen::Index>(r));
    mb.actions.row(k) = traj.actions.row(static_cast<Eigen::Index>(r));
    mb.old_log_probs[k] = traj.log_probs[r];
    mb.advantages[k] = traj.advantages[r];
    mb.returns[k] = traj.returns[r];
  }
  // Zero mean, unit variance; a single sample is only centered.
  const double mean = mb.advantages.mean();
  mb.advantages.array() -= mean;
  if (n > 1) {
    const double var = mb.advantages.squaredNorm() / static_cast<double>(n - 1);
    mb.advantages /= std::sqrt(var) + 1e-8;
  }
  return mb;
}

struct PpoLoss {
  nn::Tensor total;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

// -mean(min(rho A, clip(rho, 1 +- eps) A)) - c_ent * H + c_v * mean((V - R)^2)
inline PpoLoss ppo_loss(const DLBCActor& actor, const Critic& critic, int agent,
                        const Minibatch& mb, const TrainConfig& cfg) {
  using nn::Tensor;
  const auto n = mb.observations.rows();
  const Tensor obs = Tensor::constant(mb.observations);
  const auto dist = actor.forward(agent, obs);
  const Tensor new_lp = nn::log_prob(dist, mb.actions);
  const Tensor old_lp = Tensor::constant(Matrix(mb.old_log_probs));
  const Tensor log_ratio = new_lp - old_lp;
  const Tensor ratio = nn::exp(log_ratio);
  const Tensor adv = Tensor::constant(Matrix(mb.advantages));
  const Tensor unclipped = ratio * adv;
  const Tensor clipped =
      nn::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv;
  const Tensor policy = -nn::mean(nn::minimum(unclipped, clipped));
  const Tensor ent = nn::mean(nn::entropy(dist));
  const Tensor values = critic.forward(agent, obs);
  const Tensor value =
      nn::mean(nn::square(values - Tensor::constant(Matrix(mb.returns))));

  PpoLoss out;
  out.total = policy + ent * -cfg.entropy_coeff + value * cfg.value_coeff;
  out.policy_loss = policy.item();
  out.value_loss = value.item();
  out.entropy = ent.item();
  const auto& lr = log_ratio.value();
  const auto& r = ratio.value();
  out.approx_kl = ((r.array() - 1.0) - lr.array()).mean();
  out.clip_fraction =
      ((r.array() - 1.0).abs() > cfg.clip_eps).cast<double>().sum() /
      static_cast<double>(n);
  return out;
}

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
  int gradient_steps = 0;
};

// Epochs of shuffled minibatches; every minibatch sums the per-agent losses
// over the same (env, step) rows and takes one clipped Adam step.
inline UpdateStats ppo_update(const RolloutBuffer& buffer, const DLBCActor& actor,
                              const Critic& critic, nn::Adam& optimizer,
                              const TrainConfig& cfg, std::mt19937_64& rng) {
  require(buffer.has_advantages, "ppo_update: compute advantages first");
  std::vector<std::size_t> rows(buffer.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  UpdateStats stats;
  double terms = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t start = 0; start < rows.size();
         start += static_cast<std::size_t>(cfg.minibatch_size)) {
      const std::size_t end =
          std::min(rows.size(), start + static_cast<std::size_t>(cfg.minibatch_size));
      const std::span<const std::size_t> batch_rows(rows.data() + start, end - start);
      optimizer.zero_grad();
      std::optional<nn::Tensor> total;
      for (int a = 0; a < actor.num_agents(); ++a) {
        const auto mb =
            gather_minibatch(buffer.agents[static_cast<std::size_t>(a)], batch_rows);
        auto loss = ppo_loss(actor, critic, a, mb, cfg);
        if (!std::isfinite(loss.total.item())) {
          throw TrainingDiverged("ppo_update: non-finite loss for agent " +
                                 std::to_string(a) + " (policy " +
                                 std::to_string(loss.policy_loss) + ", value " +
                                 std::to_string(loss.value_loss) + ")");
        }
        total = total ? *total + loss.total : loss.total;
        stats.policy_loss += loss.policy_loss;
        stats.value_loss += loss.value_loss;
        stats.entropy += loss.entropy;
        stats.approx_kl += loss.approx_kl;
        stats.clip_fraction += loss.clip_fraction;
        terms += 1.0;
      }
      total->backward();
      stats.grad_norm = optimizer.clip_grad_norm(cfg.max_grad_norm);
      optimizer.step();
      ++stats.gradient_steps;
    }
  }
  stats.policy_loss /= terms;
  stats.value_loss /= terms;
  stats.entropy /= terms;
  stats.approx_kl /= terms;
  stats.clip_fraction /= terms;
  return stats;
}

// ---------------------------------------------------------------------------
// Diversity control

// Measures SND with the deviation heads at scale 1, installs the resulting
// scale on the actor and returns the scale-1 report.
inline SNDReport refresh_scale(DLBCActor& actor, const GroupPartition& partition,
                               const Matrix& obs_sample, const DLBCParams& params) {
  require(obs_sample.rows() >= 1, "refresh_scale: empty observation sample");
  const auto report = measure_snd(partition, actor.snapshot(obs_sample, 1.0), params);
  actor.set_scale(report.scale);
  return report;
}

// ---------------------------------------------------------------------------
// Training loop

struct MetricsRow {
  long step = 0;
  double mean_episode_reward = 0.0;
  std::vector<double> snd_intra;
  double snd_inter = 0.0;
  double combined_snd = 0.0;
  double scale = 0.0;
  double alpha = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
  double wall_time = 0.0;
};

// Owns everything one seed of one method needs. The control partition drives
// the scale (K groups for DLBC, one group for the baseline); the measurement
// partition is always the K-group split so both methods report comparable
// per-group and cross-group SND.
class Trainer {
 public:
  Trainer(const env::EnvConfig& env_cfg, TrainConfig cfg, std::uint64_t seed)
      : env_cfg_(env_cfg),
        cfg_(std::move(cfg)),
        rng_(seed),
        envs_(env_cfg, cfg_.num_envs, seed) {
    cfg_.validate();
    env_cfg_.validate();
    measure_partition_ = assign_groups(env_cfg_.num_pursuers, env_cfg_.num_evaders,
                                       cfg_.grouping);
    control_partition_ = cfg_.method == Method::kDLBC
                             ? measure_partition_
                             : single_group(env_cfg_.num_pursuers);
    ActorSpec spec;
    spec.obs_dim = env_cfg_.observation_size();
    spec.action_dim = 2;
    spec.hidden = cfg_.hidden;
    spec.num_agents = env_cfg_.num_pursuers;
    spec.init_log_std = cfg_.init_log_std;
    actor_ = DLBCActor(spec, rng_);
    critic_ = Critic(spec.obs_dim, cfg_.hidden, spec.num_agents, rng_);
    std::vector<nn::Tensor> params = actor_.parameters();
    const auto critic_params = critic_.parameters();
    params.insert(params.end(), critic_params.begin(), critic_params.end());
    optimizer_.emplace(std::move(params), nn::Adam::Options{cfg_.learning_rate});
    obs_pool_ = envs_.all_observations();
  }

  const env::EnvConfig& env_config() const { return env_cfg_; }
  const TrainConfig& config() const { return cfg_; }
  DLBCActor& actor() { return actor_; }
  const DLBCActor& actor() const { return actor_; }
  Critic& critic() { return critic_; }
  const Critic& critic() const { return critic_; }
  const GroupPartition& measure_partition() const { return measure_partition_; }
  const GroupPartition& control_partition() const { return control_partition_; }
  long env_steps() const { return env_steps_; }
  long rollouts_done() const { return rollouts_; }
  bool finished() const { return rollouts_ >= cfg_.num_rollouts(); }

  DLBCParams current_params() const {
    DLBCParams p = cfg_.dlbc;
    p.alpha = cfg_.alpha_at(static_cast<double>(rollouts_) /
                            static_cast<double>(cfg_.num_rollouts()));
    return p;
  }

  // Up to snd_sample_size rows drawn without replacement from the pool.
  Matrix observation_sample() {
    const auto pool = static_cast<std::size_t>(obs_pool_.rows());
    const auto want = static_cast<std::size_t>(cfg_.snd_sample_size);
    if (pool <= want) return obs_pool_;
    std::vector<std::size_t> idx(pool);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t k = 0; k < want; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool - 1);
      std::swap(idx[k], idx[pick(rng_)]);
    }
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(want));
    Matrix out(static_cast<Eigen::Index>(want), obs_pool_.cols());
    for (std::size_t k = 0; k < want; ++k) {
      out.row(static_cast<Eigen::Index>(k)) =
          obs_pool_.row(static_cast<Eigen::Index>(idx[k]));
    }
    return out;
  }

  // One full phase: scale refresh, collection, GAE, update.
  MetricsRow iterate() {
    require(!finished(), "Trainer::iterate: training already finished");
    const DLBCParams params = current_params();
    const Matrix sample = observation_sample();
    refresh_scale(actor_, control_partition_, sample, params);

    // Installed-scale measurement under the K-group split.
    const auto snapshot = actor_.snapshot(sample, actor_.scale());
    const auto measured = measure_snd(measure_partition_, snapshot, params);
    const auto control = measure_snd(control_partition_, snapshot, params);

    auto buffer = collect_rollouts(actor_, critic_, envs_, cfg_.steps_per_rollout,
                                   cfg_.num_workers);
    env_steps_ += cfg_.steps_per_phase();
    compute_advantages(buffer, cfg_.gamma, cfg_.gae_lambda);
    const auto stats = ppo_update(buffer, actor_, critic_, *optimizer_, cfg_, rng_);
    ++rollouts_;

    const auto episodes = envs_.drain_finished();
    if (!episodes.empty()) {
      last_episode_reward_ =
          std::accumulate(episodes.begin(), episodes.end(), 0.0) /
          static_cast<double>(episodes.size());
    }

    // Next phase's scale is measured on this phase's observations.
    obs_pool_.resize(static_cast<Eigen::Index>(buffer.size() * buffer.agents.size()),
                     buffer.agents.front().observations.cols());
    Eigen::Index offset = 0;
    for (const auto& traj : buffer.agents) {
      obs_pool_.middleRows(offset, traj.observations.rows()) = traj.observations;
      offset += traj.observations.rows();
    }

    MetricsRow row;
    row.step = env_steps_;
    row.mean_episode_reward = last_episode_reward_;
    row.snd_intra = measured.intra_per_group;
    row.snd_inter = measured.inter;
    row.combined_snd = control.combined;
    row.scale = actor_.scale();
    row.alpha = params.alpha;
    row.policy_loss = stats.policy_loss;
    row.value_loss = stats.value_loss;
    row.entropy = stats.entropy;
    row.kl = stats.approx_kl;
    row.clip_fraction = stats.clip_fraction;
    check_finite(row);
    return row;
  }

 private:
  static void check_finite(const MetricsRow& row) {
    bool ok = std::isfinite(row.mean_episode_reward) && std::isfinite(row.snd_inter) &&
              std::isfinite(row.combined_snd) && std::isfinite(row.scale) &&
              std::isfinite(row.policy_loss) && std::isfinite(row.value_loss) &&
              std::isfinite(row.entropy) && std::isfinite(row.kl);
    for (double v : row.snd_intra) ok = ok && std::isfinite(v);
    if (!ok) {
      throw TrainingDiverged("non-finite training metric at step " +
                             std::to_string(row.step));
    }
  }

  env::EnvConfig env_cfg_;
  TrainConfig cfg_;
  std::mt19937_64 rng_;
  VectorEnv envs_;
  GroupPartition measure_partition_;
  GroupPartition control_partition_;
  DLBCActor actor_;
  Critic critic_;
  std::optional<nn::Adam> optimizer_;
  Matrix obs_pool_;
  long env_steps_ = 0;
  long rollouts_ = 0;
  double last_episode_reward_ = 0.0;
};

}  // namespace dlbc::train

#endif  // DLBC_TRAINER_HPP_
