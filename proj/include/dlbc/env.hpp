#ifndef DLBC_ENV_HPP_
#define DLBC_ENV_HPP_

// Continuous 2-D pursuit-evasion arena. Learning pursuers chase scripted
// evaders that flee from pursuers and walls. Entities are double
// integrators with velocity damping:
//   v <- damping * v + dt * a   (speed clipped to the role's max_speed)
//   p <- p + dt * v             (clamped into the arena square)

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dlbc/diversity.hpp"
#include "dlbc/error.hpp"

namespace dlbc::env {

using Vec2 = Eigen::Vector2d;

struct EnvConfig {
  int num_pursuers = 5;
  int num_evaders = 2;
  double arena_half_width = 1.0;
  double dt = 0.1;
  double damping = 0.75;
  double pursuer_max_speed = 1.0;
  double evader_max_speed = 1.3;
  double pursuer_radius = 0.075;
  double evader_radius = 0.05;
  int max_episode_steps = 100;
  double collision_reward = 10.0;
  double shaping_coeff = 0.1;

  void validate() const {
    require(num_pursuers >= 1 && num_evaders >= 1,
            "EnvConfig: pursuer and evader counts must be >= 1");
    require(arena_half_width > 0.0, "EnvConfig: arena_half_width must be > 0");
    require(dt > 0.0, "EnvConfig: dt must be > 0");
    require(damping > 0.0 && damping < 1.0, "EnvConfig: damping outside (0,1)");
    require(pursuer_max_speed > 0.0, "EnvConfig: pursuer_max_speed must be > 0");
    require(evader_max_speed > pursuer_max_speed,
            "EnvConfig: evaders must be faster than pursuers");
    require(pursuer_radius > 0.0 && evader_radius > 0.0,
            "EnvConfig: radii must be > 0");
    require(max_episode_steps >= 1, "EnvConfig: max_episode_steps must be >= 1");
  }

  int num_entities() const { return num_pursuers + num_evaders; }
  int observation_size() const {
    return 4 + 2 * (num_pursuers - 1) + 4 * num_evaders;
  }
};

// Tier names "5v2", "6v2", "7v2" map to pursuer counts against two evaders.
inline EnvConfig tier_config(const std::string& tier) {
  EnvConfig cfg;
  if (tier == "5v2") {
    cfg.num_pursuers = 5;
  } else if (tier == "6v2") {
    cfg.num_pursuers = 6;
  } else if (tier == "7v2") {
    cfg.num_pursuers = 7;
  } else {
    throw ContractViolation("unknown scenario tier '" + tier +
                            "' (expected 5v2, 6v2 or 7v2)");
  }
  cfg.num_evaders = 2;
  return cfg;
}

// Entities are indexed pursuers first, then evaders.
struct WorldState {
  std::vector<Vec2> position;
  std::vector<Vec2> velocity;
  int step = 0;

  friend bool operator==(const WorldState& a, const WorldState& b) {
    return a.step == b.step && a.position == b.position &&
           a.velocity == b.velocity;
  }
};

struct StepResult {
  Matrix observations;  // num_pursuers x observation_size
  std::vector<double> rewards;
  bool done = false;
  int collisions = 0;
};

inline Matrix observe(const EnvConfig& cfg, const WorldState& s) {
  const int np = cfg.num_pursuers;
  Matrix obs(np, cfg.observation_size());
  for (int i = 0; i < np; ++i) {
    int c = 0;
    obs(i, c++) = s.position[i].x();
    obs(i, c++) = s.position[i].y();
    obs(i, c++) = s.velocity[i].x();
    obs(i, c++) = s.velocity[i].y();
    for (int j = 0; j < np; ++j) {
      if (j == i) continue;
      obs(i, c++) = s.position[j].x() - s.position[i].x();
      obs(i, c++) = s.position[j].y() - s.position[i].y();
    }
    for (int e = np; e < cfg.num_entities(); ++e) {
      obs(i, c++) = s.position[e].x() - s.position[i].x();
      obs(i, c++) = s.position[e].y() - s.position[i].y();
      obs(i, c++) = s.velocity[e].x() - s.velocity[i].x();
      obs(i, c++) = s.velocity[e].y() - s.velocity[i].y();
    }
  }
  return obs;
}

inline double radius_of(const EnvConfig& cfg, int entity) {
  return entity < cfg.num_pursuers ? cfg.pursuer_radius : cfg.evader_radius;
}

// Flee direction: inverse-square repulsion from every pursuer and from the
// four walls, normalized to unit length and clipped into [-1, 1]^2.
inline Vec2 evader_policy(const EnvConfig& cfg, const WorldState& s, int evader) {
  require(evader >= 0 && evader < cfg.num_evaders,
          "evader_policy: evader index out of range");
  constexpr double kMinDistance = 1e-3;
  const Vec2 p = s.position[static_cast<std::size_t>(cfg.num_pursuers + evader)];
  Vec2 force = Vec2::Zero();
  for (int i = 0; i < cfg.num_pursuers; ++i) {
    const Vec2 away = p - s.position[i];
    const double d = std::max(away.norm(), kMinDistance);
    if (away.norm() > 0.0) force += away / (d * d * d);
  }
  const double w = cfg.arena_half_width;
  const double left = std::max(p.x() + w, kMinDistance);
  const double right = std::max(w - p.x(), kMinDistance);
  const double bottom = std::max(p.y() + w, kMinDistance);
  const double top = std::max(w - p.y(), kMinDistance);
  force.x() += 1.0 / (left * left) - 1.0 / (right * right);
  force.y() += 1.0 / (bottom * bottom) - 1.0 / (top * top);

  const double norm = force.norm();
  if (!(norm > 1e-12) || !std::isfinite(norm)) return Vec2::Zero();
  Vec2 action = force / norm;
  return action.cwiseMax(-1.0).cwiseMin(1.0);
}

// Individual rewards: +collision_reward per evader overlapped, minus
// shaping_coeff times the distance to the nearest evader.
inline std::vector<double> compute_rewards(const EnvConfig& cfg,
                                           const WorldState& s,
                                           int* collisions = nullptr) {
  std::vector<double> rewards(static_cast<std::size_t>(cfg.num_pursuers), 0.0);
  int hits = 0;
  const double contact = cfg.pursuer_radius + cfg.evader_radius;
  for (int i = 0; i < cfg.num_pursuers; ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (int e = cfg.num_pursuers; e < cfg.num_entities(); ++e) {
      const double d = (s.position[i] - s.position[e]).norm();
      nearest = std::min(nearest, d);
      if (d < contact) {
        rewards[i] += cfg.collision_reward;
        ++hits;
      }
    }
    rewards[i] -= cfg.shaping_coeff * nearest;
  }
  if (collisions != nullptr) *collisions = hits;
  return rewards;
}

// Advances one entity by one time step.
inline void integrate(const EnvConfig& cfg, double max_speed, const Vec2& accel,
                      Vec2& position, Vec2& velocity) {
  velocity = cfg.damping * velocity + cfg.dt * accel;
  const double speed = velocity.norm();
  if (speed > max_speed) velocity *= max_speed / speed;
  position += cfg.dt * velocity;
  const double w = cfg.arena_half_width;
  position = position.cwiseMax(-w).cwiseMin(w);
}

class PursuitEnv {
 public:
  explicit PursuitEnv(EnvConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const EnvConfig& config() const { return cfg_; }
  const WorldState& state() const { return state_; }
  int observation_size() const { return cfg_.observation_size(); }
  int num_pursuers() const { return cfg_.num_pursuers; }

  // Uniform non-overlapping placement, zero velocities.
  Matrix reset(std::uint64_t seed) {
    constexpr int kMaxAttempts = 10000;
    std::mt19937_64 rng(seed);
    const int n = cfg_.num_entities();
    state_ = WorldState{};
    state_.position.reserve(static_cast<std::size_t>(n));
    state_.velocity.assign(static_cast<std::size_t>(n), Vec2::Zero());
    for (int e = 0; e < n; ++e) {
      const double r = radius_of(cfg_, e);
      const double span = cfg_.arena_half_width - r;
      require(span > 0.0, "reset: arena too small for entity radius");
      std::uniform_real_distribution<double> coord(-span, span);
      bool placed = false;
      for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
        const Vec2 candidate(coord(rng), coord(rng));
        placed = true;
        for (int other = 0; other < e; ++other) {
          const double min_gap = r + radius_of(cfg_, other);
          if ((candidate - state_.position[other]).norm() < min_gap) {
            placed = false;
            break;
          }
        }
        if (placed) state_.position.push_back(candidate);
      }
      require(placed, "reset: arena too small to place all entities without overlap");
    }
    return observe(cfg_, state_);
  }

  StepResult step(const Matrix& pursuer_actions) {
    require(!state_.position.empty(), "step: call reset() first");
    require(pursuer_actions.rows() == cfg_.num_pursuers &&
                pursuer_actions.cols() == 2,
            "step: expected one 2-D action per pursuer");
    require(pursuer_actions.allFinite(), "step: non-finite action");

    std::vector<Vec2> evader_actions;
    for (int e = 0; e < cfg_.num_evaders; ++e) {
      evader_actions.push_back(evader_policy(cfg_, state_, e));
    }
    for (int i = 0; i < cfg_.num_pursuers; ++i) {
      const Vec2 a = Vec2(pursuer_actions(i, 0), pursuer_actions(i, 1))
                         .cwiseMax(-1.0)
                         .cwiseMin(1.0);
      integrate(cfg_, cfg_.pursuer_max_speed, a, state_.position[i],
                state_.velocity[i]);
    }
    for (int e = 0; e < cfg_.num_evaders; ++e) {
      const auto idx = static_cast<std::size_t>(cfg_.num_pursuers + e);
      integrate(cfg_, cfg_.evader_max_speed, evader_actions[e],
                state_.position[idx], state_.velocity[idx]);
    }
    ++state_.step;

    StepResult result;
    result.rewards = compute_rewards(cfg_, state_, &result.collisions);
    result.done = state_.step >= cfg_.max_episode_steps;
    result.observations = observe(cfg_, state_);
    return result;
  }

 private:
  EnvConfig cfg_;
  WorldState state_;
};

}  // namespace dlbc::env

#endif  // DLBC_ENV_HPP_
