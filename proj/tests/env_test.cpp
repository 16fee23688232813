#include "dlbc/env.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"

namespace dlbc::env {
namespace {

WorldState make_state(std::vector<Vec2> positions) {
  WorldState s;
  s.velocity.assign(positions.size(), Vec2::Zero());
  s.position = std::move(positions);
  return s;
}

TEST(Config, ObservationSizes) {
  EXPECT_EQ(tier_config("5v2").observation_size(), 20);
  EXPECT_EQ(tier_config("6v2").observation_size(), 22);
  EXPECT_EQ(tier_config("7v2").observation_size(), 24);
  EXPECT_EQ(tier_config("6v2").num_pursuers, 6);
  EXPECT_THROW(tier_config("9v9"), ContractViolation);
}

TEST(Config, Validation) {
  EnvConfig c;
  c.dt = 0.0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = EnvConfig{};
  c.damping = 1.5;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = EnvConfig{};
  c.num_evaders = 0;
  EXPECT_THROW(c.validate(), ContractViolation);
}

TEST(Reset, DeterministicPerSeed) {
  PursuitEnv a(tier_config("5v2")), b(tier_config("5v2"));
  EXPECT_EQ(a.reset(17), b.reset(17));
  EXPECT_TRUE(a.state() == b.state());
  a.reset(18);
  EXPECT_FALSE(a.state() == b.state());
}

TEST(Reset, NeverOverlapsAndStaysInside) {
  const auto cfg = tier_config("7v2");
  PursuitEnv env(cfg);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    env.reset(seed);
    const auto& s = env.state();
    ASSERT_EQ(s.position.size(), 9u);
    for (int i = 0; i < 9; ++i) {
      EXPECT_EQ(s.velocity[static_cast<std::size_t>(i)], Vec2::Zero());
      const double r = radius_of(cfg, i);
      EXPECT_LE(s.position[static_cast<std::size_t>(i)].cwiseAbs().maxCoeff(),
                cfg.arena_half_width - r);
      for (int j = 0; j < i; ++j) {
        EXPECT_GE((s.position[static_cast<std::size_t>(i)] - s.position[static_cast<std::size_t>(j)]).norm(),
                  r + radius_of(cfg, j));
      }
    }
  }
}

TEST(Reset, ImpossiblePlacementThrows) {
  EnvConfig c;
  c.arena_half_width = 0.2;
  c.pursuer_radius = 0.15;
  PursuitEnv env(c);
  EXPECT_THROW(env.reset(0), ContractViolation);
}

TEST(Physics, AccelerationFromRest) {
  const EnvConfig c;
  Vec2 p(0.0, 0.0), v(0.0, 0.0);
  integrate(c, c.pursuer_max_speed, Vec2(1.0, 0.0), p, v);
  EXPECT_NEAR(v.x(), 0.1, 1e-15);
  EXPECT_NEAR(p.x(), 0.01, 1e-15);
  EXPECT_EQ(v.y(), 0.0);
}

TEST(Physics, DampingAndSpeedCap) {
  const EnvConfig c;
  Vec2 p(0.0, 0.0), v(0.4, 0.0);
  integrate(c, c.pursuer_max_speed, Vec2::Zero(), p, v);
  EXPECT_NEAR(v.x(), 0.3, 1e-15);
  Vec2 q(0.0, 0.0), fast(2.0, 2.0);
  integrate(c, c.pursuer_max_speed, Vec2::Zero(), q, fast);
  EXPECT_NEAR(fast.norm(), 1.0, 1e-12);
  EXPECT_NEAR(fast.x(), fast.y(), 1e-15);
}

TEST(Physics, WallsClampPosition) {
  const EnvConfig c;
  Vec2 p(0.99, -0.99), v(0.9, -0.9);
  integrate(c, c.pursuer_max_speed, Vec2(1.0, -1.0), p, v);
  EXPECT_EQ(p, Vec2(1.0, -1.0));
}

TEST(Physics, StepMatchesScalarOracleForHundredSteps) {
  for (const char* tier : {"5v2", "7v2"}) {
    const auto cfg = tier_config(tier);
    PursuitEnv env(cfg);
    env.reset(3);
    oracle::ScalarWorld w;
    for (const auto& p : env.state().position) {
      w.px.push_back(p.x());
      w.py.push_back(p.y());
      w.vx.push_back(0.0);
      w.vy.push_back(0.0);
    }
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      Matrix actions(cfg.num_pursuers, 2);
      std::vector<double> ax, ay;
      for (int i = 0; i < cfg.num_pursuers; ++i) {
        actions(i, 0) = u(rng);
        actions(i, 1) = u(rng);
        ax.push_back(actions(i, 0));
        ay.push_back(actions(i, 1));
      }
      env.step(actions);
      oracle::scalar_step(cfg, w, ax, ay);
      for (std::size_t k = 0; k < w.px.size(); ++k) {
        const auto& p = env.state().position[k];
        const auto& v = env.state().velocity[k];
        worst = std::max({worst, std::abs(p.x() - w.px[k]), std::abs(p.y() - w.py[k]),
                          std::abs(v.x() - w.vx[k]), std::abs(v.y() - w.vy[k])});
      }
    }
    EXPECT_LE(worst, 1e-12) << tier;
  }
}

TEST(Evader, SymmetricPursuersCancel) {
  EnvConfig c;
  c.num_pursuers = 4;
  c.num_evaders = 1;
  const auto s = make_state({Vec2(0.5, 0.0), Vec2(-0.5, 0.0), Vec2(0.0, 0.5), Vec2(0.0, -0.5),
                             Vec2(0.0, 0.0)});
  const Vec2 a = evader_policy(c, s, 0);
  EXPECT_NEAR(a.norm(), 0.0, 1e-12);
}

TEST(Evader, FleesFromSinglePursuer) {
  EnvConfig c;
  c.num_pursuers = 1;
  c.num_evaders = 1;
  const auto s = make_state({Vec2(-0.1, 0.0), Vec2(0.0, 0.0)});
  const Vec2 a = evader_policy(c, s, 0);
  EXPECT_NEAR(a.x(), 1.0, 1e-12);
  EXPECT_NEAR(a.y(), 0.0, 1e-12);
}

TEST(Evader, PushedAwayFromWall) {
  EnvConfig c;
  c.num_pursuers = 2;
  c.num_evaders = 1;
  const auto s = make_state({Vec2(-0.5, 0.5), Vec2(-0.5, -0.5), Vec2(0.95, 0.0)});
  const Vec2 a = evader_policy(c, s, 0);
  EXPECT_LT(a.x(), 0.0);
  EXPECT_NEAR(a.y(), 0.0, 1e-12);
  EXPECT_THROW(evader_policy(c, s, 1), ContractViolation);
}

TEST(Rewards, CollisionAndShaping) {
  EnvConfig c;
  c.num_pursuers = 2;
  c.num_evaders = 1;
  // Pursuer 0 overlaps the evader at distance 0.1 < 0.125.
  const auto s = make_state({Vec2(0.1, 0.0), Vec2(0.0, 0.2), Vec2(0.0, 0.0)});
  int hits = 0;
  const auto r = compute_rewards(c, s, &hits);
  EXPECT_EQ(hits, 1);
  EXPECT_NEAR(r[0], 10.0 - 0.1 * 0.1, 1e-12);
  EXPECT_NEAR(r[1], -0.02, 1e-12);
  c.shaping_coeff = 0.0;
  const auto bare = compute_rewards(c, s);
  EXPECT_EQ(bare[0], 10.0);
  EXPECT_EQ(bare[1], 0.0);
}

TEST(Rewards, OnePerEvaderOverlapped) {
  EnvConfig c;
  c.num_pursuers = 1;
  c.num_evaders = 2;
  c.shaping_coeff = 0.0;
  const auto s = make_state({Vec2(0.0, 0.0), Vec2(0.05, 0.0), Vec2(-0.05, 0.0)});
  int hits = 0;
  EXPECT_EQ(compute_rewards(c, s, &hits)[0], 20.0);
  EXPECT_EQ(hits, 2);
}

TEST(Observation, LayoutIsRelative) {
  EnvConfig c;
  c.num_pursuers = 2;
  c.num_evaders = 1;
  auto s = make_state({Vec2(0.1, 0.2), Vec2(-0.3, 0.4), Vec2(0.5, -0.5)});
  s.velocity[0] = Vec2(0.01, 0.02);
  s.velocity[2] = Vec2(0.3, 0.0);
  const Matrix o = observe(c, s);
  ASSERT_EQ(o.rows(), 2);
  ASSERT_EQ(o.cols(), c.observation_size());
  Eigen::RowVectorXd expected(10);
  expected << 0.1, 0.2, 0.01, 0.02, -0.4, 0.2, 0.4, -0.7, 0.29, -0.02;
  EXPECT_TRUE(o.row(0).isApprox(expected, 1e-14));
}

TEST(Episode, BoundedAndTerminatesOnTimeLimit) {
  const auto cfg = tier_config("6v2");
  PursuitEnv env(cfg);
  env.reset(5);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 3.0);
  const double bound = std::sqrt(8.0 * cfg.arena_half_width * cfg.arena_half_width);
  for (int t = 1; t <= cfg.max_episode_steps; ++t) {
    Matrix a(cfg.num_pursuers, 2);
    for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = normal(rng);
    const auto r = env.step(a);
    EXPECT_EQ(r.done, t == cfg.max_episode_steps);
    EXPECT_EQ(r.observations.rows(), cfg.num_pursuers);
    EXPECT_TRUE(r.observations.allFinite());
    for (double v : r.rewards) {
      EXPECT_LE(v, cfg.collision_reward * cfg.num_evaders);
      EXPECT_GE(v, -cfg.shaping_coeff * bound);
    }
    for (std::size_t k = 0; k < env.state().position.size(); ++k) {
      EXPECT_LE(env.state().position[k].cwiseAbs().maxCoeff(), cfg.arena_half_width);
      const double vmax = static_cast<int>(k) < cfg.num_pursuers ? cfg.pursuer_max_speed
                                                                 : cfg.evader_max_speed;
      EXPECT_LE(env.state().velocity[k].norm(), vmax + 1e-12);
    }
  }
}

TEST(Episode, StepValidatesInput) {
  PursuitEnv env(tier_config("5v2"));
  EXPECT_THROW(env.step(Matrix::Zero(5, 2)), ContractViolation);
  env.reset(0);
  EXPECT_THROW(env.step(Matrix::Zero(4, 2)), ContractViolation);
  Matrix bad = Matrix::Zero(5, 2);
  bad(2, 1) = std::nan("");
  EXPECT_THROW(env.step(bad), ContractViolation);
}

}  // namespace
}  // namespace dlbc::env
