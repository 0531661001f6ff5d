#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "wz/replay.hpp"
#include "wz/rewards.hpp"
#include "wz/sac.hpp"
#include "wz/trainer.hpp"
#include "wz/units.hpp"

namespace wz {

// Single-vehicle speed regulation on an empty road: the policy commands
// acceleration, the reward is the smoothness term plus the speed band terms
// (no crash or headway shaping). Exercises the full SAC update path on a
// one-dimensional observation.
struct SpeedTaskConfig {
  double dt = 0.1;
  int control_steps = 5;      // sim steps per action
  int episode_ticks = 120;    // 60 s episodes
  double v_start_min = 40.0;  // km/h, training episodes start uniformly here
  double v_start_max = 100.0;
  double eval_start = 70.0;
  int eval_ticks = 60;        // 30 s deterministic evaluation
  double v_phys_max = 200.0;
  double v_obs_max = 100.0;
  RewardConfig reward;
  SquashSpec squash;
  SacHyperparams hyper;
  nn::TopologyConfig topology;
  long budget_ticks = 40000;
  std::uint64_t seed = 1;

  SpeedTaskConfig() {
    topology.obs_dim = 1;
    topology.hidden = {32, 32};
    hyper.alpha = 0.05;
    hyper.batch_size = 64;
    hyper.buffer_capacity = 50000;
    hyper.learning_starts = 500;
    hyper.adam = true;
    hyper.lr_policy = 3e-4;
    hyper.lr_q = 3e-4;
    hyper.lr_v = 3e-4;
  }
};

class SpeedTaskEnv {
 public:
  explicit SpeedTaskEnv(const SpeedTaskConfig& cfg) : cfg_(cfg) {}

  void reset(double v0_kmh) { v_ = v0_kmh; }
  double speed() const { return v_; }

  Eigen::VectorXd obs() const {
    Eigen::VectorXd o(1);
    o[0] = v_ / cfg_.v_obs_max;
    return o;
  }

  // apply one control interval; returns the reward accumulated over its
  // simulation steps
  double step_tick(double accel) {
    double r = 0.0;
    for (int k = 0; k < cfg_.control_steps; ++k) {
      v_ = std::clamp(v_ + mps_to_kmh(accel) * cfg_.dt, 0.0, cfg_.v_phys_max);
      r += accel_smoothness_term(accel, cfg_.reward) + speed_band_terms(v_, cfg_.reward);
    }
    return r;
  }

 private:
  SpeedTaskConfig cfg_;
  double v_ = 0.0;
};

struct SpeedTaskResult {
  std::vector<double> episode_returns;
  long updates = 0;
};

inline SpeedTaskResult train_speed_task(SacAgent& agent, const SpeedTaskConfig& cfg) {
  SeedStreams streams(cfg.seed);
  auto rng_reset = streams.stream("toy.reset");
  auto rng_policy = streams.stream("toy.policy_noise");
  auto rng_update = streams.stream("toy.update_noise");
  auto rng_buffer = streams.stream("toy.buffer");

  SpeedTaskEnv env(cfg);
  ReplayBuffer<Transition> buffer(static_cast<std::size_t>(cfg.hyper.buffer_capacity));
  std::uniform_real_distribution<double> start(cfg.v_start_min, cfg.v_start_max);

  SpeedTaskResult result;
  env.reset(start(rng_reset));
  double ret = 0.0;
  int tick_in_ep = 0;
  double update_debt = 0.0;

  for (long tick = 0; tick < cfg.budget_ticks; ++tick) {
    Eigen::VectorXd o = env.obs();
    ActionSample a = agent.act_stochastic(o, rng_policy);
    double r = env.step_tick(a.accel);
    Transition t;
    t.s = SparseObs::from_dense(o);
    t.s_next = SparseObs::from_dense(env.obs());
    t.u = a.u;
    t.accel = a.accel;
    t.reward = r;
    t.done = false;  // timeout truncation keeps the bootstrap
    buffer.push(std::move(t));
    ret += r;

    if (++tick_in_ep >= cfg.episode_ticks) {
      result.episode_returns.push_back(ret);
      ret = 0.0;
      tick_in_ep = 0;
      env.reset(start(rng_reset));
    }

    long need = std::max<long>(cfg.hyper.batch_size, cfg.hyper.learning_starts);
    if (static_cast<long>(buffer.size()) >= need) {
      update_debt += cfg.hyper.updates_per_step;
      while (update_debt >= 1.0) {
        update_debt -= 1.0;
        auto idx =
            buffer.sample_indices(static_cast<std::size_t>(cfg.hyper.batch_size), rng_buffer);
        agent.update(assemble_batch(buffer, idx, cfg.squash), rng_update);
        ++result.updates;
      }
    }
  }
  return result;
}

// mean speed over a deterministic rollout from the evaluation start speed
inline double evaluate_speed_task(SacAgent& agent, const SpeedTaskConfig& cfg) {
  SpeedTaskEnv env(cfg);
  env.reset(cfg.eval_start);
  double sum = 0.0;
  for (int tick = 0; tick < cfg.eval_ticks; ++tick) {
    double a = agent.act_deterministic(env.obs());
    env.step_tick(a);
    sum += env.speed();
  }
  return sum / static_cast<double>(cfg.eval_ticks);
}

}  // namespace wz
