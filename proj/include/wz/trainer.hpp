#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wz/checkpoint.hpp"
#include "wz/encoder.hpp"
#include "wz/replay.hpp"
#include "wz/rewards.hpp"
#include "wz/sac.hpp"
#include "wz/sim.hpp"
#include "wz/strategy.hpp"

namespace wz {

// One replay record. The pre-squash sample u rides along with the executed
// acceleration.
struct Transition {
  SparseObs s;
  SparseObs s_next;
  double u = 0.0;
  double accel = 0.0;
  double reward = 0.0;
  bool done = false;
  TerminalKind reason = TerminalKind::kNone;
};

inline DenseBatch assemble_batch(const ReplayBuffer<Transition>& buffer,
                                 const std::vector<std::size_t>& idx, const SquashSpec& squash) {
  int B = static_cast<int>(idx.size());
  int D = buffer.at(idx[0]).s.dim;
  DenseBatch b;
  b.obs.resize(B, D);
  b.next_obs.resize(B, D);
  b.t_action.resize(B);
  b.reward.resize(B);
  b.done.resize(B);
  for (int i = 0; i < B; ++i) {
    const Transition& t = buffer.at(idx[i]);
    t.s.write_dense_row(b.obs, i);
    t.s_next.write_dense_row(b.next_obs, i);
    b.t_action[i] = squash.t_of_action(t.accel);
    b.reward[i] = t.reward;
    b.done[i] = t.done ? 1.0 : 0.0;
  }
  return b;
}

// Evaluation-time action source: encodes the subject and queries the policy.
class PolicyActionSource : public ActionSource {
 public:
  PolicyActionSource(SacAgent& agent, const EncoderConfig& enc, bool stochastic,
                     std::uint64_t seed)
      : agent_(agent), enc_(enc), stochastic_(stochastic),
        rng_(SeedStreams(seed).stream("eval.policy_noise")) {}

  double action(const World& w, const Vehicle& v) override {
    Eigen::VectorXd obs = flatten(encode_state(w, v.id, enc_));
    return stochastic_ ? agent_.act_stochastic(obs, rng_).accel : agent_.act_deterministic(obs);
  }

 private:
  SacAgent& agent_;
  EncoderConfig enc_;
  bool stochastic_;
  std::mt19937_64 rng_;
};

struct TrainConfig {
  SimConfig sim;
  StrategyParams strategy;
  EncoderConfig encoder;
  RewardConfig reward;
  nn::TopologyConfig topology;
  SquashSpec squash;
  SacHyperparams hyper;
  long budget_env_steps = 20000;  // control ticks; 0 = emit initial checkpoint only
  long checkpoint_every = 0;      // ticks; 0 = final only
  std::string out_dir = "train_out";
  std::uint64_t seed = 1;

  static TrainConfig from_config(const Config& cfg) {
    TrainConfig t;
    t.sim = SimConfig::from_config(cfg);
    t.strategy = StrategyParams::from_config(cfg, t.sim.layout);
    t.encoder = EncoderConfig::from_config(cfg);
    t.reward = RewardConfig::from_config(cfg);
    t.topology = nn::TopologyConfig::from_config(cfg);
    t.squash = SquashSpec::from_config(cfg);
    t.hyper = SacHyperparams::from_config(cfg);
    t.budget_env_steps = cfg.get_int("train.budget_env_steps", t.budget_env_steps);
    t.checkpoint_every = cfg.get_int("train.checkpoint_every", t.checkpoint_every);
    t.out_dir = cfg.get_string("train.out_dir", t.out_dir);
    t.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", 1));
    return t;
  }
};

struct EpisodeStat {
  long index = 0;
  long env_step = 0;
  int vehicle_id = -1;
  double ret = 0.0;
  int length = 0;  // transitions
  char reason = 'n';  // m merged, c crashed, t truncated
};

struct TrainResult {
  std::vector<EpisodeStat> episodes;
  std::string checkpoint_path;
  long env_steps = 0;
  long updates = 0;
  long crashes = 0;
  UpdateStats last_stats;
};

// Off-policy training against the work-zone simulator. Every controlled
// vehicle is an independent episode sharing one policy and one buffer; a
// crash terminates all active episodes and restarts the simulation.
class Trainer : public ActionSource {
 public:
  explicit Trainer(const TrainConfig& cfg)
      : cfg_(cfg), streams_(cfg.seed),
        agent_(cfg.topology, cfg.squash, cfg.hyper, cfg.seed),
        buffer_(static_cast<std::size_t>(cfg.hyper.buffer_capacity)),
        rng_policy_(streams_.stream("train.policy_noise")),
        rng_update_(streams_.stream("train.update_noise")),
        rng_buffer_(streams_.stream("train.buffer")) {
    int want = cfg_.topology.observation_dim();
    int have = 2 * static_cast<int>(std::lround(cfg_.sim.layout.zone2_length())) * 2 + 8;
    if (want != have)
      throw std::invalid_argument("trainer: network observation width " + std::to_string(want) +
                                  " does not match encoder output " + std::to_string(have));
    reset_sim();
  }

  SacAgent& agent() { return agent_; }
  const ReplayBuffer<Transition>& buffer() const { return buffer_; }

  double action(const World& w, const Vehicle& v) override {
    SparseObs obs = SparseObs::from(encode_state(w, v.id, cfg_.encoder));
    auto it = episodes_.find(v.id);
    if (it != episodes_.end() && it->second.has_pending) {
      complete_transition(it->second, obs, false, TerminalKind::kNone);
    }
    Episode& ep = episodes_[v.id];
    Eigen::VectorXd dense(obs.dim);
    {
      nn::Mat row(1, obs.dim);
      obs.write_dense_row(row, 0);
      dense = row.row(0).transpose();
    }
    ActionSample s = agent_.act_stochastic(dense, rng_policy_);
    ep.s = obs;
    ep.last_obs = obs;
    ep.u = s.u;
    ep.accel = s.accel;
    ep.pending_reward = 0.0;
    ep.has_pending = true;
    ep.released = false;
    return s.accel;
  }

  TrainResult run() {
    namespace fs = std::filesystem;
    fs::create_directories(cfg_.out_dir);
    curve_.open(cfg_.out_dir + "/learning_curve.csv");
    curve_ << "episode,env_step,sim_time,vehicle_id,return,length,reason,"
              "value_loss,q_loss,policy_loss,alpha_entropy\n";

    TrainResult result;
    const int K = cfg_.strategy.control_interval_steps;
    try {
      for (long tick = 0; tick < cfg_.budget_env_steps; ++tick) {
        for (int k = 0; k < K; ++k) {
          sim_->step();
          post_step();
          if (restart_pending_) break;
        }
        if (restart_pending_) reset_sim();
        maybe_update();
        env_steps_ = tick + 1;
        if (cfg_.checkpoint_every > 0 && (tick + 1) % cfg_.checkpoint_every == 0) {
          save_checkpoint(cfg_.out_dir + "/checkpoint_" + std::to_string(tick + 1) + ".wzsac",
                          agent_);
        }
      }
    } catch (const std::exception&) {
      save_checkpoint(cfg_.out_dir + "/checkpoint_diagnostic.wzsac", agent_);
      curve_.flush();
      throw;
    }

    result.checkpoint_path = cfg_.out_dir + "/checkpoint_final.wzsac";
    save_checkpoint(result.checkpoint_path, agent_);
    curve_.flush();
    result.episodes = episode_stats_;
    result.env_steps = env_steps_;
    result.updates = updates_;
    result.crashes = crashes_;
    result.last_stats = last_stats_;
    return result;
  }

 private:
  struct Episode {
    SparseObs s;
    SparseObs last_obs;
    double u = 0.0;
    double accel = 0.0;
    double pending_reward = 0.0;
    bool has_pending = false;
    bool released = false;  // left zone II, waiting for the merge to complete
    double ret = 0.0;
    int length = 0;
  };

  void reset_sim() {
    episodes_.clear();
    restart_pending_ = false;
    SimConfig sc = cfg_.sim;
    sc.seed = streams_.derive("sim.restart", static_cast<std::uint64_t>(restarts_++));
    sim_ = std::make_unique<Simulation>(sc);
    strategy_ = std::make_unique<RlMeteringStrategy>(cfg_.strategy, this);
    sim_->set_strategy(strategy_.get());
    crash_seen_ = 0;
    merge_seen_ = 0;
  }

  void complete_transition(Episode& ep, const SparseObs& next, bool done, TerminalKind reason) {
    Transition t;
    t.s = ep.s;
    t.s_next = next;
    t.u = ep.u;
    t.accel = ep.accel;
    t.reward = ep.pending_reward;
    t.done = done;
    t.reason = reason;
    buffer_.push(std::move(t));
    ep.ret += ep.pending_reward;
    ep.length += 1;
    ep.has_pending = false;
    ep.pending_reward = 0.0;
  }

  void close_episode(int vehicle_id, Episode& ep, char reason) {
    EpisodeStat st;
    st.index = static_cast<long>(episode_stats_.size());
    st.env_step = env_steps_;
    st.vehicle_id = vehicle_id;
    st.ret = ep.ret;
    st.length = ep.length;
    st.reason = reason;
    episode_stats_.push_back(st);
    curve_ << st.index << ',' << st.env_step << ',' << sim_->world().time << ',' << vehicle_id
           << ',' << st.ret << ',' << st.length << ',' << reason << ',' << last_stats_.value_loss
           << ',' << last_stats_.q_loss << ',' << last_stats_.policy_loss << ','
           << last_stats_.alpha_entropy << '\n';
  }

  void post_step() {
    const World& w = sim_->world();

    // crash: score the involved episodes, terminate the rest, restart
    if (w.crash_log.size() > crash_seen_) {
      ++crashes_;
      std::vector<int> involved;
      for (std::size_t i = crash_seen_; i < w.crash_log.size(); ++i) {
        involved.push_back(w.crash_log[i].follower_id);
        involved.push_back(w.crash_log[i].leader_id);
      }
      crash_seen_ = w.crash_log.size();
      for (auto& [id, ep] : episodes_) {
        if (!ep.has_pending) continue;
        bool hit = std::find(involved.begin(), involved.end(), id) != involved.end();
        if (hit) {
          ep.pending_reward += crash_reward(cfg_.reward);
          complete_transition(ep, ep.last_obs, true, TerminalKind::kCrashed);
          close_episode(id, ep, 'c');
        } else {
          complete_transition(ep, ep.last_obs, false, TerminalKind::kNone);
          close_episode(id, ep, 't');
        }
      }
      restart_pending_ = true;
      return;
    }

    // merges of controlled vehicles finish their episodes
    for (std::size_t i = merge_seen_; i < w.merge_log.size(); ++i) {
      const MergeEvent& e = w.merge_log[i];
      auto it = episodes_.find(e.vehicle_id);
      if (it == episodes_.end() || !it->second.has_pending) continue;
      it->second.pending_reward += terminal_reward(w, e.vehicle_id, cfg_.reward);
      complete_transition(it->second, it->second.last_obs, true, TerminalKind::kMerged);
      close_episode(e.vehicle_id, it->second, 'm');
      episodes_.erase(it);
    }
    merge_seen_ = w.merge_log.size();

    // step rewards while under control; release control past zone II
    for (auto it = episodes_.begin(); it != episodes_.end();) {
      Episode& ep = it->second;
      if (!ep.has_pending) {
        ++it;
        continue;
      }
      const Vehicle* v = w.find(it->first);
      if (v == nullptr) {
        // left the corridor without a logged merge or crash: truncate
        complete_transition(ep, ep.last_obs, false, TerminalKind::kNone);
        close_episode(it->first, ep, 't');
        it = episodes_.erase(it);
        continue;
      }
      if (!ep.released) {
        if (v->pos >= w.layout.zone2_end) {
          ep.released = true;  // shaping stops, terminal reward still pending
        } else {
          ep.pending_reward += step_reward(w, it->first, ep.accel, cfg_.reward);
        }
      }
      ++it;
    }
  }

  void maybe_update() {
    long need = std::max<long>(cfg_.hyper.batch_size, cfg_.hyper.learning_starts);
    if (static_cast<long>(buffer_.size()) < need) return;
    update_debt_ += cfg_.hyper.updates_per_step;
    while (update_debt_ >= 1.0) {
      update_debt_ -= 1.0;
      auto idx = buffer_.sample_indices(static_cast<std::size_t>(cfg_.hyper.batch_size),
                                        rng_buffer_);
      DenseBatch b = assemble_batch(buffer_, idx, cfg_.squash);
      last_stats_ = agent_.update(b, rng_update_);
      ++updates_;
    }
  }

  TrainConfig cfg_;
  SeedStreams streams_;
  SacAgent agent_;
  ReplayBuffer<Transition> buffer_;
  std::mt19937_64 rng_policy_, rng_update_, rng_buffer_;

  std::unique_ptr<Simulation> sim_;
  std::unique_ptr<RlMeteringStrategy> strategy_;
  std::map<int, Episode> episodes_;  // ordered: deterministic iteration
  std::vector<EpisodeStat> episode_stats_;
  std::ofstream curve_;

  std::size_t crash_seen_ = 0;
  std::size_t merge_seen_ = 0;
  long restarts_ = 0;
  long env_steps_ = 0;
  long updates_ = 0;
  long crashes_ = 0;
  double update_debt_ = 0.0;
  bool restart_pending_ = false;
  UpdateStats last_stats_;
};

}  // namespace wz
