#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "wz/config.hpp"
#include "wz/nn.hpp"
#include "wz/policy.hpp"
#include "wz/random.hpp"

namespace wz {

struct SacHyperparams {
  double alpha = 0.2;   // entropy weight, fixed (no auto-tuning)
  double gamma = 0.99;
  double tau = 0.005;   // target network EMA rate
  double lr_policy = 3e-4;
  double lr_q = 3e-4;
  double lr_v = 3e-4;
  int batch_size = 256;
  long buffer_capacity = 100000;
  double updates_per_step = 1.0;
  long learning_starts = 1000;  // transitions collected before updates begin
  double sgd_momentum = 0.9;
  bool adam = false;    // adaptive-moment optimizer behind a flag
  bool twin_q = false;  // robustness option, off for fidelity
  double init_std = 0.5;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("sac: gamma must be in (0,1)");
    if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("sac: tau must be in (0,1]");
    if (alpha < 0.0) throw std::invalid_argument("sac: alpha must be >= 0");
  }

  static SacHyperparams from_config(const Config& cfg) {
    SacHyperparams h;
    h.alpha = cfg.get_double("sac.alpha", h.alpha);
    h.gamma = cfg.get_double("sac.gamma", h.gamma);
    h.tau = cfg.get_double("sac.tau", h.tau);
    h.lr_policy = cfg.get_double("sac.lr_policy", h.lr_policy);
    h.lr_q = cfg.get_double("sac.lr_q", h.lr_q);
    h.lr_v = cfg.get_double("sac.lr_v", h.lr_v);
    h.batch_size = static_cast<int>(cfg.get_int("sac.batch_size", h.batch_size));
    h.buffer_capacity = cfg.get_int("sac.buffer_capacity", h.buffer_capacity);
    h.updates_per_step = cfg.get_double("sac.updates_per_step", h.updates_per_step);
    h.learning_starts = cfg.get_int("sac.learning_starts", h.learning_starts);
    h.sgd_momentum = cfg.get_double("sac.sgd_momentum", h.sgd_momentum);
    h.adam = cfg.get_bool("sac.adam", h.adam);
    h.twin_q = cfg.get_bool("sac.twin_q", h.twin_q);
    h.init_std = cfg.get_double("sac.init_std", h.init_std);
    h.validate();
    return h;
  }
};

// SGD with momentum by default; Adam behind the hyperparameter flag.
class Optimizer {
 public:
  Optimizer(double lr, double momentum, bool adam) : lr_(lr), momentum_(momentum), adam_(adam) {}

  void step(nn::NetBase& net) {
    nn::Vec g = net.get_grads();
    nn::Vec p = net.get_params();
    if (state_.size() == 0) {
      state_ = nn::Vec::Zero(g.size());
      if (adam_) state2_ = nn::Vec::Zero(g.size());
    }
    if (adam_) {
      ++t_;
      state_ = beta1_ * state_ + (1.0 - beta1_) * g;
      state2_ = beta2_ * state2_ + (1.0 - beta2_) * g.cwiseProduct(g);
      double c1 = 1.0 - std::pow(beta1_, t_);
      double c2 = 1.0 - std::pow(beta2_, t_);
      nn::Vec mhat = state_ / c1;
      nn::Vec vhat = state2_ / c2;
      p -= lr_ * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + eps_).matrix());
    } else {
      state_ = momentum_ * state_ - lr_ * g;
      p += state_;
    }
    net.set_params(p);
  }

 private:
  double lr_, momentum_;
  bool adam_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  nn::Vec state_, state2_;
  long t_ = 0;
};

// target <- (1 - tau) * target + tau * src, elementwise
inline void soft_update(nn::NetBase& target, nn::NetBase& src, double tau) {
  if (target.param_count() != src.param_count())
    throw std::invalid_argument("soft_update: topology mismatch");
  target.set_params((1.0 - tau) * target.get_params() + tau * src.get_params());
}

struct DenseBatch {
  nn::Mat obs;       // (B, obs_dim)
  nn::Mat next_obs;  // (B, obs_dim)
  nn::Vec t_action;  // tanh(u) of the executed action
  nn::Vec reward;
  nn::Vec done;      // 1.0 terminal, 0.0 otherwise

  int size() const { return static_cast<int>(obs.rows()); }
};

// reparameterized fresh actions a~ = squash(mean + sigma * eps)
struct FreshSample {
  nn::Vec mean, lraw, log_std, sigma, u, t, log_prob;
};

struct UpdateStats {
  double value_loss = 0.0;
  double q_loss = 0.0;
  double policy_loss = 0.0;
  double alpha_entropy = 0.0;  // alpha * E[-log pi]
};

class SacAgent {
 public:
  SacAgent(const nn::TopologyConfig& topo, const SquashSpec& squash, const SacHyperparams& hp,
           std::uint64_t seed)
      : topo_(topo), squash_(squash), hp_(hp) {
    hp_.validate();
    policy_ = nn::make_net(topo, 0, 2);
    q1_ = nn::make_net(topo, 1, 1);
    if (hp_.twin_q) q2_ = nn::make_net(topo, 1, 1);
    v_ = nn::make_net(topo, 0, 1);
    v_target_ = nn::make_net(topo, 0, 1);

    SeedStreams streams(seed);
    // near-zero initial actions with a usable starting std
    double mean_bias = squash_.u_of_action(0.0);
    double ls = std::log(hp_.init_std);
    double frac = (ls - squash_.log_std_min) / (squash_.log_std_max - squash_.log_std_min);
    double lraw_bias = std::atanh(std::clamp(2.0 * frac - 1.0, -0.999999, 0.999999));
    std::vector<double> pol_bias{mean_bias, lraw_bias};
    auto rng_p = streams.stream("init.policy");
    policy_->init_params(rng_p, 0.01, &pol_bias);
    auto rng_q1 = streams.stream("init.q1");
    q1_->init_params(rng_q1, 0.01);
    if (q2_) {
      auto rng_q2 = streams.stream("init.q2");
      q2_->init_params(rng_q2, 0.01);
    }
    auto rng_v = streams.stream("init.v");
    v_->init_params(rng_v, 0.01);
    v_target_->set_params(v_->get_params());

    opt_policy_ = std::make_unique<Optimizer>(hp_.lr_policy, hp_.sgd_momentum, hp_.adam);
    opt_q1_ = std::make_unique<Optimizer>(hp_.lr_q, hp_.sgd_momentum, hp_.adam);
    if (q2_) opt_q2_ = std::make_unique<Optimizer>(hp_.lr_q, hp_.sgd_momentum, hp_.adam);
    opt_v_ = std::make_unique<Optimizer>(hp_.lr_v, hp_.sgd_momentum, hp_.adam);
  }

  const nn::TopologyConfig& topology() const { return topo_; }
  const SquashSpec& squash() const { return squash_; }
  const SacHyperparams& hyper() const { return hp_; }

  nn::NetBase& policy() { return *policy_; }
  nn::NetBase& q1() { return *q1_; }
  nn::NetBase& q2() { return *q2_; }
  nn::NetBase& v() { return *v_; }
  nn::NetBase& v_target() { return *v_target_; }
  bool twin() const { return q2_ != nullptr; }

  FreshSample fresh_sample(const nn::Mat& obs, const nn::Vec& eps) {
    int B = static_cast<int>(obs.rows());
    nn::Mat y = policy_->forward(obs);
    FreshSample fs;
    fs.mean = y.col(0);
    fs.lraw = y.col(1);
    fs.log_std.resize(B);
    fs.sigma.resize(B);
    fs.u.resize(B);
    fs.t.resize(B);
    fs.log_prob.resize(B);
    for (int i = 0; i < B; ++i) {
      fs.log_std[i] = squash_.squash_log_std(fs.lraw[i]);
      fs.sigma[i] = std::exp(fs.log_std[i]);
      fs.u[i] = fs.mean[i] + fs.sigma[i] * eps[i];
      fs.t[i] = std::tanh(fs.u[i]);
      fs.log_prob[i] = squash_.log_prob(fs.u[i], fs.mean[i], fs.log_std[i]);
    }
    return fs;
  }

  // mean over the batch of 1/2 (V(s) - (Q(s,a~) - alpha log pi(a~|s)))^2,
  // with the target detached; gradients land in the value network only.
  double value_loss(const DenseBatch& b, const nn::Vec& eps) {
    int B = b.size();
    FreshSample fs = fresh_sample(b.obs, eps);
    nn::Vec qv = q_all_forward(b.obs, fs.t);
    nn::Vec target = qv - hp_.alpha * fs.log_prob;
    v_->zero_grads();
    nn::Vec val = v_->forward(b.obs).col(0);
    nn::Vec diff = val - target;
    double loss = 0.5 * diff.squaredNorm() / B;
    v_->backward(nn::Mat(diff / B));
    return loss;
  }

  // mean of 1/2 (Q(s,a) - (r + gamma (1-done) V_target(s')))^2; terminal
  // transitions drop the bootstrap term.
  double q_loss(const DenseBatch& b) {
    int B = b.size();
    nn::Vec vt = v_target_->forward(b.next_obs).col(0);
    nn::Vec y =
        b.reward + hp_.gamma * (nn::Vec::Ones(B) - b.done).cwiseProduct(vt);
    nn::Mat qin(B, b.obs.cols() + 1);
    qin.leftCols(b.obs.cols()) = b.obs;
    qin.col(b.obs.cols()) = b.t_action;
    double loss = 0.0;
    for (nn::NetBase* q : q_nets()) {
      q->zero_grads();
      nn::Vec qv = q->forward(qin).col(0);
      nn::Vec diff = qv - y;
      loss += 0.5 * diff.squaredNorm() / B;
      q->backward(nn::Mat(diff / B));
    }
    return loss;
  }

  // mean of (alpha log pi(a~|s) - Q(s,a~)) with reparameterized a~;
  // gradients land in the policy network only.
  double policy_loss(const DenseBatch& b, const nn::Vec& eps) {
    int B = b.size();
    policy_->zero_grads();
    FreshSample fs = fresh_sample(b.obs, eps);

    nn::Mat qin(B, b.obs.cols() + 1);
    qin.leftCols(b.obs.cols()) = b.obs;
    qin.col(b.obs.cols()) = fs.t;

    nn::Vec qv(B);
    nn::Vec g_t(B);  // d(loss)/dt through the -Q path, includes the -1/B
    if (!twin()) {
      q1_->set_accumulate(false);
      qv = q1_->forward(qin).col(0);
      nn::Mat din = q1_->backward(nn::Mat(nn::Vec::Constant(B, -1.0 / B)));
      g_t = din.col(b.obs.cols());
      q1_->set_accumulate(true);
    } else {
      q1_->set_accumulate(false);
      q2_->set_accumulate(false);
      nn::Vec q1v = q1_->forward(qin).col(0);
      nn::Vec q2v = q2_->forward(qin).col(0);
      nn::Vec d1 = nn::Vec::Zero(B), d2 = nn::Vec::Zero(B);
      for (int i = 0; i < B; ++i) {
        if (q1v[i] <= q2v[i]) {
          qv[i] = q1v[i];
          d1[i] = -1.0 / B;
        } else {
          qv[i] = q2v[i];
          d2[i] = -1.0 / B;
        }
      }
      g_t = q1_->backward(nn::Mat(d1)).col(b.obs.cols()) +
            q2_->backward(nn::Mat(d2)).col(b.obs.cols());
      q1_->set_accumulate(true);
      q2_->set_accumulate(true);
    }

    double loss = (hp_.alpha * fs.log_prob - qv).mean();
    last_entropy_ = -fs.log_prob.mean();

    nn::Mat dy(B, 2);
    for (int i = 0; i < B; ++i) {
      double t = fs.t[i];
      double jac = squash_.half() * (1.0 - t * t) + squash_.jacobian_eps;
      double dlogp_dt = 2.0 * squash_.half() * t / jac;
      double dL_dt = (hp_.alpha / B) * dlogp_dt + g_t[i];
      double dL_du = dL_dt * (1.0 - t * t);
      double dmean = dL_du;
      double dlog_std = dL_du * fs.sigma[i] * eps[i] - hp_.alpha / B;
      dy(i, 0) = dmean;
      dy(i, 1) = dlog_std * squash_.dsquash_log_std(fs.lraw[i]);
    }
    policy_->backward(dy);
    return loss;
  }

  void soft_update_target() { soft_update(*v_target_, *v_, hp_.tau); }

  UpdateStats update(const DenseBatch& b, std::mt19937_64& noise_rng) {
    int B = b.size();
    std::normal_distribution<double> n(0.0, 1.0);
    nn::Vec eps_v(B), eps_pi(B);
    for (int i = 0; i < B; ++i) eps_v[i] = n(noise_rng);
    for (int i = 0; i < B; ++i) eps_pi[i] = n(noise_rng);

    UpdateStats s;
    s.value_loss = value_loss(b, eps_v);
    opt_v_->step(*v_);
    s.q_loss = q_loss(b);
    opt_q1_->step(*q1_);
    if (twin()) opt_q2_->step(*q2_);
    s.policy_loss = policy_loss(b, eps_pi);
    opt_policy_->step(*policy_);
    soft_update_target();
    s.alpha_entropy = hp_.alpha * last_entropy_;
    if (!std::isfinite(s.value_loss) || !std::isfinite(s.q_loss) || !std::isfinite(s.policy_loss))
      throw std::runtime_error("sac: non-finite loss");
    return s;
  }

  ActionSample act_stochastic(const nn::Vec& obs, std::mt19937_64& rng) {
    PolicyOutput p = policy_forward(*policy_, obs, squash_);
    return sample_action(p, squash_, rng);
  }

  double act_deterministic(const nn::Vec& obs) {
    PolicyOutput p = policy_forward(*policy_, obs, squash_);
    return deterministic_action(p, squash_);
  }

  double last_entropy() const { return last_entropy_; }

 private:
  std::vector<nn::NetBase*> q_nets() {
    std::vector<nn::NetBase*> out{q1_.get()};
    if (q2_) out.push_back(q2_.get());
    return out;
  }

  nn::Vec q_all_forward(const nn::Mat& obs, const nn::Vec& t) {
    nn::Mat qin(obs.rows(), obs.cols() + 1);
    qin.leftCols(obs.cols()) = obs;
    qin.col(obs.cols()) = t;
    nn::Vec q = q1_->forward(qin).col(0);
    if (twin()) q = q.cwiseMin(q2_->forward(qin).col(0));
    return q;
  }

  nn::TopologyConfig topo_;
  SquashSpec squash_;
  SacHyperparams hp_;
  std::unique_ptr<nn::NetBase> policy_, q1_, q2_, v_, v_target_;
  std::unique_ptr<Optimizer> opt_policy_, opt_q1_, opt_q2_, opt_v_;
  double last_entropy_ = 0.0;
};

}  // namespace wz
