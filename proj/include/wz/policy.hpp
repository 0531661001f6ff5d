#pragma once

#include <cmath>
#include <random>
#include <stdexcept>

#include "wz/config.hpp"
#include "wz/nn.hpp"

namespace wz {

// Gaussian policy head squashed through tanh onto the acceleration range.
// The log-std output is mapped smoothly into [log_std_min, log_std_max], so
// the std stays inside [sigma_min, sigma_max] with usable gradients
// everywhere.
struct SquashSpec {
  double a_min = -5.0;   // m/s^2
  double a_max = 3.0;
  double log_std_min = -20.0;
  double log_std_max = 2.0;
  double jacobian_eps = 1e-6;

  double mid() const { return 0.5 * (a_max + a_min); }
  double half() const { return 0.5 * (a_max - a_min); }

  double action_of_t(double t) const { return mid() + half() * t; }
  double t_of_action(double a) const { return (a - mid()) / half(); }

  double squash_log_std(double raw) const {
    return log_std_min + (log_std_max - log_std_min) * 0.5 * (std::tanh(raw) + 1.0);
  }
  double dsquash_log_std(double raw) const {
    double th = std::tanh(raw);
    return (log_std_max - log_std_min) * 0.5 * (1.0 - th * th);
  }

  // log density of the squashed action expressed through the pre-squash
  // sample u: Gaussian log density minus the tanh+affine Jacobian
  double log_prob(double u, double mean, double log_std) const {
    double sigma = std::exp(log_std);
    double z = (u - mean) / sigma;
    double t = std::tanh(u);
    return -0.5 * z * z - log_std - 0.5 * std::log(2.0 * M_PI) -
           std::log(half() * (1.0 - t * t) + jacobian_eps);
  }

  // pre-squash mean that maps to a given action, for initialization
  double u_of_action(double a) const { return std::atanh(t_of_action(a)); }

  static SquashSpec from_config(const Config& cfg) {
    SquashSpec s;
    s.a_min = cfg.get_double("action.min_accel", s.a_min);
    s.a_max = cfg.get_double("action.max_accel", s.a_max);
    s.log_std_min = cfg.get_double("action.log_std_min", s.log_std_min);
    s.log_std_max = cfg.get_double("action.log_std_max", s.log_std_max);
    if (!(s.a_min < s.a_max)) throw std::invalid_argument("action bounds must be ordered");
    return s;
  }
};

struct PolicyOutput {
  double mean = 0.0;     // pre-squash Gaussian mean
  double log_std = 0.0;  // already mapped into [log_std_min, log_std_max]
};

struct ActionSample {
  double accel = 0.0;
  double log_prob = 0.0;
  double u = 0.0;  // pre-squash sample
};

// deterministic policy evaluation for one observation row
inline PolicyOutput policy_forward(nn::NetBase& policy, const nn::Vec& obs,
                                   const SquashSpec& spec) {
  nn::Mat x = obs.transpose();
  nn::Mat y = policy.forward(x);
  if (y.cols() != 2) throw std::invalid_argument("policy_forward: policy head must emit 2 values");
  return PolicyOutput{y(0, 0), spec.squash_log_std(y(0, 1))};
}

inline ActionSample sample_action(const PolicyOutput& p, const SquashSpec& spec,
                                  std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  double u = p.mean + std::exp(p.log_std) * n(rng);
  ActionSample s;
  s.u = u;
  s.accel = spec.action_of_t(std::tanh(u));
  s.log_prob = spec.log_prob(u, p.mean, p.log_std);
  return s;
}

inline double deterministic_action(const PolicyOutput& p, const SquashSpec& spec) {
  return spec.action_of_t(std::tanh(p.mean));
}

inline double q_forward(nn::NetBase& q, const nn::Vec& obs, double accel,
                        const SquashSpec& spec) {
  nn::Mat x(1, obs.size() + 1);
  x.leftCols(obs.size()) = obs.transpose();
  x(0, obs.size()) = spec.t_of_action(accel);
  return q.forward(x)(0, 0);
}

inline double v_forward(nn::NetBase& v, const nn::Vec& obs) {
  nn::Mat x = obs.transpose();
  return v.forward(x)(0, 0);
}

}  // namespace wz
