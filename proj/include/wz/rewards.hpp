#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wz/config.hpp"
#include "wz/sim.hpp"
#include "wz/units.hpp"

namespace wz {

// Reward shaping constants. By default every shaping term is applied as a
// penalty; `literal_paper_signs` flips the crash/violation/band terms to the
// positive sign convention for comparison runs.
struct RewardConfig {
  double speed_limit_kmh = 70.0;
  double low_speed_kmh = 60.0;
  double high_speed_kmh = 80.0;
  double hard_low_kmh = 30.0;
  double hard_high_kmh = 100.0;
  double min_front_headway_m = 2.0;
  double th_min = 1.2;  // s
  double accel_coeff = 0.01;
  double speed_coeff = 0.01;
  double terminal_coeff = 0.2;
  double bonus = 10.0;
  double crash_penalty_mag = 10.0;
  double violation_penalty_mag = 2.5;
  double speed_match_tol_kmh = 2.0;
  bool literal_paper_signs = false;

  void validate() const {
    if (!(hard_low_kmh < low_speed_kmh && low_speed_kmh < speed_limit_kmh &&
          speed_limit_kmh < high_speed_kmh && high_speed_kmh < hard_high_kmh))
      throw std::invalid_argument("reward: speed thresholds must be ordered");
  }

  double sign() const { return literal_paper_signs ? 1.0 : -1.0; }

  static RewardConfig from_config(const Config& cfg) {
    RewardConfig r;
    r.speed_limit_kmh = cfg.get_double("reward.speed_limit_kmh", r.speed_limit_kmh);
    r.low_speed_kmh = cfg.get_double("reward.low_speed_kmh", r.low_speed_kmh);
    r.high_speed_kmh = cfg.get_double("reward.high_speed_kmh", r.high_speed_kmh);
    r.hard_low_kmh = cfg.get_double("reward.hard_low_kmh", r.hard_low_kmh);
    r.hard_high_kmh = cfg.get_double("reward.hard_high_kmh", r.hard_high_kmh);
    r.min_front_headway_m = cfg.get_double("reward.min_front_headway_m", r.min_front_headway_m);
    r.th_min = cfg.get_double("reward.th_min", r.th_min);
    r.accel_coeff = cfg.get_double("reward.accel_coeff", r.accel_coeff);
    r.speed_coeff = cfg.get_double("reward.speed_coeff", r.speed_coeff);
    r.terminal_coeff = cfg.get_double("reward.terminal_coeff", r.terminal_coeff);
    r.bonus = cfg.get_double("reward.bonus", r.bonus);
    r.crash_penalty_mag = cfg.get_double("reward.crash_penalty_mag", r.crash_penalty_mag);
    r.violation_penalty_mag =
        cfg.get_double("reward.violation_penalty_mag", r.violation_penalty_mag);
    r.speed_match_tol_kmh = cfg.get_double("reward.speed_match_tol_kmh", r.speed_match_tol_kmh);
    r.literal_paper_signs = cfg.get_bool("reward.literal_paper_signs", r.literal_paper_signs);
    r.validate();
    return r;
  }
};

enum class TerminalKind { kNone, kMerged, kCrashed };

// ---- shaping terms (shared with the single-vehicle regulation task) ----------

inline double accel_smoothness_term(double accel, const RewardConfig& cfg) {
  return -cfg.accel_coeff * accel * accel;
}

// fires once when the speed leaves [hard_low, hard_high] or the front
// headway drops under the minimum; single disjunction
inline double violation_term(double v_kmh, double front_headway_m, const RewardConfig& cfg) {
  bool violated = v_kmh < cfg.hard_low_kmh || v_kmh > cfg.hard_high_kmh ||
                  front_headway_m < cfg.min_front_headway_m;
  return violated ? cfg.sign() * cfg.violation_penalty_mag : 0.0;
}

inline double speed_band_terms(double v_kmh, const RewardConfig& cfg) {
  double r = 0.0;
  if (v_kmh > cfg.high_speed_kmh) r += cfg.sign() * (v_kmh - cfg.high_speed_kmh) * cfg.speed_coeff;
  if (v_kmh < cfg.low_speed_kmh) r += cfg.sign() * (cfg.low_speed_kmh - v_kmh) * cfg.speed_coeff;
  return r;
}

// ---- terminal detection and rewards ------------------------------------------

inline TerminalKind check_terminal(const World& w, int subject_id) {
  for (const auto& e : w.crash_log)
    if (e.follower_id == subject_id || e.leader_id == subject_id) return TerminalKind::kCrashed;
  for (const auto& e : w.merge_log) {
    if (e.vehicle_id == subject_id && e.to_lane == w.layout.open_lane &&
        e.pos >= w.layout.merge_start && e.pos <= w.layout.merge_end)
      return TerminalKind::kMerged;
  }
  return TerminalKind::kNone;
}

// mean speed of all vehicles currently in zone II (both lanes); an empty
// zone reads as the speed limit (no shockwave risk)
inline double zone2_mean_speed(const World& w, const RewardConfig& cfg) {
  double sum = 0.0;
  int n = 0;
  for (int lane = 0; lane < 2; ++lane) {
    for (const auto& v : w.lanes[lane]) {
      if (w.layout.in_zone2(v.pos)) {
        sum += v.speed_kmh;
        ++n;
      }
    }
  }
  return n == 0 ? cfg.speed_limit_kmh : sum / n;
}

// Reward on a successful merge: shockwave term from the zone-II average
// speed plus the safe-slot bonus when both target-lane headways exceed
// th_min at the neighbor speeds and the subject matches their mean speed.
inline double terminal_reward(const World& w, int subject_id, const RewardConfig& cfg) {
  const Vehicle* subject = w.find(subject_id);
  if (subject == nullptr) throw std::invalid_argument("terminal_reward: unknown vehicle");

  double a_v = zone2_mean_speed(w, cfg);
  double r = -std::max(0.0, (cfg.speed_limit_kmh - a_v) * cfg.terminal_coeff);

  const auto& open = w.lanes[w.layout.open_lane];
  const Vehicle* lag = nullptr;
  const Vehicle* lead = nullptr;
  for (const auto& v : open) {
    if (v.id == subject_id) continue;
    if (v.pos < subject->pos) {
      lag = &v;
    } else if (lead == nullptr) {
      lead = &v;
    }
  }

  // a missing neighbor leaves an unbounded gap and no speed mismatch
  double dx1 = lag != nullptr ? subject->rear() - lag->pos : infinite_gap();
  double v1 = lag != nullptr ? lag->speed_kmh : subject->speed_kmh;
  double dx2 = lead != nullptr ? lead->rear() - subject->pos : infinite_gap();
  double v2 = lead != nullptr ? lead->speed_kmh : subject->speed_kmh;

  bool slot_ok = dx1 > kmh_to_mps(v1) * cfg.th_min && dx2 > kmh_to_mps(v2) * cfg.th_min;
  bool speed_ok = std::abs(subject->speed_kmh - (v1 + v2) / 2.0) < cfg.speed_match_tol_kmh;
  if (slot_ok && speed_ok) r += cfg.bonus;
  return r;
}

inline double front_headway(const World& w, const Vehicle& subject) {
  const auto& vs = w.lanes[subject.lane];
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (vs[i].id == subject.id)
      return i + 1 < vs.size() ? bumper_gap(vs[i], vs[i + 1]) : infinite_gap();
  }
  return infinite_gap();
}

// Non-terminal shaping: acceleration smoothness, hard violations, and the
// speed band around the limit.
inline double step_reward(const World& w, int subject_id, double action_accel,
                          const RewardConfig& cfg) {
  const Vehicle* subject = w.find(subject_id);
  if (subject == nullptr) throw std::invalid_argument("step_reward: unknown vehicle");
  double v = subject->speed_kmh;
  double r = accel_smoothness_term(action_accel, cfg);
  r += violation_term(v, front_headway(w, *subject), cfg);
  r += speed_band_terms(v, cfg);
  return r;
}

inline double crash_reward(const RewardConfig& cfg) { return cfg.sign() * cfg.crash_penalty_mag; }

}  // namespace wz
