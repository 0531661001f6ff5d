#pragma once

#include <algorithm>
#include <cmath>

#include "wz/config.hpp"
#include "wz/units.hpp"

namespace wz {

// Intelligent Driver Model parameters. `headway_multiplier` scales the
// speed-dependent part of the desired gap; the metering zones set it to 2
// to make vehicles hold twice the normal safe distance.
struct CarFollowParams {
  double desired_speed_kmh = 70.0;  // v0
  double desired_time_headway = 1.2;  // T, s
  double standstill_gap = 2.0;        // s0, m
  double max_accel = 2.5;             // a_max, m/s^2
  double comfort_decel = 2.5;         // b_comf, m/s^2
  double emergency_decel = 8.0;       // clip floor, m/s^2
  double headway_multiplier = 1.0;    // >= 1

  static CarFollowParams from_config(const Config& cfg) {
    CarFollowParams p;
    p.desired_speed_kmh = cfg.get_double("idm.desired_speed_kmh", p.desired_speed_kmh);
    p.desired_time_headway = cfg.get_double("idm.desired_time_headway", p.desired_time_headway);
    p.standstill_gap = cfg.get_double("idm.standstill_gap", p.standstill_gap);
    p.max_accel = cfg.get_double("idm.max_accel", p.max_accel);
    p.comfort_decel = cfg.get_double("idm.comfort_decel", p.comfort_decel);
    p.emergency_decel = cfg.get_double("idm.emergency_decel", p.emergency_decel);
    p.headway_multiplier = cfg.get_double("idm.headway_multiplier", p.headway_multiplier);
    return p;
  }
};

// IDM desired gap s* at speed v (km/h) approaching a leader at v_lead.
inline double idm_desired_gap(double v_kmh, double v_lead_kmh, const CarFollowParams& p) {
  const double v = kmh_to_mps(v_kmh);
  const double dv = kmh_to_mps(v_kmh - v_lead_kmh);
  double s = p.standstill_gap + v * p.desired_time_headway * p.headway_multiplier +
             v * dv / (2.0 * std::sqrt(p.max_accel * p.comfort_decel));
  return std::max(s, p.standstill_gap);
}

// IDM acceleration for a follower at speed v with the given bumper gap to a
// leader at v_lead. A non-positive gap commands emergency deceleration; the
// overlap itself is a crash and handled by crash detection, not here.
// Output is clipped to [-emergency_decel, max_accel].
inline double car_following_accel(double gap_m, double v_kmh, double v_lead_kmh,
                                  const CarFollowParams& p) {
  if (gap_m <= 0.0) return -p.emergency_decel;
  const double v = kmh_to_mps(v_kmh);
  const double v0 = kmh_to_mps(p.desired_speed_kmh);
  const double free_term = (v0 > 0.0) ? std::pow(v / v0, 4.0) : 1.0;
  const double s_star = idm_desired_gap(v_kmh, v_lead_kmh, p);
  const double ratio = s_star / gap_m;
  double a = p.max_accel * (1.0 - free_term - ratio * ratio);
  return std::clamp(a, -p.emergency_decel, p.max_accel);
}

// Free-road IDM acceleration (no leader).
inline double free_road_accel(double v_kmh, const CarFollowParams& p) {
  const double v = kmh_to_mps(v_kmh);
  const double v0 = kmh_to_mps(p.desired_speed_kmh);
  const double free_term = (v0 > 0.0) ? std::pow(v / v0, 4.0) : 1.0;
  double a = p.max_accel * (1.0 - free_term);
  return std::clamp(a, -p.emergency_decel, p.max_accel);
}

}  // namespace wz
