#include <gtest/gtest.h>

#include <cmath>

#include "wz/idm.hpp"

using namespace wz;

namespace {

CarFollowParams defaults() { return CarFollowParams{}; }

// independent closed-form equilibrium gap at equal speeds:
// s* / sqrt(1 - (v/v0)^4) with s* = s0 + v T mult
double equilibrium_gap_closed_form(double v_kmh, const CarFollowParams& p) {
  double s_star = p.standstill_gap +
                  kmh_to_mps(v_kmh) * p.desired_time_headway * p.headway_multiplier;
  double free_term = std::pow(v_kmh / p.desired_speed_kmh, 4.0);
  return s_star / std::sqrt(1.0 - free_term);
}

// independent bisection oracle for the zero-acceleration gap
double equilibrium_gap_bisect(double v_kmh, const CarFollowParams& p) {
  double lo = p.standstill_gap, hi = 1e4;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (car_following_accel(mid, v_kmh, v_kmh, p) > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(Idm, FreeFlowLimit) {
  auto p = defaults();
  EXPECT_DOUBLE_EQ(car_following_accel(1e12, 0.0, 0.0, p), p.max_accel);
  EXPECT_DOUBLE_EQ(free_road_accel(0.0, p), p.max_accel);
  // at the desired speed the free term cancels the drive term
  EXPECT_NEAR(free_road_accel(p.desired_speed_kmh, p), 0.0, 1e-12);
  EXPECT_LT(free_road_accel(p.desired_speed_kmh + 10.0, p), 0.0);
}

TEST(Idm, HandEvaluatedPoint) {
  // v = v_lead = 50 km/h, gap 30 m, defaults:
  // s* = 2 + 13.888..*1.2 = 18.666..; a = 2.5*(1 - (5/7)^4 - (s*/30)^2)
  auto p = defaults();
  double expected = 2.5 * (1.0 - std::pow(5.0 / 7.0, 4.0) -
                           std::pow((2.0 + kmh_to_mps(50.0) * 1.2) / 30.0, 2.0));
  EXPECT_NEAR(expected, 0.8813283, 1e-6);
  EXPECT_NEAR(car_following_accel(30.0, 50.0, 50.0, p), expected, 1e-12);
}

TEST(Idm, EquilibriumGap) {
  auto p = defaults();
  for (double v : {30.0, 50.0, 60.0}) {
    double gap_cf = equilibrium_gap_closed_form(v, p);
    double gap_bi = equilibrium_gap_bisect(v, p);
    EXPECT_NEAR(gap_cf, gap_bi, 1e-6) << "v=" << v;
    EXPECT_LT(std::abs(car_following_accel(gap_cf, v, v, p)), 1e-6) << "v=" << v;
  }
  // frozen value at 50 km/h: s* = 18.666.., sqrt(1-(5/7)^4) = 0.8600534..
  EXPECT_NEAR(equilibrium_gap_bisect(50.0, p), 21.7041, 1e-3);
}

TEST(Idm, NonPositiveGapCommandsEmergencyBraking) {
  auto p = defaults();
  EXPECT_DOUBLE_EQ(car_following_accel(0.0, 50.0, 50.0, p), -p.emergency_decel);
  EXPECT_DOUBLE_EQ(car_following_accel(-1.0, 50.0, 50.0, p), -p.emergency_decel);
}

TEST(Idm, OutputClipped) {
  auto p = defaults();
  // tiny gap at high closing speed: clipped at emergency decel
  EXPECT_DOUBLE_EQ(car_following_accel(0.5, 100.0, 0.0, p), -p.emergency_decel);
  for (double gap : {1.0, 5.0, 20.0, 100.0}) {
    for (double v : {0.0, 30.0, 70.0, 100.0}) {
      for (double vl : {0.0, 30.0, 70.0}) {
        double a = car_following_accel(gap, v, vl, p);
        EXPECT_GE(a, -p.emergency_decel);
        EXPECT_LE(a, p.max_accel);
      }
    }
  }
}

TEST(Idm, MeteringDoublesDesiredGap) {
  auto p = defaults();
  CarFollowParams doubled = p;
  doubled.headway_multiplier = 2.0;
  // equilibrium-gap ratio at cruising speeds is >= 1.9
  for (double v : {55.0, 60.0, 65.0}) {
    double ratio = equilibrium_gap_closed_form(v, doubled) / equilibrium_gap_closed_form(v, p);
    EXPECT_GE(ratio, 1.9) << "v=" << v;
    EXPECT_NEAR(equilibrium_gap_bisect(v, doubled) / equilibrium_gap_bisect(v, p), ratio, 1e-6);
  }
}
