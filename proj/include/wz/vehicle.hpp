#pragma once

#include <cstdint>

namespace wz {

enum class VehicleClass { kPassenger, kHeavy };

inline constexpr double kPassengerLength = 4.5;  // m
inline constexpr double kHeavyLength = 12.0;     // m

// One simulated vehicle. `pos` is the front-bumper position in corridor
// coordinates; speed is km/h and never negative.
struct Vehicle {
  int id = -1;
  int lane = 0;
  double pos = 0.0;        // m, front bumper
  double speed_kmh = 0.0;  // >= 0
  double accel = 0.0;      // m/s^2, applied last step
  double length = kPassengerLength;
  VehicleClass klass = VehicleClass::kPassenger;
  double entry_time = 0.0;  // s, demand arrival time (queue wait counts as delay)
  bool controlled = false;  // commanded by the RL policy this step

  double rear() const { return pos - length; }
};

// gap from follower's front bumper to leader's rear bumper
inline double bumper_gap(const Vehicle& follower, const Vehicle& leader) {
  return leader.rear() - follower.pos;
}

}  // namespace wz
