#pragma once

// Unit helpers. Public quantities follow traffic-engineering convention
// (speeds in km/h, demand in veh/h); dynamics run in SI internally.

namespace wz {

inline constexpr double kKmhPerMps = 3.6;

constexpr double kmh_to_mps(double kmh) { return kmh / kKmhPerMps; }
constexpr double mps_to_kmh(double mps) { return mps * kKmhPerMps; }

}  // namespace wz
