#pragma once

#include <stdexcept>

#include "wz/config.hpp"

namespace wz {

// Two-lane corridor with one lane closed downstream of the merging zone.
//
//   0 ........ zone1_start ... zone1_end ... zone2_end ...... merge_end ... corridor_end
//   | lead-in  | Metering I    | Metering II | merging zone   | downstream |
//
// zone1_end == zone2_start and zone2_end == merge_start.
struct RoadLayout {
  double zone1_start = 400.0;
  double zone1_end = 800.0;
  double zone2_start = 800.0;
  double zone2_end = 1600.0;
  double merge_start = 1600.0;
  double merge_end = 1750.0;
  double corridor_end = 2000.0;
  int open_lane = 0;
  int closed_lane = 1;
  double speed_limit_kmh = 70.0;

  double zone2_length() const { return zone2_end - zone2_start; }

  bool in_zone1(double pos) const { return pos >= zone1_start && pos < zone1_end; }
  bool in_zone2(double pos) const { return pos >= zone2_start && pos < zone2_end; }
  bool in_merge_zone(double pos) const { return pos >= merge_start && pos < merge_end; }
  bool upstream_of_merge(double pos) const { return pos < merge_start; }

  void validate() const {
    if (!(zone1_start < zone1_end))
      throw std::invalid_argument("layout: zone1_start must precede zone1_end");
    if (zone1_end != zone2_start)
      throw std::invalid_argument("layout: zone1_end must equal zone2_start");
    if (!(zone2_start < zone2_end))
      throw std::invalid_argument("layout: zone2_start must precede zone2_end");
    if (zone2_end != merge_start)
      throw std::invalid_argument("layout: zone2_end must equal merge_start");
    if (!(merge_start < merge_end))
      throw std::invalid_argument("layout: merge_start must precede merge_end");
    if (!(merge_end <= corridor_end))
      throw std::invalid_argument("layout: merge_end must not exceed corridor_end");
    if (open_lane == closed_lane || open_lane < 0 || open_lane > 1 || closed_lane < 0 ||
        closed_lane > 1)
      throw std::invalid_argument("layout: exactly two distinct lanes expected");
    if (speed_limit_kmh <= 0.0) throw std::invalid_argument("layout: speed limit must be positive");
  }

  static RoadLayout from_config(const Config& cfg) {
    RoadLayout l;
    l.zone1_start = cfg.get_double("layout.zone1_start", l.zone1_start);
    l.zone1_end = cfg.get_double("layout.zone1_end", l.zone1_end);
    l.zone2_start = l.zone1_end;
    l.zone2_end = cfg.get_double("layout.zone2_end", l.zone2_end);
    l.merge_start = l.zone2_end;
    l.merge_end = cfg.get_double("layout.merge_end", l.merge_end);
    l.corridor_end = cfg.get_double("layout.corridor_end", l.corridor_end);
    l.open_lane = static_cast<int>(cfg.get_int("layout.open_lane", l.open_lane));
    l.closed_lane = static_cast<int>(cfg.get_int("layout.closed_lane", l.closed_lane));
    l.speed_limit_kmh = cfg.get_double("layout.speed_limit_kmh", l.speed_limit_kmh);
    l.validate();
    return l;
  }
};

}  // namespace wz
