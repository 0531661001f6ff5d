#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wz/config.hpp"
#include "wz/idm.hpp"
#include "wz/random.hpp"
#include "wz/road.hpp"
#include "wz/units.hpp"
#include "wz/vehicle.hpp"

namespace wz {

struct CrashEvent {
  double time = 0.0;
  int lane = 0;
  int follower_id = -1;
  int leader_id = -1;
  double overlap = 0.0;  // >= 0, how far the follower penetrated the leader
};

struct DepartureRecord {
  int id = -1;
  double entry_time = 0.0;  // demand arrival time (upstream queue wait included)
  double exit_time = 0.0;
  VehicleClass klass = VehicleClass::kPassenger;
};

struct MergeEvent {
  double time = 0.0;
  int vehicle_id = -1;
  double pos = 0.0;
  int from_lane = 0;
  int to_lane = 0;
};

// vehicle front crossed merge_end (the throughput detector)
struct DetectorCrossing {
  double time = 0.0;
  int id = -1;
  int lane = 0;
};

struct SimConfig {
  RoadLayout layout;
  CarFollowParams idm;
  double demand_vph = 1600.0;
  double heavy_fraction = 0.03;
  double heavy_accel_factor = 0.5;  // heavy vehicles: max_accel scaled by this
  double dt = 0.1;
  double min_arrival_headway = 1.0;  // s, shift of the shifted-exponential draw
  double entry_min_gap = 3.0;        // m beyond standstill gap required to enter
  double v_phys_max_kmh = 100.0;     // hard physical speed cap
  double control_min_accel = -5.0;   // commanded-acceleration bounds, m/s^2
  double control_max_accel = 3.0;
  std::uint64_t seed = 1;

  static SimConfig from_config(const Config& cfg) {
    SimConfig c;
    c.layout = RoadLayout::from_config(cfg);
    c.idm = CarFollowParams::from_config(cfg);
    c.demand_vph = cfg.get_double("sim.demand_vph", c.demand_vph);
    c.heavy_fraction = cfg.get_double("sim.heavy_fraction", c.heavy_fraction);
    c.heavy_accel_factor = cfg.get_double("sim.heavy_accel_factor", c.heavy_accel_factor);
    c.dt = cfg.get_double("sim.dt", c.dt);
    c.min_arrival_headway = cfg.get_double("sim.min_arrival_headway", c.min_arrival_headway);
    c.entry_min_gap = cfg.get_double("sim.entry_min_gap", c.entry_min_gap);
    c.v_phys_max_kmh = cfg.get_double("sim.v_phys_max_kmh", c.v_phys_max_kmh);
    c.control_min_accel = cfg.get_double("sim.control_min_accel", c.control_min_accel);
    c.control_max_accel = cfg.get_double("sim.control_max_accel", c.control_max_accel);
    c.seed = static_cast<std::uint64_t>(cfg.get_int("sim.seed", static_cast<long long>(c.seed)));
    if (c.demand_vph < 0.0) throw std::invalid_argument("sim: demand must be >= 0");
    if (c.dt <= 0.0) throw std::invalid_argument("sim: dt must be positive");
    return c;
  }
};

// Per-vehicle behavior directive for one step, produced by the active
// strategy. Default-constructed = plain car following.
struct Directive {
  double headway_multiplier = 1.0;
  bool commanded = false;  // commanded_accel replaces car following
  double commanded_accel = 0.0;
  // merge request, executed after kinematics if the gap test passes
  bool merge_request = false;
  double merge_min_lead_gap = 0.0;  // m
  double merge_min_lag_gap = 0.0;   // m
  double merge_lead_time_s = 0.0;   // x own speed
  double merge_lag_time_s = 0.0;    // x lag speed
  double merge_lead_closing_s = 0.0;  // x closing speed on the lead side
  double merge_lag_closing_s = 0.0;   // x closing speed on the lag side
  // additional virtual leader (no-passing coupling, zipper yielding)
  bool has_virtual_leader = false;
  double vleader_rear = 0.0;
  double vleader_speed_kmh = 0.0;
};

struct StepDirectives {
  std::unordered_map<int, Directive> by_id;  // lookup only, never iterated

  const Directive& of(int id) const {
    static const Directive kDefault{};
    auto it = by_id.find(id);
    return it == by_id.end() ? kDefault : it->second;
  }
  Directive& mut(int id) { return by_id[id]; }
};

// Complete simulation snapshot: per-lane vehicle lists (ascending position),
// clock, layout, event logs and conservation counters.
struct World {
  double time = 0.0;
  std::array<std::vector<Vehicle>, 2> lanes;
  RoadLayout layout;

  std::vector<CrashEvent> crash_log;
  std::vector<DepartureRecord> departure_log;
  std::vector<MergeEvent> merge_log;
  std::vector<DetectorCrossing> detector_log;

  long entered = 0;         // vehicles physically inserted into the corridor
  long crashed_removed = 0;  // vehicles removed due to a crash

  long present() const {
    return static_cast<long>(lanes[0].size() + lanes[1].size());
  }

  const Vehicle* find(int id) const {
    for (const auto& lane : lanes)
      for (const auto& v : lane)
        if (v.id == id) return &v;
    return nullptr;
  }
  Vehicle* find(int id) {
    for (auto& lane : lanes)
      for (auto& v : lane)
        if (v.id == id) return &v;
    return nullptr;
  }

  // index of v's leader within its lane vector, or -1
  int leader_index(int lane, int index) const {
    return index + 1 < static_cast<int>(lanes[lane].size()) ? index + 1 : -1;
  }
};

inline double infinite_gap() { return std::numeric_limits<double>::infinity(); }

// --- spec-level queries -----------------------------------------------------

// One event per same-lane pair whose bumper gap is <= 0. A leader can only
// overlap followers within its own length, so the inner scan is bounded.
inline std::vector<CrashEvent> detect_crash(const World& w) {
  std::vector<CrashEvent> events;
  for (int lane = 0; lane < 2; ++lane) {
    const auto& vs = w.lanes[lane];
    for (std::size_t i = 0; i + 1 < vs.size(); ++i) {
      for (std::size_t j = i + 1; j < vs.size() && vs[j].pos - vs[i].pos < kHeavyLength; ++j) {
        double gap = bumper_gap(vs[i], vs[j]);
        if (gap <= 0.0) {
          events.push_back(CrashEvent{w.time, lane, vs[i].id, vs[j].id, -gap});
        }
      }
    }
  }
  return events;
}

// Vehicles of both lanes inside [zone_lo, zone_hi), sorted by position
// (ties: lower id first), each with the front gap it would have if all of
// them occupied one virtual lane. The most downstream entry gets +inf.
struct ProjectedEntry {
  int vehicle_id = -1;
  int lane = 0;
  double pos = 0.0;
  double front_gap = 0.0;
};

inline std::vector<ProjectedEntry> project_single_lane(const World& w, double zone_lo,
                                                       double zone_hi) {
  std::vector<ProjectedEntry> order;
  for (int lane = 0; lane < 2; ++lane) {
    for (const auto& v : w.lanes[lane]) {
      if (v.pos >= zone_lo && v.pos < zone_hi) {
        order.push_back(ProjectedEntry{v.id, lane, v.pos, infinite_gap()});
      }
    }
  }
  std::sort(order.begin(), order.end(), [](const ProjectedEntry& a, const ProjectedEntry& b) {
    if (a.pos != b.pos) return a.pos < b.pos;
    return a.vehicle_id < b.vehicle_id;
  });
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    const Vehicle* next = w.find(order[i + 1].vehicle_id);
    order[i].front_gap = next->rear() - order[i].pos;
  }
  return order;
}

// --- simulation --------------------------------------------------------------

class Simulation;

// Strategy hook: evaluated at the start of every step on the pre-step state.
class Strategy {
 public:
  virtual ~Strategy() = default;
  virtual StepDirectives directives(const World& w) = 0;
  virtual void on_merge(const World& w, const Vehicle& v) { (void)w, (void)v; }
  virtual void on_detector_cross(const World& w, const Vehicle& v) { (void)w, (void)v; }
};

// Per-step observer (metrics accumulation, trajectory streaming, ...).
class Collector {
 public:
  virtual ~Collector() = default;
  virtual void on_step(const World& w) = 0;
};

class Simulation {
 public:
  explicit Simulation(const SimConfig& cfg)
      : cfg_(cfg),
        streams_(cfg.seed),
        rng_headway_{streams_.stream("arrivals.lane0"), streams_.stream("arrivals.lane1")},
        rng_class_(streams_.stream("vehicle.class")) {
    cfg_.layout.validate();
    world_.layout = cfg_.layout;
    double h = per_lane_mean_headway();
    if (cfg_.demand_vph > 0.0 && h <= cfg_.min_arrival_headway)
      throw std::invalid_argument("sim: demand exceeds what the arrival headway floor admits");
    for (int lane = 0; lane < 2; ++lane) next_arrival_[lane] = draw_headway(lane);
  }

  const SimConfig& config() const { return cfg_; }
  const World& world() const { return world_; }
  World& world_mut() { return world_; }

  void set_strategy(Strategy* s) { strategy_ = s; }
  void add_collector(Collector* c) { collectors_.push_back(c); }

  long generated() const { return generated_; }
  long generated_heavy() const { return generated_heavy_; }
  long queued_outside() const {
    return static_cast<long>(entry_queue_[0].size() + entry_queue_[1].size());
  }

  // Advance one step of cfg.dt using the active strategy (if any) plus the
  // given commanded accelerations. Step order: directives, accelerations,
  // Euler integration, merges, crash detection, departures, arrivals.
  void step(const std::unordered_map<int, double>* extra_controls = nullptr) {
    StepDirectives dirs;
    if (strategy_ != nullptr) dirs = strategy_->directives(world_);
    if (extra_controls != nullptr) {
      for (const auto& [id, accel] : *extra_controls) {
        Directive& d = dirs.mut(id);
        d.commanded = true;
        d.commanded_accel = accel;
      }
    }
    step_with(dirs);
  }

  void step_with(const StepDirectives& dirs) {
    compute_accels(dirs);
    integrate();
    arbitrate_merges(dirs);
    handle_crashes();
    handle_departures();
    handle_arrivals();
    world_.time += cfg_.dt;
    for (Collector* c : collectors_) c->on_step(world_);
  }

  void run_for(double seconds) {
    long steps = static_cast<long>(std::llround(seconds / cfg_.dt));
    for (long i = 0; i < steps; ++i) step();
  }

  // Physical lane change: instantaneous lateral move preserving ordering.
  // Requires strictly positive lead and lag gaps in the target lane.
  bool change_lane(int vehicle_id) {
    auto [lane, idx] = locate(vehicle_id);
    if (lane < 0) return false;
    int target = 1 - lane;
    Vehicle v = world_.lanes[lane][idx];
    auto& tl = world_.lanes[target];
    auto it = std::lower_bound(tl.begin(), tl.end(), v.pos,
                               [](const Vehicle& a, double p) { return a.pos < p; });
    if (it != tl.end() && it->rear() - v.pos <= 0.0) return false;   // lead gap
    if (it != tl.begin() && v.rear() - std::prev(it)->pos <= 0.0) return false;  // lag gap
    v.lane = target;
    tl.insert(it, v);
    world_.lanes[lane].erase(world_.lanes[lane].begin() + idx);
    world_.merge_log.push_back(MergeEvent{world_.time, v.id, v.pos, lane, target});
    if (strategy_ != nullptr) strategy_->on_merge(world_, *world_.find(v.id));
    return true;
  }

  // Merging-zone merge of a closed-lane vehicle into the open lane.
  bool execute_merge(int vehicle_id) {
    const Vehicle* v = world_.find(vehicle_id);
    if (v == nullptr) return false;
    if (v->lane != cfg_.layout.closed_lane) return false;
    if (!(v->pos >= cfg_.layout.merge_start && v->pos <= cfg_.layout.merge_end)) return false;
    return change_lane(vehicle_id);
  }

  // Gap test applied when a merge request executes; margins ride on the
  // directive.
  bool merge_gap_ok(const Vehicle& v, const Directive& d) const {
    int target = cfg_.layout.open_lane;
    const auto& tl = world_.lanes[target];
    auto it = std::lower_bound(tl.begin(), tl.end(), v.pos,
                               [](const Vehicle& a, double p) { return a.pos < p; });
    if (it != tl.end()) {
      double lead_gap = it->rear() - v.pos;
      double need =
          d.merge_min_lead_gap + d.merge_lead_time_s * kmh_to_mps(v.speed_kmh) +
          d.merge_lead_closing_s * kmh_to_mps(std::max(0.0, v.speed_kmh - it->speed_kmh));
      if (lead_gap < need) return false;
    }
    if (it != tl.begin()) {
      const Vehicle& lag = *std::prev(it);
      double lag_gap = v.rear() - lag.pos;
      double need =
          d.merge_min_lag_gap + d.merge_lag_time_s * kmh_to_mps(lag.speed_kmh) +
          d.merge_lag_closing_s * kmh_to_mps(std::max(0.0, lag.speed_kmh - v.speed_kmh));
      if (lag_gap < need) return false;
    }
    return true;
  }

 private:
  double per_lane_mean_headway() const {
    if (cfg_.demand_vph <= 0.0) return infinite_gap();
    return 7200.0 / cfg_.demand_vph;  // demand split equally across two lanes
  }

  double draw_headway(int lane) {
    if (cfg_.demand_vph <= 0.0) return infinite_gap();
    double mean_extra = per_lane_mean_headway() - cfg_.min_arrival_headway;
    std::exponential_distribution<double> d(1.0 / mean_extra);
    return cfg_.min_arrival_headway + d(rng_headway_[lane]);
  }

  std::pair<int, int> locate(int vehicle_id) const {
    for (int lane = 0; lane < 2; ++lane) {
      const auto& vs = world_.lanes[lane];
      for (std::size_t i = 0; i < vs.size(); ++i)
        if (vs[i].id == vehicle_id) return {lane, static_cast<int>(i)};
    }
    return {-1, -1};
  }

  CarFollowParams effective_params(const Vehicle& v, const Directive& d) const {
    CarFollowParams p = cfg_.idm;
    p.headway_multiplier = std::max(1.0, d.headway_multiplier);
    if (v.klass == VehicleClass::kHeavy) p.max_accel *= cfg_.heavy_accel_factor;
    return p;
  }

  void compute_accels(const StepDirectives& dirs) {
    for (int lane = 0; lane < 2; ++lane) {
      auto& vs = world_.lanes[lane];
      for (std::size_t i = 0; i < vs.size(); ++i) {
        Vehicle& v = vs[i];
        const Directive& d = dirs.of(v.id);
        v.controlled = d.commanded;
        if (d.commanded) {
          v.accel = std::clamp(d.commanded_accel, cfg_.control_min_accel, cfg_.control_max_accel);
          continue;
        }
        CarFollowParams p = effective_params(v, d);
        double a = infinite_gap();
        bool free_road = true;
        if (i + 1 < vs.size()) {
          a = car_following_accel(bumper_gap(v, vs[i + 1]), v.speed_kmh, vs[i + 1].speed_kmh, p);
          free_road = false;
        }
        // closed lane terminates at merge_end: stationary wall
        if (lane == cfg_.layout.closed_lane && v.pos < cfg_.layout.merge_end) {
          double wall_gap = cfg_.layout.merge_end - v.pos;
          a = std::min(a, car_following_accel(wall_gap, v.speed_kmh, 0.0, p));
          free_road = false;
        }
        if (d.has_virtual_leader) {
          // virtual leaders shape cooperative behavior (yield slots,
          // no-passing); they brake at most comfortably since no physical
          // body is there
          double gap = d.vleader_rear - v.pos;
          double va = std::max(car_following_accel(gap, v.speed_kmh, d.vleader_speed_kmh, p),
                               -p.comfort_decel);
          a = std::min(a, va);
          free_road = false;
        }
        if (free_road) a = free_road_accel(v.speed_kmh, p);
        v.accel = a;
      }
    }
  }

  void integrate() {
    double vmax = cfg_.v_phys_max_kmh;
    for (int lane = 0; lane < 2; ++lane) {
      for (auto& v : world_.lanes[lane]) {
        double old_pos = v.pos;
        v.pos += kmh_to_mps(v.speed_kmh) * cfg_.dt;
        v.speed_kmh = std::clamp(v.speed_kmh + mps_to_kmh(v.accel) * cfg_.dt, 0.0, vmax);
        if (old_pos < cfg_.layout.merge_end && v.pos >= cfg_.layout.merge_end) {
          world_.detector_log.push_back(DetectorCrossing{world_.time, v.id, v.lane});
          if (strategy_ != nullptr) strategy_->on_detector_cross(world_, v);
        }
      }
    }
  }

  void arbitrate_merges(const StepDirectives& dirs) {
    // downstream first so each acceptance sees the already-updated lane
    auto& closed = world_.lanes[cfg_.layout.closed_lane];
    std::vector<int> candidates;
    for (const auto& v : closed) {
      if (dirs.of(v.id).merge_request && v.pos < cfg_.layout.merge_end) candidates.push_back(v.id);
    }
    for (auto it = candidates.rbegin(); it != candidates.rend(); ++it) {
      const Vehicle* v = world_.find(*it);
      if (v == nullptr) continue;
      const Directive& d = dirs.of(*it);
      if (merge_gap_ok(*v, d)) change_lane(*it);
      // rejected: vehicle keeps decelerating toward merge_end
    }
  }

  void handle_crashes() {
    auto events = detect_crash(world_);
    if (events.empty()) return;
    for (const auto& e : events) world_.crash_log.push_back(e);
    // remove every vehicle involved in a crash this step
    std::vector<int> involved;
    for (const auto& e : events) {
      involved.push_back(e.follower_id);
      involved.push_back(e.leader_id);
    }
    for (int lane = 0; lane < 2; ++lane) {
      auto& vs = world_.lanes[lane];
      vs.erase(std::remove_if(vs.begin(), vs.end(),
                              [&](const Vehicle& v) {
                                bool hit = std::find(involved.begin(), involved.end(), v.id) !=
                                           involved.end();
                                if (hit) ++world_.crashed_removed;
                                return hit;
                              }),
               vs.end());
    }
  }

  void handle_departures() {
    for (int lane = 0; lane < 2; ++lane) {
      auto& vs = world_.lanes[lane];
      while (!vs.empty() && vs.back().pos >= cfg_.layout.corridor_end) {
        world_.departure_log.push_back(
            DepartureRecord{vs.back().id, vs.back().entry_time, world_.time, vs.back().klass});
        vs.pop_back();
      }
    }
  }

  void handle_arrivals() {
    if (cfg_.demand_vph <= 0.0) return;
    for (int lane = 0; lane < 2; ++lane) {
      while (next_arrival_[lane] <= world_.time) {
        Vehicle v;
        v.id = next_id_++;
        v.lane = lane;
        v.entry_time = next_arrival_[lane];
        std::uniform_real_distribution<double> u(0.0, 1.0);
        bool heavy = u(rng_class_) < cfg_.heavy_fraction;
        v.klass = heavy ? VehicleClass::kHeavy : VehicleClass::kPassenger;
        v.length = heavy ? kHeavyLength : kPassengerLength;
        entry_queue_[lane].push_back(v);
        ++generated_;
        if (heavy) ++generated_heavy_;
        next_arrival_[lane] += draw_headway(lane);
      }
      try_insert(lane);
    }
  }

  void try_insert(int lane) {
    auto& q = entry_queue_[lane];
    auto& vs = world_.lanes[lane];
    while (!q.empty()) {
      Vehicle v = q.front();
      v.pos = v.length;  // rear bumper at the corridor origin
      double gap = vs.empty() ? infinite_gap() : vs.front().rear() - v.pos;
      if (gap < cfg_.idm.standstill_gap + cfg_.entry_min_gap) break;  // deferred, never dropped
      double safe_speed =
          std::isinf(gap)
              ? cfg_.layout.speed_limit_kmh
              : mps_to_kmh((gap - cfg_.idm.standstill_gap) / cfg_.idm.desired_time_headway);
      v.speed_kmh = std::clamp(safe_speed, 0.0, cfg_.layout.speed_limit_kmh);
      vs.insert(vs.begin(), v);
      ++world_.entered;
      q.pop_front();
    }
  }

  SimConfig cfg_;
  World world_;
  SeedStreams streams_;
  std::mt19937_64 rng_headway_[2];
  std::mt19937_64 rng_class_;
  double next_arrival_[2] = {0.0, 0.0};
  std::deque<Vehicle> entry_queue_[2];
  int next_id_ = 0;
  long generated_ = 0;
  long generated_heavy_ = 0;
  Strategy* strategy_ = nullptr;
  std::vector<Collector*> collectors_;
};

// Spec-level step: advance one tick with explicit commanded accelerations.
inline void step_simulation(Simulation& sim, const std::unordered_map<int, double>& controls,
                            double dt) {
  if (dt != sim.config().dt)
    throw std::invalid_argument("step_simulation: dt must match the configured step");
  sim.step(&controls);
}

}  // namespace wz
