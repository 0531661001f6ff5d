#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "wz/config.hpp"
#include "wz/sim.hpp"

namespace wz {

enum class StrategyKind { kBase, kEarlyMerge, kLateMerge, kRlMetering };

inline StrategyKind strategy_kind_from_string(const std::string& s) {
  if (s == "base") return StrategyKind::kBase;
  if (s == "early" || s == "early_merge" || s == "em") return StrategyKind::kEarlyMerge;
  if (s == "late" || s == "late_merge" || s == "lm") return StrategyKind::kLateMerge;
  if (s == "rl" || s == "rl_metering") return StrategyKind::kRlMetering;
  throw std::invalid_argument("unknown strategy: " + s);
}

inline const char* strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::kBase: return "base";
    case StrategyKind::kEarlyMerge: return "early_merge";
    case StrategyKind::kLateMerge: return "late_merge";
    case StrategyKind::kRlMetering: return "rl_metering";
  }
  return "?";
}

// Merge acceptance margins. Each side needs a base gap plus a time-headway
// share of the absolute speed plus a braking allowance for the closing
// speed; without the closing terms a vehicle can legally merge into a
// decelerating queue tail it cannot avoid hitting.
struct GapAcceptanceParams {
  double min_lead_gap = 1.5;    // m
  double min_lag_gap = 1.5;     // m
  double lead_time_s = 0.4;     // x own speed
  double lag_time_s = 0.5;      // x lag speed
  double lead_closing_s = 0.8;  // x max(0, v_self - v_lead)
  double lag_closing_s = 0.8;   // x max(0, v_lag - v_self)

  void apply_to(Directive& d) const {
    d.merge_request = true;
    d.merge_min_lead_gap = min_lead_gap;
    d.merge_min_lag_gap = min_lag_gap;
    d.merge_lead_time_s = lead_time_s;
    d.merge_lag_time_s = lag_time_s;
    d.merge_lead_closing_s = lead_closing_s;
    d.merge_lag_closing_s = lag_closing_s;
  }
};

struct EarlyMergeConfig {
  std::vector<double> sign_positions;      // increasing, all upstream of merge_start
  double sensor_speed_threshold = 50.0;    // km/h, activate below
  double hysteresis = 5.0;                 // km/h, deactivate above threshold + hysteresis
  double sensor_window = 100.0;            // m, half-width around the sign

  void validate(const RoadLayout& layout) const {
    for (std::size_t i = 0; i < sign_positions.size(); ++i) {
      if (sign_positions[i] >= layout.merge_start)
        throw std::invalid_argument("early merge: sign positions must be upstream of merge_start");
      if (i > 0 && sign_positions[i] <= sign_positions[i - 1])
        throw std::invalid_argument("early merge: sign positions must be strictly increasing");
    }
  }
};

struct MeteringConfig {
  double th_min = 1.2;               // s, minimum time headway for the merge bonus
  double headway_multiplier = 2.0;   // metering-zone gap doubling
  double speed_match_tol_kmh = 2.0;

  void validate() const {
    if (th_min <= 0.0) throw std::invalid_argument("metering: th_min must be positive");
    if (headway_multiplier < 1.0)
      throw std::invalid_argument("metering: headway multiplier must be >= 1");
  }
};

struct StrategyParams {
  GapAcceptanceParams base_gap;
  GapAcceptanceParams zipper_gap{1.0, 1.0, 0.25, 0.35, 0.5, 0.6};
  double base_seek_window = 400.0;  // m before merge_end where base vehicles look for gaps
  EarlyMergeConfig em;
  MeteringConfig metering;
  int control_interval_steps = 5;

  static StrategyParams from_config(const Config& cfg, const RoadLayout& layout) {
    StrategyParams p;
    auto load_gap = [&cfg](const std::string& prefix, GapAcceptanceParams& g) {
      g.min_lead_gap = cfg.get_double(prefix + ".min_lead", g.min_lead_gap);
      g.min_lag_gap = cfg.get_double(prefix + ".min_lag", g.min_lag_gap);
      g.lead_time_s = cfg.get_double(prefix + ".lead_time", g.lead_time_s);
      g.lag_time_s = cfg.get_double(prefix + ".lag_time", g.lag_time_s);
      g.lead_closing_s = cfg.get_double(prefix + ".lead_closing", g.lead_closing_s);
      g.lag_closing_s = cfg.get_double(prefix + ".lag_closing", g.lag_closing_s);
    };
    load_gap("gap.base", p.base_gap);
    load_gap("gap.zipper", p.zipper_gap);
    p.base_seek_window = cfg.get_double("strategy.base_seek_window", p.base_seek_window);

    int sign_count = static_cast<int>(cfg.get_int("em.sign_count", 5));
    double spacing = cfg.get_double("em.sign_spacing", 200.0);
    p.em.sign_positions.clear();
    for (int i = sign_count; i >= 1; --i)
      p.em.sign_positions.push_back(layout.merge_start - spacing * i);
    p.em.sensor_speed_threshold = cfg.get_double("em.on_below_kmh", p.em.sensor_speed_threshold);
    p.em.hysteresis = cfg.get_double("em.hysteresis_kmh", p.em.hysteresis);
    p.em.sensor_window = cfg.get_double("em.sensor_window", p.em.sensor_window);
    p.em.validate(layout);

    p.metering.th_min = cfg.get_double("metering.th_min", p.metering.th_min);
    p.metering.headway_multiplier =
        cfg.get_double("metering.headway_multiplier", p.metering.headway_multiplier);
    p.metering.speed_match_tol_kmh =
        cfg.get_double("metering.speed_match_tol_kmh", p.metering.speed_match_tol_kmh);
    p.metering.validate();
    p.control_interval_steps =
        static_cast<int>(cfg.get_int("rl.control_interval_steps", p.control_interval_steps));
    return p;
  }
};

// --- shared pieces ------------------------------------------------------------

// Base-case merging: closed-lane vehicles look for an acceptable gap once the
// lane end is within the seek window.
inline void base_merge_directives(const World& w, const StrategyParams& p, StepDirectives& dirs) {
  const auto& layout = w.layout;
  for (const auto& v : w.lanes[layout.closed_lane]) {
    if (v.pos < layout.merge_end && layout.merge_end - v.pos <= p.base_seek_window) {
      p.base_gap.apply_to(dirs.mut(v.id));
    }
  }
}

// Alternating merges at the lane-reduction point, organized as a distributed
// interleave: on the approach, every vehicle paces itself behind its nearest
// cross-lane forerunner, so the two queues zip into one virtual lane before
// the taper and merges execute at speed wherever the margins pass. All
// couplings point downstream, which rules out wait cycles. Each merge issues
// a closed grant paired with an open grant to the merger's new follower, so
// the grant sequence alternates while both lanes hold contenders.
class ZipperArbiter {
 public:
  struct Grant {
    int lane = 0;
    int vehicle_id = -1;
    double time = 0.0;
  };

  void plan(const World& w, const GapAcceptanceParams& gap, StepDirectives& dirs) {
    const auto& layout = w.layout;
    const auto& open = w.lanes[layout.open_lane];
    const auto& closed = w.lanes[layout.closed_lane];
    const double lo = layout.merge_start - approach_window_;

    for (const auto& c : closed) {
      if (c.pos >= layout.merge_start && c.pos < layout.merge_end)
        gap.apply_to(dirs.mut(c.id));
      if (c.pos < lo || c.pos >= layout.merge_end) continue;
      // pace behind the nearest open vehicle ahead: no racing past the queue
      auto it = std::lower_bound(open.begin(), open.end(), c.pos + 0.5,
                                 [](const Vehicle& a, double p) { return a.pos < p; });
      if (it != open.end() && it->pos - c.pos <= pair_range_) {
        Directive& d = dirs.mut(c.id);
        d.has_virtual_leader = true;
        d.vleader_rear = it->rear();
        d.vleader_speed_kmh = it->speed_kmh;
      }
    }
    for (const auto& o : open) {
      if (o.pos < lo || o.pos >= layout.merge_end) continue;
      // hold a merger-sized slot behind the nearest closed forerunner
      auto it = std::lower_bound(closed.begin(), closed.end(), o.pos + 0.5,
                                 [](const Vehicle& a, double p) { return a.pos < p; });
      if (it != closed.end() && it->pos < layout.merge_end && it->pos - o.pos <= pair_range_) {
        Directive& d = dirs.mut(o.id);
        d.has_virtual_leader = true;
        d.vleader_rear = it->rear() - yield_slot_;
        d.vleader_speed_kmh = it->speed_kmh;
      }
    }
  }

  void on_merge(const World& w, const Vehicle& v) {
    if (!(v.pos >= w.layout.merge_start && v.pos <= w.layout.merge_end)) return;
    grants_.push_back(Grant{w.layout.closed_lane, v.id, w.time});
    // the merger's new follower gets the paired open grant
    const auto& open = w.lanes[w.layout.open_lane];
    const Vehicle* follower = nullptr;
    for (const auto& o : open) {
      if (o.pos < v.pos && o.id != v.id) follower = &o;
    }
    if (follower != nullptr) grants_.push_back(Grant{w.layout.open_lane, follower->id, w.time});
  }

  const std::vector<Grant>& grants() const { return grants_; }

 private:
  double approach_window_ = 200.0;  // interleave pacing starts this far before the zone
  double pair_range_ = 60.0;       // max coupling distance to the cross-lane forerunner
  double yield_slot_ = 4.0;        // m reserved behind the merger for the lag margin
  std::vector<Grant> grants_;
};

// Planned grant order over the merging zone: alternate lanes through the
// virtual single-lane order, starting from the token lane.
inline std::vector<std::pair<int, int>> zipper_arbitrate(const World& w, int token_lane = -1) {
  const auto& layout = w.layout;
  auto order = project_single_lane(w, layout.merge_start, layout.merge_end);
  std::vector<std::pair<int, int>> queues[2];  // most downstream first
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    queues[it->lane].push_back({it->lane, it->vehicle_id});
  int tok = token_lane;
  if (tok < 0 && !order.empty()) tok = order.back().lane;
  std::vector<std::pair<int, int>> grants;
  std::size_t next[2] = {0, 0};
  while (next[0] < queues[0].size() || next[1] < queues[1].size()) {
    if (next[tok] >= queues[tok].size()) tok = 1 - tok;
    grants.push_back(queues[tok][next[tok]++]);
    tok = 1 - tok;
  }
  return grants;
}

// --- the four strategies -------------------------------------------------------

class BaseStrategy : public Strategy {
 public:
  explicit BaseStrategy(const StrategyParams& p) : params_(p) {}
  StepDirectives directives(const World& w) override {
    StepDirectives dirs;
    base_merge_directives(w, params_, dirs);
    return dirs;
  }

 private:
  StrategyParams params_;
};

class EarlyMergeStrategy : public Strategy {
 public:
  explicit EarlyMergeStrategy(const StrategyParams& p)
      : params_(p), active_(p.em.sign_positions.size(), false) {}

  StepDirectives directives(const World& w) override {
    update_signs(w);
    StepDirectives dirs;
    base_merge_directives(w, params_, dirs);

    double most_upstream_active = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < active_.size(); ++i)
      if (active_[i]) most_upstream_active = std::min(most_upstream_active,
                                                      params_.em.sign_positions[i]);
    if (!std::isinf(most_upstream_active)) {
      const auto& open = w.lanes[w.layout.open_lane];
      for (const auto& v : w.lanes[w.layout.closed_lane]) {
        if (v.pos >= w.layout.merge_end) continue;
        Directive& d = dirs.mut(v.id);
        params_.base_gap.apply_to(d);  // instructed to take the first acceptable gap
        if (v.pos >= most_upstream_active) {
          // no passing: follow the nearest open-lane vehicle genuinely ahead;
          // one caught alongside is ignored until it pulls clear
          auto it = std::lower_bound(open.begin(), open.end(), v.pos,
                                     [](const Vehicle& a, double p) { return a.pos < p; });
          while (it != open.end() && it->rear() <= v.pos + 0.5) ++it;
          if (it != open.end()) {
            d.has_virtual_leader = true;
            d.vleader_rear = it->rear();
            d.vleader_speed_kmh = it->speed_kmh;
          }
        }
      }
    }
    return dirs;
  }

  const std::vector<bool>& sign_active() const { return active_; }

  // mean open-lane speed around a sign; empty sensor reads as free flow
  double sensor_speed(const World& w, double sign_pos) const {
    double sum = 0.0;
    int n = 0;
    for (const auto& v : w.lanes[w.layout.open_lane]) {
      if (std::abs(v.pos - sign_pos) <= params_.em.sensor_window) {
        sum += v.speed_kmh;
        ++n;
      }
    }
    return n == 0 ? w.layout.speed_limit_kmh : sum / n;
  }

 private:
  void update_signs(const World& w) {
    for (std::size_t i = 0; i < active_.size(); ++i) {
      double mean = sensor_speed(w, params_.em.sign_positions[i]);
      if (!active_[i] && mean < params_.em.sensor_speed_threshold) active_[i] = true;
      if (active_[i] && mean > params_.em.sensor_speed_threshold + params_.em.hysteresis)
        active_[i] = false;
    }
  }

  StrategyParams params_;
  std::vector<bool> active_;
};

class LateMergeStrategy : public Strategy {
 public:
  explicit LateMergeStrategy(const StrategyParams& p) : params_(p) {}

  StepDirectives directives(const World& w) override {
    // lane changes suppressed upstream of merge_start: no merge requests there
    StepDirectives dirs;
    arbiter_.plan(w, params_.zipper_gap, dirs);
    return dirs;
  }
  void on_merge(const World& w, const Vehicle& v) override { arbiter_.on_merge(w, v); }

  const ZipperArbiter& arbiter() const { return arbiter_; }

 private:
  StrategyParams params_;
  ZipperArbiter arbiter_;
};

// Supplies commanded accelerations for RL-controlled vehicles at control
// ticks (training: sampled policy + transition capture; evaluation: the
// deterministic policy).
class ActionSource {
 public:
  virtual ~ActionSource() = default;
  virtual double action(const World& w, const Vehicle& v) = 0;
};

class RlMeteringStrategy : public Strategy {
 public:
  RlMeteringStrategy(const StrategyParams& p, ActionSource* source)
      : params_(p), source_(source) {
    if (source_ == nullptr)
      throw std::invalid_argument("rl metering: a policy action source is required");
  }

  StepDirectives directives(const World& w) override {
    const auto& layout = w.layout;
    StepDirectives dirs;
    bool tick = (step_count_++ % params_.control_interval_steps) == 0;

    for (int lane = 0; lane < 2; ++lane) {
      for (const auto& v : w.lanes[lane]) {
        bool metered = layout.in_zone1(v.pos) ||
                       (layout.in_zone2(v.pos) && lane == layout.open_lane);
        if (metered) dirs.mut(v.id).headway_multiplier = params_.metering.headway_multiplier;
      }
    }
    // Zone II closed lane: policy-controlled, commanded accel held between
    // ticks. A vehicle entering the zone mid-interval stays on car following
    // until the next tick so every control interval has full length.
    std::unordered_map<int, double> next_held;
    for (const auto& v : w.lanes[layout.closed_lane]) {
      if (!layout.in_zone2(v.pos)) continue;
      auto it = held_.find(v.id);
      if (!tick && it == held_.end()) continue;
      double a = tick ? source_->action(w, v) : it->second;
      next_held[v.id] = a;
      Directive& d = dirs.mut(v.id);
      d.commanded = true;
      d.commanded_accel = a;
    }
    held_ = std::move(next_held);  // control released past zone2_end

    arbiter_.plan(w, params_.zipper_gap, dirs);
    return dirs;
  }

  void on_merge(const World& w, const Vehicle& v) override { arbiter_.on_merge(w, v); }

  const ZipperArbiter& arbiter() const { return arbiter_; }

 private:
  StrategyParams params_;
  ActionSource* source_;
  ZipperArbiter arbiter_;
  std::unordered_map<int, double> held_;
  long step_count_ = 0;
};

}  // namespace wz
