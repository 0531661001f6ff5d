#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "wz/sim.hpp"

using namespace wz;

namespace {

Vehicle make_vehicle(int id, int lane, double pos, double speed = 50.0,
                     double length = kPassengerLength) {
  Vehicle v;
  v.id = id;
  v.lane = lane;
  v.pos = pos;
  v.speed_kmh = speed;
  v.length = length;
  return v;
}

World empty_world() {
  World w;
  w.layout = RoadLayout{};
  return w;
}

std::string dump_world(const World& w) {
  std::ostringstream os;
  os.precision(17);
  os << w.time << '|';
  for (int l = 0; l < 2; ++l)
    for (const auto& v : w.lanes[l])
      os << v.id << ',' << v.pos << ',' << v.speed_kmh << ',' << v.accel << ';';
  os << '#' << w.departure_log.size() << ',' << w.crash_log.size() << ','
     << w.detector_log.size();
  for (const auto& d : w.departure_log) os << '/' << d.id << ',' << d.exit_time;
  return os.str();
}

}  // namespace

TEST(DetectCrash, PositiveGapsNoEvents) {
  World w = empty_world();
  w.lanes[0] = {make_vehicle(0, 0, 100.0), make_vehicle(1, 0, 120.0)};
  EXPECT_TRUE(detect_crash(w).empty());
}

TEST(DetectCrash, OverlapIsOneEvent) {
  // follower front at 100, leader rear at 99.5
  World w = empty_world();
  w.lanes[0] = {make_vehicle(0, 0, 100.0), make_vehicle(1, 0, 104.0)};
  auto events = detect_crash(w);
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0].follower_id, 0);
  EXPECT_EQ(events[0].leader_id, 1);
  EXPECT_NEAR(events[0].overlap, 0.5, 1e-12);
}

TEST(DetectCrash, TouchingCounts) {
  World w = empty_world();
  w.lanes[1] = {make_vehicle(0, 1, 100.0), make_vehicle(1, 1, 104.5)};
  EXPECT_EQ(detect_crash(w).size(), 1u);  // gap exactly 0
}

TEST(ProjectSingleLane, SingleVehicleInfiniteGap) {
  World w = empty_world();
  w.lanes[0] = {make_vehicle(0, 0, 900.0)};
  auto order = project_single_lane(w, 800.0, 1600.0);
  ASSERT_EQ(order.size(), 1u);
  EXPECT_TRUE(std::isinf(order[0].front_gap));
}

TEST(ProjectSingleLane, TwoVehicleGapArithmetic) {
  // 100 m and 120 m fronts, 4.5 m lengths -> trailing gap 15.5
  World w = empty_world();
  w.layout.zone1_start = 0;  // widen the query zone for the raw positions
  w.lanes[0] = {make_vehicle(0, 0, 100.0)};
  w.lanes[1] = {make_vehicle(1, 1, 120.0)};
  auto order = project_single_lane(w, 0.0, 1600.0);
  ASSERT_EQ(order.size(), 2u);
  EXPECT_EQ(order[0].vehicle_id, 0);
  EXPECT_NEAR(order[0].front_gap, 15.5, 1e-12);
  EXPECT_TRUE(std::isinf(order[1].front_gap));
}

TEST(ProjectSingleLane, AlternatingPlatoonInterleaves) {
  World w = empty_world();
  for (int i = 0; i < 5; ++i) w.lanes[0].push_back(make_vehicle(i, 0, 900.0 + 40.0 * i));
  for (int i = 0; i < 5; ++i) w.lanes[1].push_back(make_vehicle(10 + i, 1, 920.0 + 40.0 * i));
  auto order = project_single_lane(w, 800.0, 1600.0);
  ASSERT_EQ(order.size(), 10u);
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    EXPECT_NE(order[i].lane, order[i + 1].lane);
    EXPECT_NEAR(order[i].front_gap, 15.5, 1e-12) << i;
  }
}

TEST(Spawn, ZeroDemandEmptyForever) {
  SimConfig cfg;
  cfg.demand_vph = 0.0;
  Simulation sim(cfg);
  sim.run_for(60.0);
  EXPECT_EQ(sim.world().present(), 0);
  EXPECT_EQ(sim.generated(), 0);
  EXPECT_NEAR(sim.world().time, 60.0, 1e-9);
}

TEST(Spawn, ArrivalRateMatchesDemand) {
  SimConfig cfg;
  cfg.demand_vph = 1600.0;  // mean headway 2.25 s across both lanes
  cfg.seed = 7;
  Simulation sim(cfg);
  sim.run_for(3600.0);
  double rate = static_cast<double>(sim.generated());
  EXPECT_NEAR(rate, 1600.0, 0.05 * 1600.0);
}

TEST(Spawn, HeavyShareMatchesConfig) {
  SimConfig cfg;
  cfg.demand_vph = 3000.0;
  cfg.seed = 3;
  Simulation sim(cfg);
  sim.run_for(3600.0 * 3.5);  // > 10^4 arrivals at this demand
  ASSERT_GE(sim.generated(), 10000);
  double share =
      static_cast<double>(sim.generated_heavy()) / static_cast<double>(sim.generated());
  EXPECT_NEAR(share, 0.03, 0.005);
}

TEST(Spawn, InsufficientGapDefersArrivalsNeverDrops) {
  SimConfig cfg;
  cfg.demand_vph = 2400.0;
  cfg.seed = 5;
  Simulation sim(cfg);
  // park a blocker at the entrance of each lane
  for (int lane = 0; lane < 2; ++lane) {
    Vehicle blocker = make_vehicle(90000 + lane, lane, 12.0, 0.0);
    blocker.accel = 0.0;
    sim.world_mut().lanes[lane].push_back(blocker);
    sim.world_mut().entered += 1;
  }
  StepDirectives hold;  // blockers commanded to stay put
  for (int lane = 0; lane < 2; ++lane) {
    Directive& d = hold.mut(90000 + lane);
    d.commanded = true;
    d.commanded_accel = 0.0;
  }
  for (int i = 0; i < 600; ++i) sim.step_with(hold);
  EXPECT_GT(sim.generated(), 20);
  EXPECT_EQ(sim.world().entered, 2);  // nobody squeezed past the blockers
  EXPECT_EQ(sim.generated(), sim.queued_outside());
}

TEST(Step, EmptyStateOnlyAdvancesClock) {
  SimConfig cfg;
  cfg.demand_vph = 0.0;
  Simulation sim(cfg);
  std::string before = dump_world(sim.world());
  sim.step();
  EXPECT_NEAR(sim.world().time, cfg.dt, 1e-12);
  EXPECT_EQ(sim.world().present(), 0);
  EXPECT_EQ(sim.world().departure_log.size(), 0u);
  (void)before;
}

TEST(Step, FreeVehicleAtDesiredSpeedAdvancesLinearly) {
  SimConfig cfg;
  cfg.demand_vph = 0.0;
  Simulation sim(cfg);
  Vehicle v = make_vehicle(1, 0, 500.0, cfg.idm.desired_speed_kmh);
  sim.world_mut().lanes[0].push_back(v);
  sim.world_mut().entered += 1;
  sim.step();
  const Vehicle* after = sim.world().find(1);
  ASSERT_NE(after, nullptr);
  EXPECT_NEAR(after->pos, 500.0 + kmh_to_mps(cfg.idm.desired_speed_kmh) * cfg.dt, 1e-9);
  EXPECT_NEAR(after->speed_kmh, cfg.idm.desired_speed_kmh, 1e-9);
}

TEST(Step, CommandedAccelClippedToBounds) {
  SimConfig cfg;
  cfg.demand_vph = 0.0;
  Simulation sim(cfg);
  sim.world_mut().lanes[0].push_back(make_vehicle(1, 0, 500.0, 50.0));
  sim.world_mut().entered += 1;
  std::unordered_map<int, double> controls{{1, 99.0}};
  step_simulation(sim, controls, cfg.dt);
  EXPECT_NEAR(sim.world().find(1)->accel, cfg.control_max_accel, 1e-12);
  controls[1] = -99.0;
  step_simulation(sim, controls, cfg.dt);
  EXPECT_NEAR(sim.world().find(1)->accel, cfg.control_min_accel, 1e-12);
}

TEST(Step, MismatchedDtRejected) {
  SimConfig cfg;
  Simulation sim(cfg);
  std::unordered_map<int, double> controls;
  EXPECT_THROW(step_simulation(sim, controls, cfg.dt * 2), std::invalid_argument);
}

TEST(Merge, OpenLaneEmptyAlwaysAccepted) {
  SimConfig cfg;
  cfg.demand_vph = 0.0;
  Simulation sim(cfg);
  Vehicle v = make_vehicle(1, 1, 1650.0);  // in the merging zone, closed lane
  sim.world_mut().lanes[1].push_back(v);
  sim.world_mut().entered += 1;
  EXPECT_TRUE(sim.execute_merge(1));
  EXPECT_EQ(sim.world().lanes[0].size(), 1u);
  EXPECT_EQ(sim.world().lanes[1].size(), 0u);
  EXPECT_TRUE(detect_crash(sim.world()).empty());
  ASSERT_EQ(sim.world().merge_log.size(), 1u);
  EXPECT_EQ(sim.world().merge_log[0].vehicle_id, 1);
}

TEST(Merge, TooSmallSlotRejected) {
  // slot between lead rear and lag front is 7 m; a 4.5 m vehicle placed with
  // 3 m lead gap leaves a negative lag gap -> physically rejected
  SimConfig cfg;
  cfg.demand_vph = 0.0;
  Simulation sim(cfg);
  sim.world_mut().lanes[0].push_back(make_vehicle(10, 0, 1655.0));          // lag, front 1655
  sim.world_mut().lanes[0].push_back(make_vehicle(11, 0, 1666.5));          // lead, rear 1662
  sim.world_mut().lanes[1].push_back(make_vehicle(1, 1, 1659.0));           // lead gap 3 m
  sim.world_mut().entered += 3;
  EXPECT_FALSE(sim.execute_merge(1));
  // widen the slot: push the lag far back
  sim.world_mut().lanes[0][0].pos = 1646.0;
  EXPECT_TRUE(sim.execute_merge(1));
  EXPECT_TRUE(detect_crash(sim.world()).empty());
}

TEST(Merge, OutsideMergingZoneRejected) {
  SimConfig cfg;
  cfg.demand_vph = 0.0;
  Simulation sim(cfg);
  sim.world_mut().lanes[1].push_back(make_vehicle(1, 1, 1000.0));
  sim.world_mut().entered += 1;
  EXPECT_FALSE(sim.execute_merge(1));  // zone II, not merging zone
}

TEST(Invariants, DeterminismBitIdenticalRuns) {
  SimConfig cfg;
  cfg.demand_vph = 1800.0;
  cfg.seed = 42;
  Simulation a(cfg), b(cfg);
  a.run_for(600.0);
  b.run_for(600.0);
  EXPECT_EQ(dump_world(a.world()), dump_world(b.world()));
}

TEST(Invariants, ConservationAndOrderingAndNoTeleport) {
  SimConfig cfg;
  cfg.demand_vph = 2000.0;
  cfg.seed = 11;
  Simulation sim(cfg);
  double max_step = kmh_to_mps(cfg.v_phys_max_kmh) * cfg.dt + 1e-9;
  std::unordered_map<int, double> last_pos;
  for (int i = 0; i < 6000; ++i) {
    sim.step();
    const World& w = sim.world();
    ASSERT_EQ(w.entered, static_cast<long>(w.departure_log.size()) + w.present() +
                             w.crashed_removed)
        << "at step " << i;
    for (int lane = 0; lane < 2; ++lane) {
      const auto& vs = w.lanes[lane];
      for (std::size_t k = 0; k < vs.size(); ++k) {
        ASSERT_GE(vs[k].speed_kmh, 0.0);
        if (k + 1 < vs.size()) ASSERT_GT(bumper_gap(vs[k], vs[k + 1]), 0.0);
        auto it = last_pos.find(vs[k].id);
        if (it != last_pos.end()) ASSERT_LE(vs[k].pos - it->second, max_step);
        last_pos[vs[k].id] = vs[k].pos;
      }
    }
  }
  EXPECT_GT(sim.world().departure_log.size(), 0u);
}

TEST(Invariants, DepartureLogMonotone) {
  SimConfig cfg;
  cfg.demand_vph = 1600.0;
  cfg.seed = 2;
  Simulation sim(cfg);
  sim.run_for(900.0);
  const auto& log = sim.world().departure_log;
  ASSERT_GT(log.size(), 10u);
  for (std::size_t i = 1; i < log.size(); ++i) EXPECT_GE(log[i].exit_time, log[i - 1].exit_time);
}
