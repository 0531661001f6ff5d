#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wz/checkpoint.hpp"
#include "wz/config.hpp"
#include "wz/metrics.hpp"
#include "wz/sim.hpp"
#include "wz/strategy.hpp"
#include "wz/trainer.hpp"

namespace wz {

struct RunConfig {
  StrategyKind strategy = StrategyKind::kBase;
  double demand_vph = 1600.0;
  std::vector<std::uint64_t> seeds;
  double duration_s = 2700.0;  // 45 min
  double warmup_s = 900.0;     // 15 min
  std::string checkpoint;      // RL only
  bool stochastic_policy = false;

  void validate() const {
    if (!(warmup_s < duration_s))
      throw std::invalid_argument("run: warmup must be shorter than duration");
    if (strategy == StrategyKind::kRlMetering && checkpoint.empty())
      throw std::invalid_argument("run: RL strategy requires a trained checkpoint");
  }

  static RunConfig from_config(const Config& cfg) {
    RunConfig r;
    r.strategy = strategy_kind_from_string(cfg.get_string("run.strategy", "base"));
    r.demand_vph = cfg.get_double("run.demand_vph", cfg.get_double("sim.demand_vph", 1600.0));
    long n = cfg.get_int("run.num_seeds", 10);
    long s0 = cfg.get_int("run.first_seed", 1);
    for (long i = 0; i < n; ++i) r.seeds.push_back(static_cast<std::uint64_t>(s0 + i));
    r.duration_s = cfg.get_double("run.duration_s", r.duration_s);
    r.warmup_s = cfg.get_double("run.warmup_s", r.warmup_s);
    r.checkpoint = cfg.get_string("run.checkpoint", "");
    return r;
  }
};

struct MetricsSummary {
  std::vector<SeedMetrics> per_seed;
  double mean_delay = 0.0, std_delay = 0.0;
  double mean_throughput = 0.0, std_throughput = 0.0;
  double mean_travel_time = 0.0, std_travel_time = 0.0;
  long total_crashes = 0;
  double mean_hard_decel_fraction = 0.0;

  void finalize() {
    auto acc = [&](auto get, double& mean, double& sd) {
      double s = 0.0;
      for (const auto& m : per_seed) s += get(m);
      mean = per_seed.empty() ? 0.0 : s / per_seed.size();
      double v = 0.0;
      for (const auto& m : per_seed) v += (get(m) - mean) * (get(m) - mean);
      sd = per_seed.size() > 1 ? std::sqrt(v / (per_seed.size() - 1)) : 0.0;
    };
    acc([](const SeedMetrics& m) { return m.avg_delay_s; }, mean_delay, std_delay);
    acc([](const SeedMetrics& m) { return m.throughput_vph; }, mean_throughput, std_throughput);
    acc([](const SeedMetrics& m) { return m.mean_travel_time_s; }, mean_travel_time,
        std_travel_time);
    total_crashes = 0;
    double hd = 0.0;
    for (const auto& m : per_seed) {
      total_crashes += m.crashes;
      hd += m.hard_decel_fraction;
    }
    mean_hard_decel_fraction = per_seed.empty() ? 0.0 : hd / per_seed.size();
  }
};

// Artifacts requested alongside a run.
struct RunArtifacts {
  std::string trajectories_path;  // per-step CSV, first seed only
  DensityMap density;             // first seed only
  bool want_density = false;
  double density_time_bin = 10.0, density_dist_bin = 10.0;
};

inline std::unique_ptr<Strategy> make_strategy(StrategyKind kind, const StrategyParams& params,
                                               ActionSource* source) {
  switch (kind) {
    case StrategyKind::kBase: return std::make_unique<BaseStrategy>(params);
    case StrategyKind::kEarlyMerge: return std::make_unique<EarlyMergeStrategy>(params);
    case StrategyKind::kLateMerge: return std::make_unique<LateMergeStrategy>(params);
    case StrategyKind::kRlMetering: return std::make_unique<RlMeteringStrategy>(params, source);
  }
  throw std::invalid_argument("make_strategy: unknown kind");
}

// Simulate one seed under one strategy with the full measurement protocol.
inline SeedMetrics run_single(const Config& cfg, StrategyKind kind, const RunConfig& run,
                              std::uint64_t seed, SacAgent* agent,
                              RunArtifacts* artifacts = nullptr) {
  SimConfig sc = SimConfig::from_config(cfg);
  sc.demand_vph = run.demand_vph;
  sc.seed = seed;
  StrategyParams sp = StrategyParams::from_config(cfg, sc.layout);
  EncoderConfig enc = EncoderConfig::from_config(cfg);

  Simulation sim(sc);
  std::unique_ptr<PolicyActionSource> source;
  if (kind == StrategyKind::kRlMetering) {
    if (agent == nullptr) throw std::invalid_argument("run_single: RL strategy without policy");
    source = std::make_unique<PolicyActionSource>(*agent, enc, run.stochastic_policy, seed);
  }
  auto strategy = make_strategy(kind, sp, source.get());
  sim.set_strategy(strategy.get());

  AccelStatsCollector accel_stats(run.warmup_s);
  sim.add_collector(&accel_stats);
  std::unique_ptr<TrajectoryWriter> traj;
  std::unique_ptr<DensityCollector> density;
  if (artifacts != nullptr && !artifacts->trajectories_path.empty()) {
    traj = std::make_unique<TrajectoryWriter>(artifacts->trajectories_path);
    sim.add_collector(traj.get());
  }
  if (artifacts != nullptr && artifacts->want_density) {
    density = std::make_unique<DensityCollector>(sc.layout, run.duration_s,
                                                 artifacts->density_time_bin,
                                                 artifacts->density_dist_bin);
    sim.add_collector(density.get());
  }

  sim.run_for(run.duration_s);

  SeedMetrics m = compute_metrics(sim, run.warmup_s, run.duration_s);
  m.hard_decel_fraction = accel_stats.hard_decel_fraction();
  if (traj) traj->flush();
  if (density) artifacts->density = density->finalize();
  return m;
}

inline MetricsSummary run_experiment(const Config& cfg, const RunConfig& run,
                                     RunArtifacts* artifacts = nullptr) {
  run.validate();
  std::unique_ptr<SacAgent> agent;
  if (run.strategy == StrategyKind::kRlMetering) agent = load_checkpoint(run.checkpoint);
  MetricsSummary summary;
  bool first = true;
  for (std::uint64_t seed : run.seeds) {
    summary.per_seed.push_back(
        run_single(cfg, run.strategy, run, seed, agent.get(), first ? artifacts : nullptr));
    first = false;
  }
  summary.finalize();
  return summary;
}

inline nlohmann::json metrics_to_json(const MetricsSummary& s) {
  nlohmann::json per_seed = nlohmann::json::array();
  for (const auto& m : s.per_seed) {
    per_seed.push_back({{"seed", m.seed},
                        {"avg_delay_s", m.avg_delay_s},
                        {"throughput_vph", m.throughput_vph},
                        {"mean_travel_time_s", m.mean_travel_time_s},
                        {"completed_trips", m.completed_trips},
                        {"crashes", m.crashes},
                        {"residual_vehicles", m.residual_vehicles},
                        {"hard_decel_fraction", m.hard_decel_fraction}});
  }
  return nlohmann::json{{"per_seed", per_seed},
                        {"mean", {{"avg_delay_s", s.mean_delay},
                                  {"throughput_vph", s.mean_throughput},
                                  {"mean_travel_time_s", s.mean_travel_time},
                                  {"hard_decel_fraction", s.mean_hard_decel_fraction}}},
                        {"stddev", {{"avg_delay_s", s.std_delay},
                                    {"throughput_vph", s.std_throughput},
                                    {"mean_travel_time_s", s.std_travel_time}}},
                        {"total_crashes", s.total_crashes}};
}

// Strategy x demand comparison table with relative differences against the
// base case: (control - base) / base * 100%.
inline nlohmann::json compare_strategies(const Config& cfg,
                                         const std::vector<StrategyKind>& strategies,
                                         const std::vector<double>& demands,
                                         const std::vector<std::uint64_t>& seeds,
                                         const std::string& checkpoint) {
  nlohmann::json report;
  for (double demand : demands) {
    std::string dkey = std::to_string(static_cast<long>(demand)) + "_vph";
    std::optional<MetricsSummary> base;
    for (StrategyKind kind : strategies) {
      RunConfig run;
      run.strategy = kind;
      run.demand_vph = demand;
      run.seeds = seeds;
      run.checkpoint = checkpoint;
      Config local = cfg;
      run.duration_s = cfg.get_double("run.duration_s", run.duration_s);
      run.warmup_s = cfg.get_double("run.warmup_s", run.warmup_s);
      MetricsSummary s = run_experiment(local, run);
      nlohmann::json cell = metrics_to_json(s);
      if (kind == StrategyKind::kBase) {
        base = s;
      } else if (base.has_value()) {
        auto rel = [](double v, double b) { return b != 0.0 ? (v - b) / b * 100.0 : 0.0; };
        cell["relative_to_base_pct"] = {
            {"avg_delay_s", rel(s.mean_delay, base->mean_delay)},
            {"throughput_vph", rel(s.mean_throughput, base->mean_throughput)},
            {"mean_travel_time_s", rel(s.mean_travel_time, base->mean_travel_time)}};
      }
      report[dkey][strategy_name(kind)] = std::move(cell);
    }
  }
  return report;
}

}  // namespace wz
