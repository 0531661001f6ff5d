#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "wz/sim.hpp"
#include "wz/units.hpp"

namespace wz {

// Time x distance density matrices per lane, veh/km.
struct DensityMap {
  double time_bin = 10.0;  // s
  double dist_bin = 10.0;  // m
  int rows = 0;            // time bins
  int cols = 0;            // distance bins
  std::vector<double> lane[2];  // row-major, veh/km

  double at(int lane_idx, int row, int col) const { return lane[lane_idx][row * cols + col]; }

  void to_csv(std::ostream& out) const {
    out << "lane,time_bin_s,";
    for (int c = 0; c < cols; ++c) out << (c > 0 ? "," : "") << "d" << c * static_cast<int>(dist_bin);
    out << "\n";
    for (int l = 0; l < 2; ++l) {
      for (int r = 0; r < rows; ++r) {
        out << l << ',' << r * time_bin;
        for (int c = 0; c < cols; ++c) out << ',' << at(l, r, c);
        out << '\n';
      }
    }
  }
};

class DensityCollector : public Collector {
 public:
  DensityCollector(const RoadLayout& layout, double duration_s, double time_bin, double dist_bin)
      : layout_(layout), time_bin_(time_bin), dist_bin_(dist_bin),
        rows_(static_cast<int>(std::ceil(duration_s / time_bin))),
        cols_(static_cast<int>(std::ceil(layout.corridor_end / dist_bin))) {
    counts_[0].assign(static_cast<std::size_t>(rows_) * cols_, 0.0);
    counts_[1].assign(static_cast<std::size_t>(rows_) * cols_, 0.0);
    steps_.assign(rows_, 0);
  }

  void on_step(const World& w) override {
    int row = static_cast<int>(w.time / time_bin_);
    if (row < 0 || row >= rows_) return;
    steps_[row] += 1;
    for (int lane = 0; lane < 2; ++lane) {
      for (const auto& v : w.lanes[lane]) {
        int col = static_cast<int>(v.pos / dist_bin_);
        if (col >= 0 && col < cols_) counts_[lane][row * cols_ + col] += 1.0;
      }
    }
  }

  DensityMap finalize() const {
    DensityMap m;
    m.time_bin = time_bin_;
    m.dist_bin = dist_bin_;
    m.rows = rows_;
    m.cols = cols_;
    for (int l = 0; l < 2; ++l) {
      m.lane[l].assign(static_cast<std::size_t>(rows_) * cols_, 0.0);
      for (int r = 0; r < rows_; ++r) {
        if (steps_[r] == 0) continue;
        for (int c = 0; c < cols_; ++c) {
          double avg_count = counts_[l][r * cols_ + c] / steps_[r];
          m.lane[l][r * cols_ + c] = avg_count * (1000.0 / dist_bin_);
        }
      }
    }
    return m;
  }

 private:
  RoadLayout layout_;
  double time_bin_, dist_bin_;
  int rows_, cols_;
  std::vector<double> counts_[2];
  std::vector<long> steps_;
};

// Post-warmup acceleration histogram over every (vehicle, step) pair, plus
// an exact count of hard decelerations.
class AccelStatsCollector : public Collector {
 public:
  AccelStatsCollector(double warmup_s, double bin_width = 0.25, double lo = -9.0, double hi = 4.0,
                      double hard_decel_threshold = -5.0)
      : warmup_(warmup_s), bin_w_(bin_width), lo_(lo), hi_(hi), hard_thr_(hard_decel_threshold),
        bins_(static_cast<std::size_t>(std::ceil((hi - lo) / bin_width)), 0) {}

  void on_step(const World& w) override {
    if (w.time < warmup_) return;
    for (int lane = 0; lane < 2; ++lane) {
      for (const auto& v : w.lanes[lane]) {
        ++total_;
        if (v.accel <= hard_thr_) ++hard_;
        int b = static_cast<int>((std::clamp(v.accel, lo_, hi_ - 1e-9) - lo_) / bin_w_);
        bins_[static_cast<std::size_t>(b)] += 1;
      }
    }
  }

  long total_samples() const { return total_; }
  long hard_decels() const { return hard_; }
  double hard_decel_fraction() const { return total_ == 0 ? 0.0 : double(hard_) / double(total_); }
  const std::vector<long>& bins() const { return bins_; }
  double bin_lo(int i) const { return lo_ + i * bin_w_; }

  void to_csv(std::ostream& out) const {
    out << "accel_lo,accel_hi,count\n";
    for (std::size_t i = 0; i < bins_.size(); ++i)
      out << bin_lo(static_cast<int>(i)) << ',' << bin_lo(static_cast<int>(i)) + bin_w_ << ','
          << bins_[i] << '\n';
  }

 private:
  double warmup_, bin_w_, lo_, hi_, hard_thr_;
  std::vector<long> bins_;
  long total_ = 0;
  long hard_ = 0;
};

// Front-bumper-to-lead-rear distances sampled in the merging zone after
// warmup.
class HeadwayCollector : public Collector {
 public:
  explicit HeadwayCollector(double warmup_s) : warmup_(warmup_s) {}

  void on_step(const World& w) override {
    if (w.time < warmup_) return;
    for (int lane = 0; lane < 2; ++lane) {
      const auto& vs = w.lanes[lane];
      for (std::size_t i = 0; i + 1 < vs.size(); ++i) {
        if (w.layout.in_merge_zone(vs[i].pos)) samples_.push_back(bumper_gap(vs[i], vs[i + 1]));
      }
    }
  }

  const std::vector<double>& samples() const { return samples_; }
  double mean() const {
    if (samples_.empty()) return 0.0;
    double s = 0.0;
    for (double x : samples_) s += x;
    return s / static_cast<double>(samples_.size());
  }

 private:
  double warmup_;
  std::vector<double> samples_;
};

// Streams per-step trajectory records; lane-change steps are marked.
class TrajectoryWriter : public Collector {
 public:
  explicit TrajectoryWriter(const std::string& path, int sample_every = 1)
      : out_(path), every_(sample_every) {
    if (!out_) throw std::runtime_error("cannot open trajectory file: " + path);
    out_ << "time,id,lane,pos,speed,accel,lane_change\n";
  }

  void on_step(const World& w) override {
    bool sample = (step_++ % every_) == 0;
    for (int lane = 0; lane < 2; ++lane) {
      for (const auto& v : w.lanes[lane]) {
        auto it = last_lane_.find(v.id);
        bool changed = it != last_lane_.end() && it->second != lane;
        last_lane_[v.id] = lane;
        if (sample || changed) {
          out_ << w.time << ',' << v.id << ',' << lane << ',' << v.pos << ',' << v.speed_kmh << ','
               << v.accel << ',' << (changed ? 1 : 0) << '\n';
        }
      }
    }
  }

  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
  int every_;
  long step_ = 0;
  std::map<int, int> last_lane_;
};

// Completed-trip mobility metrics over the measurement window.
struct SeedMetrics {
  std::uint64_t seed = 0;
  double avg_delay_s = 0.0;
  double throughput_vph = 0.0;
  double mean_travel_time_s = 0.0;
  long completed_trips = 0;
  long detector_count = 0;
  long crashes = 0;
  long residual_vehicles = 0;  // still in corridor or queued at run end
  double hard_decel_fraction = 0.0;
};

inline SeedMetrics compute_metrics(const Simulation& sim, double warmup_s, double duration_s) {
  const World& w = sim.world();
  const RoadLayout& l = w.layout;
  SeedMetrics m;
  m.seed = sim.config().seed;
  double hours = (duration_s - warmup_s) / 3600.0;
  for (const auto& d : w.detector_log)
    if (d.time > warmup_s && d.time <= duration_s) ++m.detector_count;
  m.throughput_vph = hours > 0.0 ? m.detector_count / hours : 0.0;

  double free_flow_s = l.corridor_end / kmh_to_mps(l.speed_limit_kmh);
  double sum_tt = 0.0, sum_delay = 0.0;
  for (const auto& d : w.departure_log) {
    if (d.exit_time <= warmup_s || d.exit_time > duration_s) continue;
    double tt = d.exit_time - d.entry_time;
    sum_tt += tt;
    sum_delay += std::max(0.0, tt - free_flow_s);
    ++m.completed_trips;
  }
  if (m.completed_trips > 0) {
    m.mean_travel_time_s = sum_tt / m.completed_trips;
    m.avg_delay_s = sum_delay / m.completed_trips;
  }
  m.crashes = static_cast<long>(w.crash_log.size());
  m.residual_vehicles = w.present() + sim.queued_outside();
  return m;
}

}  // namespace wz
