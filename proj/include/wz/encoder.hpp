#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "wz/config.hpp"
#include "wz/sim.hpp"
#include "wz/units.hpp"

namespace wz {

struct EncoderConfig {
  double v_max_kmh = 100.0;   // speed normalization bound
  double a_max_abs = 5.0;     // acceleration normalization bound, m/s^2

  static EncoderConfig from_config(const Config& cfg) {
    EncoderConfig e;
    e.v_max_kmh = cfg.get_double("encoder.v_max_kmh", e.v_max_kmh);
    e.a_max_abs = cfg.get_double("encoder.a_max_abs", e.a_max_abs);
    return e;
  }
};

inline double normalize_speed(double v_kmh, const EncoderConfig& cfg) {
  return std::clamp(v_kmh / cfg.v_max_kmh, 0.0, 1.0);
}

inline double normalize_accel(double a, const EncoderConfig& cfg) {
  return std::clamp(a / cfg.a_max_abs, -1.0, 1.0);
}

// Lane-by-position rasters over Metering Zone II. Row 0 is the open lane,
// row 1 the closed lane; column i is the 1-m segment starting i meters past
// zone2_start. Empty cells are exactly 0.
struct GridMaps {
  int cells = 800;
  std::vector<double> speed;  // 2 * cells, row-major
  std::vector<double> accel;

  double& speed_at(int row, int cell) { return speed[row * cells + cell]; }
  double& accel_at(int row, int cell) { return accel[row * cells + cell]; }
  double speed_at(int row, int cell) const { return speed[row * cells + cell]; }
  double accel_at(int row, int cell) const { return accel[row * cells + cell]; }
};

// [dx_lag_open, dv_lag_open, dx_lead_open, dv_lead_open,
//  dx_lead_own, dv_lead_own, v_subject, x_subject]
// dx normalized by the zone length, dv and v by v_max, x_subject is the
// remaining distance to zone2_end over the zone length.
// Missing neighbor: dx = 1.0, dv = 0.0.
struct LocalVector {
  std::array<double, 8> v{};
};

struct EncodedState {
  GridMaps grid;
  LocalVector local;
  int subject_id = -1;

  int scalar_count() const { return 2 * grid.cells * 2 + 8; }
};

namespace detail {

// Cells covered by a body [rear, front) in zone coordinates:
// floor(rear) .. floor(front) - 1, clipped to [0, cells).
inline std::pair<int, int> raster_range(double rear, double front, int cells) {
  int first = static_cast<int>(std::floor(rear));
  int last = static_cast<int>(std::floor(front)) - 1;
  first = std::max(first, 0);
  last = std::min(last, cells - 1);
  return {first, last};
}

}  // namespace detail

inline EncodedState encode_state(const World& w, int subject_id, const EncoderConfig& cfg) {
  const auto& layout = w.layout;
  const Vehicle* subject = w.find(subject_id);
  if (subject == nullptr) throw std::invalid_argument("encode_state: unknown vehicle id");
  if (subject->lane != layout.closed_lane || !layout.in_zone2(subject->pos))
    throw std::invalid_argument("encode_state: subject must be a closed-lane vehicle in zone II");

  EncodedState es;
  es.subject_id = subject_id;
  es.grid.cells = static_cast<int>(std::lround(layout.zone2_length()));
  es.grid.speed.assign(2 * es.grid.cells, 0.0);
  es.grid.accel.assign(2 * es.grid.cells, 0.0);

  for (int lane = 0; lane < 2; ++lane) {
    int row = (lane == layout.open_lane) ? 0 : 1;
    for (const auto& v : w.lanes[lane]) {
      double rear = v.rear() - layout.zone2_start;
      double front = v.pos - layout.zone2_start;
      auto [first, last] = detail::raster_range(rear, front, es.grid.cells);
      if (first > last) continue;
      double sv = normalize_speed(v.speed_kmh, cfg);
      double av = normalize_accel(v.accel, cfg);
      for (int c = first; c <= last; ++c) {
        es.grid.speed_at(row, c) = sv;
        es.grid.accel_at(row, c) = av;
      }
    }
  }

  // local neighbors: open-lane lag/lead plus own-lane lead
  const double zone_len = layout.zone2_length();
  const Vehicle* lag_open = nullptr;
  const Vehicle* lead_open = nullptr;
  for (const auto& v : w.lanes[layout.open_lane]) {
    if (v.pos < subject->pos) {
      lag_open = &v;  // lanes sorted ascending: last one below subject wins
    } else if (lead_open == nullptr) {
      lead_open = &v;
    }
  }
  const Vehicle* lead_own = nullptr;
  {
    const auto& vs = w.lanes[layout.closed_lane];
    for (std::size_t i = 0; i < vs.size(); ++i) {
      if (vs[i].id == subject_id && i + 1 < vs.size()) lead_own = &vs[i + 1];
    }
  }

  auto dx_norm = [&](double gap) { return std::clamp(gap / zone_len, 0.0, 1.0); };
  auto dv_norm = [&](double other_kmh) {
    return std::clamp((other_kmh - subject->speed_kmh) / cfg.v_max_kmh, -1.0, 1.0);
  };

  auto& e = es.local.v;
  e.fill(0.0);
  if (lag_open != nullptr) {
    e[0] = dx_norm(subject->rear() - lag_open->pos);
    e[1] = dv_norm(lag_open->speed_kmh);
  } else {
    e[0] = 1.0;
    e[1] = 0.0;
  }
  if (lead_open != nullptr) {
    e[2] = dx_norm(lead_open->rear() - subject->pos);
    e[3] = dv_norm(lead_open->speed_kmh);
  } else {
    e[2] = 1.0;
    e[3] = 0.0;
  }
  if (lead_own != nullptr) {
    e[4] = dx_norm(lead_own->rear() - subject->pos);
    e[5] = dv_norm(lead_own->speed_kmh);
  } else {
    e[4] = 1.0;
    e[5] = 0.0;
  }
  e[6] = normalize_speed(subject->speed_kmh, cfg);
  e[7] = std::clamp((layout.zone2_end - subject->pos) / zone_len, 0.0, 1.0);
  return es;
}

// Row-major refill of one 2 x cells map into rows x cols (bijective).
inline std::vector<double> reshape_grid(const std::vector<double>& map, int rows, int cols) {
  if (static_cast<int>(map.size()) != rows * cols)
    throw std::invalid_argument("reshape_grid: element count mismatch");
  return map;  // row-major refill of a row-major buffer is the identity on storage
}

// (row, col) of flat element (lane_row, cell) after reshaping 2 x cells into
// rows x cols.
inline std::pair<int, int> reshape_index(int lane_row, int cell, int cells, int cols) {
  int flat = lane_row * cells + cell;
  return {flat / cols, flat % cols};
}

// Flat observation vector: speed rows, accel rows, then the 8-vector.
inline Eigen::VectorXd flatten(const EncodedState& es) {
  int n = es.scalar_count();
  Eigen::VectorXd out(n);
  int k = 0;
  for (double x : es.grid.speed) out[k++] = x;
  for (double x : es.grid.accel) out[k++] = x;
  for (double x : es.local.v) out[k++] = x;
  return out;
}

// Compact storage for replay: indices of nonzero entries plus the local
// vector tail (grids are sparse; a dense 3,208-double copy per transition
// would not fit the replay buffer in memory).
struct SparseObs {
  std::int32_t dim = 0;
  std::vector<std::int32_t> idx;
  std::vector<float> val;

  static SparseObs from(const EncodedState& es) {
    SparseObs s;
    s.dim = es.scalar_count();
    Eigen::VectorXd flat = flatten(es);
    for (int i = 0; i < flat.size(); ++i) {
      if (flat[i] != 0.0) {
        s.idx.push_back(i);
        s.val.push_back(static_cast<float>(flat[i]));
      }
    }
    return s;
  }

  static SparseObs from_dense(const Eigen::VectorXd& flat) {
    SparseObs s;
    s.dim = static_cast<std::int32_t>(flat.size());
    for (int i = 0; i < flat.size(); ++i) {
      if (flat[i] != 0.0) {
        s.idx.push_back(i);
        s.val.push_back(static_cast<float>(flat[i]));
      }
    }
    return s;
  }

  void write_dense_row(Eigen::Ref<Eigen::MatrixXd> m, int row) const {
    m.row(row).setZero();
    for (std::size_t k = 0; k < idx.size(); ++k) m(row, idx[k]) = val[k];
  }
};

}  // namespace wz
