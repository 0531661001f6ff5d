#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wz {

// Minimal raster canvas written as binary PPM (P6); convertible to PNG with
// any image tool.
class PpmImage {
 public:
  PpmImage(int width, int height, std::uint8_t r = 255, std::uint8_t g = 255, std::uint8_t b = 255)
      : w_(width), h_(height), data_(static_cast<std::size_t>(width) * height * 3) {
    for (std::size_t i = 0; i < data_.size(); i += 3) {
      data_[i] = r;
      data_[i + 1] = g;
      data_[i + 2] = b;
    }
  }

  int width() const { return w_; }
  int height() const { return h_; }

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || x >= w_ || y < 0 || y >= h_) return;
    std::size_t i = (static_cast<std::size_t>(y) * w_ + x) * 3;
    data_[i] = r;
    data_[i + 1] = g;
    data_[i + 2] = b;
  }

  void line(int x0, int y0, int x1, int y1, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
      set(x0, y0, r, g, b);
      if (x0 == x1 && y0 == y1) break;
      int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write image: " + path);
    out << "P6\n" << w_ << ' ' << h_ << "\n255\n";
    out.write(reinterpret_cast<const char*>(data_.data()),
              static_cast<std::streamsize>(data_.size()));
  }

 private:
  int w_, h_;
  std::vector<std::uint8_t> data_;
};

// blue (low) -> green -> red (high)
inline void heat_color(double t, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b) {
  t = std::clamp(t, 0.0, 1.0);
  if (t < 0.5) {
    double u = t / 0.5;
    r = 0;
    g = static_cast<std::uint8_t>(255 * u);
    b = static_cast<std::uint8_t>(255 * (1.0 - u));
  } else {
    double u = (t - 0.5) / 0.5;
    r = static_cast<std::uint8_t>(255 * u);
    g = static_cast<std::uint8_t>(255 * (1.0 - u));
    b = 0;
  }
}

}  // namespace wz
