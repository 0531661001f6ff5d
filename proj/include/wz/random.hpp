#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace wz {

// Named random streams derived from one base seed. Every consumer of
// randomness (arrivals per lane, vehicle class, policy noise, ...) draws
// from its own stream so that adding a consumer never perturbs the others.
class SeedStreams {
 public:
  explicit SeedStreams(std::uint64_t base_seed) : base_(base_seed) {}

  std::uint64_t base_seed() const { return base_; }

  std::mt19937_64 stream(std::string_view name) const {
    return std::mt19937_64(splitmix(base_ ^ fnv1a(name)));
  }

  // Stable sub-seed, e.g. for per-restart simulation seeds.
  std::uint64_t derive(std::string_view name, std::uint64_t index = 0) const {
    return splitmix(base_ ^ fnv1a(name) ^ splitmix(index + 0x9e3779b97f4a7c15ull));
  }

 private:
  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::uint64_t base_;
};

}  // namespace wz
