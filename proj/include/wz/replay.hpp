#pragma once

#include <cstddef>
#include <random>
#include <stdexcept>
#include <unordered_set>
#include <vector>

namespace wz {

// Fixed-capacity ring with FIFO eviction and uniform without-replacement
// batch sampling.
template <typename T>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
    data_.reserve(capacity);
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }

  void push(T t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  const T& at(std::size_t i) const { return data_[i]; }

  // oldest element currently stored (the next eviction victim when full)
  const T& oldest() const { return data_[data_.size() < capacity_ ? 0 : head_]; }

  // n distinct uniform indices (Floyd's sampling)
  std::vector<std::size_t> sample_indices(std::size_t n, std::mt19937_64& rng) const {
    if (n > data_.size())
      throw std::out_of_range("replay buffer: batch larger than stored transitions");
    std::unordered_set<std::size_t> chosen;
    std::vector<std::size_t> out;
    out.reserve(n);
    for (std::size_t j = data_.size() - n; j < data_.size(); ++j) {
      std::uniform_int_distribution<std::size_t> d(0, j);
      std::size_t t = d(rng);
      if (chosen.insert(t).second) {
        out.push_back(t);
      } else {
        chosen.insert(j);
        out.push_back(j);
      }
    }
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next overwrite position once full
  std::vector<T> data_;
};

}  // namespace wz
