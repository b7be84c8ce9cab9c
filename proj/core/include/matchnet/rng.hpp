#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace matchnet {

/// Counter-based random generator.
///
/// Every output is a pure function of (key, counter), so a stream can be
/// re-created from its key alone and streams obtained through split() are
/// independent of how many numbers were drawn from the parent. This keeps
/// minibatches reproducible no matter how profiles are distributed over
/// workers.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed = 0) noexcept;

  /// Child stream identified by `stream`; does not advance this generator.
  CounterRng split(std::uint64_t stream) const noexcept;

  std::uint64_t next_u64() noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;

  /// Uniform integer in [0, bound). `bound` must be positive.
  std::uint64_t uniform_int(std::uint64_t bound) noexcept;

  bool bernoulli(double p) noexcept { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> values) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  CounterRng(std::uint64_t key, std::uint64_t counter) noexcept
      : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace matchnet
