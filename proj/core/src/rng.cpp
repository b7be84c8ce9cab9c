#include "matchnet/rng.hpp"

namespace matchnet {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed) noexcept
    : key_(mix64(seed + kGolden)), counter_(0) {}

CounterRng CounterRng::split(std::uint64_t stream) const noexcept {
  const std::uint64_t child = mix64(key_ ^ mix64(stream * kGolden + 0x632be59bd9b4e019ULL));
  return CounterRng(child, 0);
}

std::uint64_t CounterRng::next_u64() noexcept {
  const std::uint64_t c = counter_++;
  return mix64(mix64(key_ + c * kGolden) ^ key_);
}

double CounterRng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::uniform_int(std::uint64_t bound) noexcept {
  // Lemire's multiply-and-reject.
  unsigned __int128 product =
      static_cast<unsigned __int128>(next_u64()) * bound;
  auto low = static_cast<std::uint64_t>(product);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      product = static_cast<unsigned __int128>(next_u64()) * bound;
      low = static_cast<std::uint64_t>(product);
    }
  }
  return static_cast<std::uint64_t>(product >> 64);
}

}  // namespace matchnet
