#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace cpml {

// Counter-based generator (Philox4x32-10). A (seed, stream) pair names an
// independent sequence, so per-round and per-column streams can be derived
// without sharing state between threads.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        counter_{0, 0, static_cast<std::uint32_t>(stream),
                 static_cast<std::uint32_t>(stream >> 32)} {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    if (buffered_ == 0) refill();
    buffered_ -= 2;
    return (static_cast<std::uint64_t>(block_[buffered_ + 1]) << 32) | block_[buffered_];
  }

  // A sibling generator on a different stream; does not advance this one.
  [[nodiscard]] Rng derive(std::uint64_t stream) const noexcept {
    std::uint64_t seed = (static_cast<std::uint64_t>(key_[1]) << 32) | key_[0];
    std::uint64_t base = (static_cast<std::uint64_t>(counter_[3]) << 32) | counter_[2];
    return Rng(seed, mix(base ^ mix(stream + 0x9E3779B97F4A7C15ULL)));
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound), bound > 0, by rejection (no modulo bias).
  std::uint64_t uniform_below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t x;
    do {
      x = (*this)();
    } while (x >= limit);
    return x % bound;
  }

  double normal() noexcept;

 private:
  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  void refill() noexcept;

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int buffered_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace cpml
