#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace stereobox {

// Portable 64-bit generator (splitmix64). Bit-stable across platforms and
// splittable: derive_stream(seed, index) yields an independent stream per
// index, so batches are order-independent under parallel generation.
namespace rng {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

constexpr std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed + kGamma * (index ^ 0xD1B54A32D192ED03ull));
}

// Maps a u64 to [0,1) with 53 random bits.
constexpr double to_unit_double(std::uint64_t z) {
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix64(state_);
  }

  double next_double() { return to_unit_double(next_u64()); }

  // U[lo, hi)
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Box-Muller; draws two uniforms per call.
  double next_gaussian() {
    const double u1 = next_double();
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace rng
}  // namespace stereobox
