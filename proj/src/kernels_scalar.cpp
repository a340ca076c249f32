#include <bit>

#include "stereobox/kernels.hpp"
#include "stereobox/rng.hpp"

namespace stereobox::kernels {
namespace {

std::uint64_t popcount_scalar(const std::uint64_t* a, std::size_t n) {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < n; ++i) total += std::popcount(a[i]);
  return total;
}

std::uint64_t popcount_and_scalar(const std::uint64_t* a,
                                  const std::uint64_t* b, std::size_t n) {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < n; ++i) total += std::popcount(a[i] & b[i]);
  return total;
}

std::uint64_t popcount_or_scalar(const std::uint64_t* a,
                                 const std::uint64_t* b, std::size_t n) {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < n; ++i) total += std::popcount(a[i] | b[i]);
  return total;
}

void uniform_batch_scalar(std::uint64_t seed, std::uint64_t first_index,
                          std::size_t count, std::size_t k, double* out) {
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t state = rng::derive_stream(seed, first_index + i);
    for (std::size_t j = 0; j < k; ++j) {
      state += rng::kGamma;
      out[i * k + j] = rng::to_unit_double(rng::mix64(state));
    }
  }
}

}  // namespace

const KernelOps& scalar_ops() {
  static const KernelOps ops{
      "scalar",
      popcount_scalar,
      popcount_and_scalar,
      popcount_or_scalar,
      uniform_batch_scalar,
  };
  return ops;
}

}  // namespace stereobox::kernels
