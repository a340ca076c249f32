#pragma once

#include <cstddef>
#include <cstdint>

namespace stereobox::kernels {

// Data-parallel inner loops behind the mask and sampling modules. Each entry
// has a scalar reference implementation and may have SIMD variants; the
// active set is chosen once at startup from CPU features. All variants are
// bit-exact equivalents of the scalar reference (integer ops, and float ops
// restricted to exactly-representable conversions), so results never depend
// on which variant runs.
struct KernelOps {
  const char* name;

  std::uint64_t (*popcount)(const std::uint64_t* a, std::size_t n);
  std::uint64_t (*popcount_and)(const std::uint64_t* a, const std::uint64_t* b,
                                std::size_t n);
  std::uint64_t (*popcount_or)(const std::uint64_t* a, const std::uint64_t* b,
                               std::size_t n);

  // Per-index uniform batch: for i in [0,count), the stream for point
  // (first_index + i) is rng::derive_stream(seed, first_index + i) and
  // out[i*k .. i*k+k-1] are its first k draws in [0,1).
  void (*uniform_batch)(std::uint64_t seed, std::uint64_t first_index,
                        std::size_t count, std::size_t k, double* out);
};

const KernelOps& scalar_ops();

// nullptr when unsupported on this CPU or not compiled for this target.
const KernelOps* avx2_ops();

// Scalar unless AVX2 is available at runtime.
const KernelOps& active_ops();

}  // namespace stereobox::kernels
