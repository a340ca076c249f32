// AVX2 variants of the kernel set. Compiled with -mavx2 on x86_64 only;
// selection happens at runtime via cpuid, so the binary stays runnable on
// older cores. Every routine is bit-exact with the scalar reference: the
// popcounts are integer, and the uniform conversion only uses operations
// that are exact for integers below 2^53.

#include <bit>
#include <immintrin.h>

#include "stereobox/kernels.hpp"
#include "stereobox/rng.hpp"

namespace stereobox::kernels {
namespace {

inline std::uint64_t hsum_epi64(__m256i v) {
  __m128i lo = _mm256_castsi256_si128(v);
  __m128i hi = _mm256_extracti128_si256(v, 1);
  __m128i s = _mm_add_epi64(lo, hi);
  return static_cast<std::uint64_t>(_mm_extract_epi64(s, 0)) +
         static_cast<std::uint64_t>(_mm_extract_epi64(s, 1));
}

// Nibble-LUT popcount (Mula); returns per-64-bit-lane byte sums.
inline __m256i popcount_bytes(__m256i v) {
  const __m256i lookup =
      _mm256_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4,
                       0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4);
  const __m256i low_mask = _mm256_set1_epi8(0x0f);
  __m256i lo = _mm256_and_si256(v, low_mask);
  __m256i hi = _mm256_and_si256(_mm256_srli_epi16(v, 4), low_mask);
  __m256i cnt = _mm256_add_epi8(_mm256_shuffle_epi8(lookup, lo),
                                _mm256_shuffle_epi8(lookup, hi));
  return _mm256_sad_epu8(cnt, _mm256_setzero_si256());
}

std::uint64_t popcount_avx2(const std::uint64_t* a, std::size_t n) {
  __m256i acc = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    acc = _mm256_add_epi64(acc, popcount_bytes(v));
  }
  std::uint64_t total = hsum_epi64(acc);
  for (; i < n; ++i) total += std::popcount(a[i]);
  return total;
}

std::uint64_t popcount_and_avx2(const std::uint64_t* a, const std::uint64_t* b,
                                std::size_t n) {
  __m256i acc = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    acc = _mm256_add_epi64(acc, popcount_bytes(_mm256_and_si256(va, vb)));
  }
  std::uint64_t total = hsum_epi64(acc);
  for (; i < n; ++i) total += std::popcount(a[i] & b[i]);
  return total;
}

std::uint64_t popcount_or_avx2(const std::uint64_t* a, const std::uint64_t* b,
                               std::size_t n) {
  __m256i acc = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    acc = _mm256_add_epi64(acc, popcount_bytes(_mm256_or_si256(va, vb)));
  }
  std::uint64_t total = hsum_epi64(acc);
  for (; i < n; ++i) total += std::popcount(a[i] | b[i]);
  return total;
}

// 64x64 -> low 64 multiply per lane (AVX2 has no epi64 mullo).
inline __m256i mullo_epi64(__m256i a, __m256i b) {
  __m256i lo = _mm256_mul_epu32(a, b);
  __m256i a_hi = _mm256_srli_epi64(a, 32);
  __m256i b_hi = _mm256_srli_epi64(b, 32);
  __m256i cross =
      _mm256_add_epi64(_mm256_mul_epu32(a_hi, b), _mm256_mul_epu32(a, b_hi));
  return _mm256_add_epi64(lo, _mm256_slli_epi64(cross, 32));
}

inline __m256i mix64_avx2(__m256i z) {
  z = _mm256_xor_si256(z, _mm256_srli_epi64(z, 30));
  z = mullo_epi64(z, _mm256_set1_epi64x(0xBF58476D1CE4E5B9ull));
  z = _mm256_xor_si256(z, _mm256_srli_epi64(z, 27));
  z = mullo_epi64(z, _mm256_set1_epi64x(0x94D049BB133111EBull));
  z = _mm256_xor_si256(z, _mm256_srli_epi64(z, 31));
  return z;
}

// (z >> 11) * 2^-53, exactly as the scalar reference computes it. The 53-bit
// integer is split into 21+32 bit halves; each converts exactly through the
// 2^52 magic-number trick, and the recombination stays below 2^53.
inline __m256d to_unit_double_avx2(__m256i z) {
  const __m256i magic = _mm256_set1_epi64x(0x4330000000000000ull);
  const __m256d magic_d = _mm256_castsi256_pd(magic);
  __m256i a = _mm256_srli_epi64(z, 11);
  __m256i hi = _mm256_srli_epi64(a, 32);
  __m256i lo = _mm256_and_si256(a, _mm256_set1_epi64x(0xFFFFFFFFull));
  __m256d hi_d = _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(hi, magic)),
                               magic_d);
  __m256d lo_d = _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(lo, magic)),
                               magic_d);
  __m256d value = _mm256_add_pd(
      _mm256_mul_pd(hi_d, _mm256_set1_pd(4294967296.0)), lo_d);
  return _mm256_mul_pd(value, _mm256_set1_pd(0x1.0p-53));
}

void uniform_batch_avx2(std::uint64_t seed, std::uint64_t first_index,
                        std::size_t count, std::size_t k, double* out) {
  const __m256i gamma = _mm256_set1_epi64x(static_cast<long long>(rng::kGamma));
  const __m256i idx_salt =
      _mm256_set1_epi64x(static_cast<long long>(0xD1B54A32D192ED03ull));
  const __m256i seed_v = _mm256_set1_epi64x(static_cast<long long>(seed));

  std::size_t i = 0;
  for (; i + 4 <= count; i += 4) {
    __m256i idx = _mm256_setr_epi64x(
        static_cast<long long>(first_index + i),
        static_cast<long long>(first_index + i + 1),
        static_cast<long long>(first_index + i + 2),
        static_cast<long long>(first_index + i + 3));
    __m256i state = mix64_avx2(_mm256_add_epi64(
        seed_v, mullo_epi64(gamma, _mm256_xor_si256(idx, idx_salt))));
    alignas(32) double lane[4];
    for (std::size_t j = 0; j < k; ++j) {
      state = _mm256_add_epi64(state, gamma);
      _mm256_store_pd(lane, to_unit_double_avx2(mix64_avx2(state)));
      out[(i + 0) * k + j] = lane[0];
      out[(i + 1) * k + j] = lane[1];
      out[(i + 2) * k + j] = lane[2];
      out[(i + 3) * k + j] = lane[3];
    }
  }
  for (; i < count; ++i) {
    std::uint64_t state = rng::derive_stream(seed, first_index + i);
    for (std::size_t j = 0; j < k; ++j) {
      state += rng::kGamma;
      out[i * k + j] = rng::to_unit_double(rng::mix64(state));
    }
  }
}

}  // namespace

const KernelOps* avx2_ops() {
  if (!__builtin_cpu_supports("avx2")) return nullptr;
  static const KernelOps ops{
      "avx2",
      popcount_avx2,
      popcount_and_avx2,
      popcount_or_avx2,
      uniform_batch_avx2,
  };
  return &ops;
}

}  // namespace stereobox::kernels
