#include "stereobox/kernels.hpp"

namespace stereobox::kernels {

#if !defined(__x86_64__) && !defined(_M_X64)
const KernelOps* avx2_ops() { return nullptr; }
#endif

const KernelOps& active_ops() {
  static const KernelOps& selected = []() -> const KernelOps& {
    if (const KernelOps* simd = avx2_ops()) return *simd;
    return scalar_ops();
  }();
  return selected;
}

}  // namespace stereobox::kernels
