#include <atomic>
#include <cstdlib>
#include <string_view>

#include "murmur/simd/kernels.hpp"

namespace murmur::simd {

#ifndef MURMUR_HAVE_AVX2
const KernelTable* avx2_kernels() { return nullptr; }
#endif

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
  }
  return "scalar";
}

namespace {

const KernelTable* detect() {
  if (const char* env = std::getenv("MURMUR_SIMD"); env && std::string_view(env) == "scalar")
    return &scalar_kernels();
  if (const auto* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> table{detect()};
  return table;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

void set_active(Isa isa) {
  const KernelTable* t = &scalar_kernels();
  if (isa == Isa::Avx2 && avx2_kernels()) t = avx2_kernels();
  slot().store(t, std::memory_order_release);
}

}  // namespace murmur::simd
