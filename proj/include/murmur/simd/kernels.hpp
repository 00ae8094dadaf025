#pragma once

// Data-parallel inner loops of the network engine. Each kernel has a scalar
// reference implementation and, where the CPU supports it, an AVX2+FMA variant
// selected once at runtime. The variants are equivalence-tested against the
// scalar reference.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace murmur::simd {

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);

// Row-major, leading dimensions in elements. All kernels accumulate into C.
//   gemm_nn: C[m x n] += A[m x k] * B[k x n]
//   gemm_nt: C[m x n] += A[m x k] * B[n x k]^T
using GemmFn = void (*)(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                        const float* b, std::size_t ldb, float* c, std::size_t ldc);
using DotI8Fn = std::int32_t (*)(const std::int8_t* a, const std::int8_t* b, std::size_t n);

struct KernelTable {
  Isa isa;
  GemmFn gemm_nn;
  GemmFn gemm_nt;
  DotI8Fn dot_i8;
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks the features.
const KernelTable* avx2_kernels();

// Best available table. MURMUR_SIMD=scalar in the environment forces the
// scalar reference.
const KernelTable& active();

// Overrides the selection for the current process (tests, benchmarks).
void set_active(Isa isa);

}  // namespace murmur::simd
