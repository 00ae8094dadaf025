#include "murmur/simd/kernels.hpp"
#include "murmur/simd/reference.hpp"

namespace murmur::simd {

const KernelTable& scalar_kernels() {
  static const KernelTable table{Isa::Scalar, &ref::gemm_nn<float>, &ref::gemm_nt<float>, &ref::dot_i8};
  return table;
}

}  // namespace murmur::simd
