#include <doctest.h>

#include <cstdlib>

#include "murmur/random.hpp"
#include "murmur/simd/kernels.hpp"
#include "murmur/simd/reference.hpp"

using namespace murmur;

namespace {

std::vector<float> randv(std::size_t n, Rng& rng) {
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(gaussian(rng));
  return v;
}

void check_close(const std::vector<float>& a, const std::vector<float>& b, std::size_t k) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(std::fabs(a[i] - b[i]) <= 1e-5f * static_cast<float>(k) * (1.0f + std::fabs(b[i])));
}

}  // namespace

TEST_CASE("scalar table matches the templated reference") {
  Rng rng(1);
  const auto& s = simd::scalar_kernels();
  CHECK(s.isa == simd::Isa::Scalar);
  const std::size_t m = 5, n = 7, k = 9;
  const auto a = randv(m * k, rng), b = randv(k * n, rng), bt = randv(n * k, rng);
  std::vector<float> c1(m * n, 1.0f), c2(m * n, 1.0f);
  s.gemm_nn(m, n, k, a.data(), k, b.data(), n, c1.data(), n);
  simd::ref::gemm_nn<float>(m, n, k, a.data(), k, b.data(), n, c2.data(), n);
  CHECK(c1 == c2);
}

TEST_CASE("AVX2 kernels agree with the scalar reference") {
  const auto* avx = simd::avx2_kernels();
  if (!avx) {
    MESSAGE("AVX2 not available on this machine; equivalence skipped");
    return;
  }
  const auto& s = simd::scalar_kernels();
  Rng rng(2);
  // Odd sizes exercise the masked tails and the register-block edges.
  for (std::size_t m : {1u, 3u, 4u, 7u, 17u})
    for (std::size_t n : {1u, 8u, 15u, 16u, 33u, 100u})
      for (std::size_t k : {1u, 9u, 31u, 144u}) {
        const std::size_t lda = k + 3, ldb = n + 5, ldc = n + 1;
        const auto a = randv(m * lda, rng), b = randv(k * ldb, rng), bt = randv(n * (k + 2), rng);
        const auto c0 = randv(m * ldc, rng);
        auto c1 = c0, c2 = c0;
        s.gemm_nn(m, n, k, a.data(), lda, b.data(), ldb, c1.data(), ldc);
        avx->gemm_nn(m, n, k, a.data(), lda, b.data(), ldb, c2.data(), ldc);
        check_close(c2, c1, k);
        c1 = c0;
        c2 = c0;
        s.gemm_nt(m, n, k, a.data(), lda, bt.data(), k + 2, c1.data(), ldc);
        avx->gemm_nt(m, n, k, a.data(), lda, bt.data(), k + 2, c2.data(), ldc);
        check_close(c2, c1, k);
      }

  for (std::size_t len : {0u, 1u, 15u, 16u, 17u, 31u, 32u, 33u, 576u, 4608u}) {
    std::vector<std::int8_t> a(len), b(len);
    for (std::size_t i = 0; i < len; ++i) {
      a[i] = static_cast<std::int8_t>(static_cast<int>(uniform_index(rng, 255)) - 127);
      b[i] = static_cast<std::int8_t>(static_cast<int>(uniform_index(rng, 256)) - 128);
    }
    CHECK(avx->dot_i8(a.data(), b.data(), len) == s.dot_i8(a.data(), b.data(), len));
  }
  // Extremes.
  std::vector<std::int8_t> lo(4608, -128), hi(4608, -127);
  CHECK(avx->dot_i8(hi.data(), lo.data(), lo.size()) == s.dot_i8(hi.data(), lo.data(), lo.size()));
}

TEST_CASE("runtime selection can be forced") {
  simd::set_active(simd::Isa::Scalar);
  CHECK(simd::active().isa == simd::Isa::Scalar);
  if (simd::avx2_kernels()) {
    simd::set_active(simd::Isa::Avx2);
    CHECK(simd::active().isa == simd::Isa::Avx2);
  }
}

#include "murmur/nn/network.hpp"

TEST_CASE("network forward is the same under both kernel tables") {
  if (!simd::avx2_kernels()) return;
  const auto net = nn::Network::build(nn::Variant::Light, 4);
  Rng rng(5);
  nn::Tensor<float> x(2, 1, 33, 124);
  for (auto& v : x.data) v = static_cast<float>(gaussian(rng));
  simd::set_active(simd::Isa::Scalar);
  const auto a = net.predict(x);
  simd::set_active(simd::Isa::Avx2);
  const auto b = net.predict(x);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b.data[i] == doctest::Approx(a.data[i]).epsilon(1e-5));
}
