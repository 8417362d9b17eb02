#include <gtest/gtest.h>

#include <cstring>

#include "cesynth/simd/cpu.hpp"
#include "cesynth/simd/kernels.hpp"
#include "test_util.hpp"

using namespace cesynth;
using cesynth::testing::random_tensor;

namespace {

template <class T>
void naive_gemm(const simd::GemmArgs<T>& g) {
  for (std::size_t i = 0; i < g.m; ++i) {
    for (std::size_t j = 0; j < g.n; ++j) {
      long double acc = 0;
      for (std::size_t p = 0; p < g.k; ++p) {
        const T a = g.trans_a ? g.a[p * g.lda + i] : g.a[i * g.lda + p];
        const T b = g.trans_b ? g.b[j * g.ldb + p] : g.b[p * g.ldb + j];
        acc += static_cast<long double>(a) * b;
      }
      T& c = g.c[i * g.ldc + j];
      c = static_cast<T>(g.alpha * acc + (g.beta == T{0} ? T{0} : g.beta * c));
    }
  }
}

struct GemmCase {
  std::size_t m, n, k;
  bool ta, tb;
  double alpha, beta;
};

const GemmCase kGemmCases[] = {
    {1, 1, 1, false, false, 1.0, 0.0},     {7, 5, 3, false, false, 1.0, 0.0},   {6, 16, 256, false, false, 1.0, 1.0},
    {13, 17, 19, true, false, 0.5, 0.0},   {29, 33, 300, false, true, 1.0, 1.0}, {97, 1030, 40, true, true, -2.0, 0.5},
    {64, 288, 1024, false, false, 1.0, 0.0}, {5, 3, 0, false, false, 1.0, 1.0},
};

template <class T>
void check_gemm(simd::Isa isa, double tol) {
  Rng rng(11);
  for (const auto& gc : kGemmCases) {
    auto a = random_tensor<T>({gc.m * gc.k + 1}, rng);
    auto b = random_tensor<T>({gc.k * gc.n + 1}, rng);
    auto c0 = random_tensor<T>({gc.m * gc.n}, rng);
    auto expect = c0, got = c0;
    simd::GemmArgs<T> args{gc.ta, gc.tb, gc.m, gc.n, gc.k, static_cast<T>(gc.alpha), a.data(), gc.ta ? gc.m : gc.k,
                           b.data(), gc.tb ? gc.k : gc.n, static_cast<T>(gc.beta), expect.data(), gc.n};
    naive_gemm(args);
    args.c = got.data();
    simd::kernels_for<T>(isa).gemm(args);
    for (std::size_t i = 0; i < expect.size(); ++i) {
      ASSERT_NEAR(got[i], expect[i], tol * (1.0 + std::sqrt(static_cast<double>(gc.k))))
          << simd::isa_name(isa) << " m=" << gc.m << " n=" << gc.n << " k=" << gc.k << " at " << i;
    }
  }
}

}  // namespace

TEST(Gemm, ScalarMatchesNaiveFloat) { check_gemm<float>(simd::Isa::kScalar, 1e-5); }
TEST(Gemm, ScalarMatchesNaiveDouble) { check_gemm<double>(simd::Isa::kScalar, 1e-12); }

TEST(Gemm, Avx2MatchesNaive) {
  if (!simd::isa_supported(simd::Isa::kAvx2)) GTEST_SKIP() << "no AVX2 on this CPU";
  check_gemm<float>(simd::Isa::kAvx2, 1e-5);
  check_gemm<double>(simd::Isa::kAvx2, 1e-12);
}

TEST(Gemm, BetaZeroIgnoresNanInOutput) {
  for (auto isa : {simd::Isa::kScalar, simd::Isa::kAvx2}) {
    if (!simd::isa_supported(isa)) continue;
    std::vector<float> a(4, 1.0f), b(4, 1.0f), c(4, std::numeric_limits<float>::quiet_NaN());
    simd::kernels_for<float>(isa).gemm({false, false, 2, 2, 2, 1.0f, a.data(), 2, b.data(), 2, 0.0f, c.data(), 2});
    for (float v : c) EXPECT_EQ(v, 2.0f) << simd::isa_name(isa);
  }
}

TEST(Axpy, VariantsAgree) {
  if (!simd::isa_supported(simd::Isa::kAvx2)) GTEST_SKIP();
  Rng rng(3);
  for (std::size_t n : {0, 1, 7, 8, 9, 31, 1000}) {
    auto x = random_tensor<float>({n + 1}, rng);
    auto y = random_tensor<float>({n + 1}, rng);
    auto y2 = y;
    simd::kernels_for<float>(simd::Isa::kScalar).axpy(n, 0.75f, x.data(), y.data());
    simd::kernels_for<float>(simd::Isa::kAvx2).axpy(n, 0.75f, x.data(), y2.data());
    for (std::size_t i = 0; i <= n; ++i) EXPECT_NEAR(y[i], y2[i], 1e-6f);
  }
}

TEST(Dot, VariantsAgree) {
  if (!simd::isa_supported(simd::Isa::kAvx2)) GTEST_SKIP();
  Rng rng(4);
  for (std::size_t n : {0, 1, 5, 16, 17, 1001}) {
    auto x = random_tensor<double>({n + 1}, rng);
    auto y = random_tensor<double>({n + 1}, rng);
    long double ref = 0;
    for (std::size_t i = 0; i < n; ++i) ref += static_cast<long double>(x[i]) * y[i];
    EXPECT_NEAR(simd::kernels_for<double>(simd::Isa::kScalar).dot(n, x.data(), y.data()), static_cast<double>(ref), 1e-12);
    EXPECT_NEAR(simd::kernels_for<double>(simd::Isa::kAvx2).dot(n, x.data(), y.data()), static_cast<double>(ref), 1e-12);
  }
}

TEST(Adam, Avx2IsBitIdenticalToScalar) {
  if (!simd::isa_supported(simd::Isa::kAvx2)) GTEST_SKIP();
  Rng rng(5);
  const std::size_t n = 1037;
  auto p1 = random_tensor<float>({n}, rng);
  auto m1 = random_tensor<float>({n}, rng, 0.0, 0.1);
  auto v1 = random_tensor<float>({n}, rng, 0.0, 0.01);
  auto p2 = p1, m2 = m1, v2 = v1;
  for (int step = 1; step <= 5; ++step) {
    auto g = random_tensor<float>({n}, rng);
    const float bc1 = 1.0f - std::pow(0.5f, static_cast<float>(step));
    const float bc2 = 1.0f - std::pow(0.999f, static_cast<float>(step));
    simd::kernels_for<float>(simd::Isa::kScalar).adam({n, p1.data(), g.data(), m1.data(), v1.data(), 1e-3f, 0.5f, 0.999f, 1e-8f, bc1, bc2});
    simd::kernels_for<float>(simd::Isa::kAvx2).adam({n, p2.data(), g.data(), m2.data(), v2.data(), 1e-3f, 0.5f, 0.999f, 1e-8f, bc1, bc2});
  }
  EXPECT_EQ(std::memcmp(p1.data(), p2.data(), n * sizeof(float)), 0);
  EXPECT_EQ(std::memcmp(m1.data(), m2.data(), n * sizeof(float)), 0);
  EXPECT_EQ(std::memcmp(v1.data(), v2.data(), n * sizeof(float)), 0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // With zero moments, the bias-corrected first step is lr * g / (|g| + eps).
  std::vector<float> p{1.0f, -2.0f}, g{0.5f, -3.0f}, m(2, 0.0f), v(2, 0.0f);
  simd::kernels_for<float>(simd::Isa::kScalar).adam({2, p.data(), g.data(), m.data(), v.data(), 0.01f, 0.5f, 0.999f, 0.0f, 0.5f, 0.001f});
  EXPECT_NEAR(p[0], 0.99f, 1e-6);
  EXPECT_NEAR(p[1], -1.99f, 1e-6);
}

TEST(Dispatch, ForceIsaSwitchesActiveTable) {
  const auto before = simd::active_isa();
  simd::force_isa(simd::Isa::kScalar);
  EXPECT_EQ(simd::active_isa(), simd::Isa::kScalar);
  EXPECT_EQ(&simd::kernels<float>(), &simd::kernels_for<float>(simd::Isa::kScalar));
  simd::force_isa(before);
  EXPECT_EQ(simd::active_isa(), before);
}
