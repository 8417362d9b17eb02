// AVX2/FMA kernels. This file is the only one compiled with -mavx2 -mfma, so it
// includes nothing beyond the kernel declarations and intrinsics; callers reach
// it through the runtime dispatch table only.
#include <cstddef>

#include "cesynth/simd/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace cesynth::simd::avx2 {
namespace {

struct F32 {
  using scalar = float;
  using reg = __m256;
  static constexpr std::size_t width = 8;
  static reg zero() { return _mm256_setzero_ps(); }
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static reg broadcast(float v) { return _mm256_set1_ps(v); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg fma(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static reg div(reg a, reg b) { return _mm256_div_ps(a, b); }
  static reg sqrt(reg a) { return _mm256_sqrt_ps(a); }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_hadd_ps(lo, lo);
    lo = _mm_hadd_ps(lo, lo);
    return _mm_cvtss_f32(lo);
  }
};

struct F64 {
  using scalar = double;
  using reg = __m256d;
  static constexpr std::size_t width = 4;
  static reg zero() { return _mm256_setzero_pd(); }
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static reg broadcast(double v) { return _mm256_set1_pd(v); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg fma(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static reg div(reg a, reg b) { return _mm256_div_pd(a, b); }
  static reg sqrt(reg a) { return _mm256_sqrt_pd(a); }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
  }
};

template <class T> struct VecOf;
template <> struct VecOf<float> { using type = F32; };
template <> struct VecOf<double> { using type = F64; };

// Register tile: kMr rows x (2 * width) columns held in 12 accumulators.
constexpr std::size_t kMr = 6;
constexpr std::size_t kKc = 256;
constexpr std::size_t kMc = 96;
constexpr std::size_t kNc = 1024;

template <class T>
struct PackBuffers {
  alignas(64) T a[kMc * kKc];
  alignas(64) T b[kNc * kKc];
};

template <class T>
PackBuffers<T>& pack_buffers() {
  static thread_local PackBuffers<T> buffers;
  return buffers;
}

// Packs an mc x kc block of alpha*op(A) into kMr-row slivers, zero padded.
template <class T>
void pack_a(const GemmArgs<T>& g, std::size_t i0, std::size_t mc, std::size_t p0, std::size_t kc, T* dst) {
  for (std::size_t ir = 0; ir < mc; ir += kMr) {
    const std::size_t rows = mc - ir < kMr ? mc - ir : kMr;
    for (std::size_t p = 0; p < kc; ++p) {
      for (std::size_t r = 0; r < kMr; ++r) {
        T v{0};
        if (r < rows) {
          const std::size_t i = i0 + ir + r, kk = p0 + p;
          v = g.alpha * (g.trans_a ? g.a[kk * g.lda + i] : g.a[i * g.lda + kk]);
        }
        *dst++ = v;
      }
    }
  }
}

// Packs a kc x nc block of op(B) into nr-column slivers, zero padded.
template <class T, std::size_t Nr>
void pack_b(const GemmArgs<T>& g, std::size_t p0, std::size_t kc, std::size_t j0, std::size_t nc, T* dst) {
  for (std::size_t jr = 0; jr < nc; jr += Nr) {
    const std::size_t cols = nc - jr < Nr ? nc - jr : Nr;
    for (std::size_t p = 0; p < kc; ++p) {
      const std::size_t kk = p0 + p;
      if (!g.trans_b && cols == Nr) {
        const T* src = g.b + kk * g.ldb + j0 + jr;
        for (std::size_t c = 0; c < Nr; ++c) dst[c] = src[c];
      } else {
        for (std::size_t c = 0; c < Nr; ++c) {
          T v{0};
          if (c < cols) {
            const std::size_t j = j0 + jr + c;
            v = g.trans_b ? g.b[j * g.ldb + kk] : g.b[kk * g.ldb + j];
          }
          dst[c] = v;
        }
      }
      dst += Nr;
    }
  }
}

template <class V>
void micro_kernel(std::size_t kc, const typename V::scalar* a, const typename V::scalar* b,
                  typename V::scalar* c, std::size_t ldc, std::size_t rows, std::size_t cols) {
  using T = typename V::scalar;
  constexpr std::size_t w = V::width;
  constexpr std::size_t nr = 2 * w;
  typename V::reg acc[kMr][2];
  for (std::size_t r = 0; r < kMr; ++r) acc[r][0] = acc[r][1] = V::zero();

  for (std::size_t p = 0; p < kc; ++p) {
    const auto b0 = V::load(b);
    const auto b1 = V::load(b + w);
    for (std::size_t r = 0; r < kMr; ++r) {
      const auto av = V::broadcast(a[r]);
      acc[r][0] = V::fma(av, b0, acc[r][0]);
      acc[r][1] = V::fma(av, b1, acc[r][1]);
    }
    a += kMr;
    b += nr;
  }

  if (rows == kMr && cols == nr) {
    for (std::size_t r = 0; r < kMr; ++r) {
      T* crow = c + r * ldc;
      V::store(crow, V::add(V::load(crow), acc[r][0]));
      V::store(crow + w, V::add(V::load(crow + w), acc[r][1]));
    }
    return;
  }
  alignas(64) T tile[kMr * nr];
  for (std::size_t r = 0; r < kMr; ++r) {
    V::store(tile + r * nr, acc[r][0]);
    V::store(tile + r * nr + w, acc[r][1]);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t cc = 0; cc < cols; ++cc) c[r * ldc + cc] += tile[r * nr + cc];
  }
}

template <class T>
void gemm_impl(const GemmArgs<T>& g) {
  using V = typename VecOf<T>::type;
  constexpr std::size_t nr = 2 * V::width;

  for (std::size_t i = 0; i < g.m; ++i) {
    T* crow = g.c + i * g.ldc;
    if (g.beta == T{0}) {
      for (std::size_t j = 0; j < g.n; ++j) crow[j] = T{0};
    } else if (g.beta != T{1}) {
      for (std::size_t j = 0; j < g.n; ++j) crow[j] *= g.beta;
    }
  }
  if (g.m == 0 || g.n == 0 || g.k == 0 || g.alpha == T{0}) return;

  auto& buf = pack_buffers<T>();
  for (std::size_t j0 = 0; j0 < g.n; j0 += kNc) {
    const std::size_t nc = g.n - j0 < kNc ? g.n - j0 : kNc;
    for (std::size_t p0 = 0; p0 < g.k; p0 += kKc) {
      const std::size_t kc = g.k - p0 < kKc ? g.k - p0 : kKc;
      pack_b<T, nr>(g, p0, kc, j0, nc, buf.b);
      for (std::size_t i0 = 0; i0 < g.m; i0 += kMc) {
        const std::size_t mc = g.m - i0 < kMc ? g.m - i0 : kMc;
        pack_a<T>(g, i0, mc, p0, kc, buf.a);
        for (std::size_t jr = 0; jr < nc; jr += nr) {
          const std::size_t cols = nc - jr < nr ? nc - jr : nr;
          const T* bp = buf.b + jr * kc;
          for (std::size_t ir = 0; ir < mc; ir += kMr) {
            const std::size_t rows = mc - ir < kMr ? mc - ir : kMr;
            const T* ap = buf.a + ir * kc;
            micro_kernel<V>(kc, ap, bp, g.c + (i0 + ir) * g.ldc + j0 + jr, g.ldc, rows, cols);
          }
        }
      }
    }
  }
}

}  // namespace

template <class T>
void gemm(const GemmArgs<T>& args) {
  gemm_impl<T>(args);
}

template <class T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  using V = typename VecOf<T>::type;
  const auto av = V::broadcast(alpha);
  std::size_t i = 0;
  for (; i + V::width <= n; i += V::width) V::store(y + i, V::fma(av, V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
T dot(std::size_t n, const T* x, const T* y) {
  using V = typename VecOf<T>::type;
  auto acc0 = V::zero(), acc1 = V::zero();
  std::size_t i = 0;
  for (; i + 2 * V::width <= n; i += 2 * V::width) {
    acc0 = V::fma(V::load(x + i), V::load(y + i), acc0);
    acc1 = V::fma(V::load(x + i + V::width), V::load(y + i + V::width), acc1);
  }
  T acc = V::hsum(V::add(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

// Same operation order as the scalar kernel and no fused multiply-adds, so
// results are bit-identical to it.
template <class T>
void adam(const AdamArgs<T>& a) {
  using V = typename VecOf<T>::type;
  const auto b1 = V::broadcast(a.beta1), b2 = V::broadcast(a.beta2);
  const auto ob1 = V::broadcast(T{1} - a.beta1), ob2 = V::broadcast(T{1} - a.beta2);
  const auto bc1 = V::broadcast(a.bias_correction1), bc2 = V::broadcast(a.bias_correction2);
  const auto lr = V::broadcast(a.lr), eps = V::broadcast(a.eps);
  std::size_t i = 0;
  for (; i + V::width <= a.n; i += V::width) {
    const auto g = V::load(a.grad + i);
    const auto m = V::add(V::mul(b1, V::load(a.m + i)), V::mul(ob1, g));
    const auto v = V::add(V::mul(b2, V::load(a.v + i)), V::mul(ob2, V::mul(g, g)));
    V::store(a.m + i, m);
    V::store(a.v + i, v);
    const auto mhat = V::div(m, bc1);
    const auto vhat = V::div(v, bc2);
    const auto step = V::div(V::mul(lr, mhat), V::add(V::sqrt(vhat), eps));
    V::store(a.param + i, V::sub(V::load(a.param + i), step));
  }
  if (i < a.n) {
    AdamArgs<T> tail = a;
    tail.n = a.n - i;
    tail.param += i;
    tail.grad += i;
    tail.m += i;
    tail.v += i;
    scalar::adam<T>(tail);
  }
}

template void gemm<float>(const GemmArgs<float>&);
template void gemm<double>(const GemmArgs<double>&);
template void axpy<float>(std::size_t, float, const float*, float*);
template void axpy<double>(std::size_t, double, const double*, double*);
template float dot<float>(std::size_t, const float*, const float*);
template double dot<double>(std::size_t, const double*, const double*);
template void adam<float>(const AdamArgs<float>&);
template void adam<double>(const AdamArgs<double>&);

}  // namespace cesynth::simd::avx2
#endif
