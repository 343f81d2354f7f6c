#include "cgwp/simd/kernels.hpp"

#include <immintrin.h>

namespace cgwp::simd {
namespace {

// Two complex numbers per 256-bit register, laid out (re0, im0, re1, im1).

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

void cmul_inplace(cplx* a, const cplx* b, std::size_t n) {
  auto* pa = reinterpret_cast<double*>(a);
  const auto* pb = reinterpret_cast<const double*>(b);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d x = _mm256_loadu_pd(pa + 2 * i);
    const __m256d y = _mm256_loadu_pd(pb + 2 * i);
    const __m256d yr = _mm256_movedup_pd(y);         // (br, br)
    const __m256d yi = _mm256_permute_pd(y, 0b1111);  // (bi, bi)
    const __m256d xs = _mm256_permute_pd(x, 0b0101);  // (ai, ar)
    // (ar br - ai bi, ai br + ar bi)
    _mm256_storeu_pd(pa + 2 * i, _mm256_fmaddsub_pd(x, yr, _mm256_mul_pd(xs, yi)));
  }
  for (; i < n; ++i) {
    const double re = a[i].real() * b[i].real() - a[i].imag() * b[i].imag();
    const double im = a[i].real() * b[i].imag() + a[i].imag() * b[i].real();
    a[i] = {re, im};
  }
}

void scale_inplace(cplx* a, double s, std::size_t n) {
  auto* pa = reinterpret_cast<double*>(a);
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) _mm256_storeu_pd(pa + 2 * i, _mm256_mul_pd(_mm256_loadu_pd(pa + 2 * i), vs));
  for (; i < n; ++i) a[i] *= s;
}

cplx cdot(const cplx* a, const cplx* b, std::size_t n) {
  const auto* pa = reinterpret_cast<const double*>(a);
  const auto* pb = reinterpret_cast<const double*>(b);
  __m256d acc_re = _mm256_setzero_pd();  // ar br, ai bi
  __m256d acc_im = _mm256_setzero_pd();  // ar bi, ai br
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d x = _mm256_loadu_pd(pa + 2 * i);
    const __m256d y = _mm256_loadu_pd(pb + 2 * i);
    acc_re = _mm256_fmadd_pd(x, y, acc_re);
    acc_im = _mm256_fmadd_pd(x, _mm256_permute_pd(y, 0b0101), acc_im);
  }
  double re = hsum(acc_re);
  // acc_im lanes hold (ar bi, ai br): imaginary part is ar bi - ai br.
  alignas(32) double t[4];
  _mm256_store_pd(t, acc_im);
  double im = (t[0] - t[1]) + (t[2] - t[3]);
  for (; i < n; ++i) {
    re += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
    im += a[i].real() * b[i].imag() - a[i].imag() * b[i].real();
  }
  return {re, im};
}

double norm2(const cplx* a, std::size_t n) {
  const auto* pa = reinterpret_cast<const double*>(a);
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x0 = _mm256_loadu_pd(pa + 2 * i);
    const __m256d x1 = _mm256_loadu_pd(pa + 2 * i + 4);
    acc0 = _mm256_fmadd_pd(x0, x0, acc0);
    acc1 = _mm256_fmadd_pd(x1, x1, acc1);
  }
  for (; i + 2 <= n; i += 2) {
    const __m256d x = _mm256_loadu_pd(pa + 2 * i);
    acc0 = _mm256_fmadd_pd(x, x, acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += std::norm(a[i]);
  return s;
}

double weighted_norm2(const cplx* a, const double* w, std::size_t n) {
  const auto* pa = reinterpret_cast<const double*>(a);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d x = _mm256_loadu_pd(pa + 2 * i);
    // (w0, w0, w1, w1)
    const __m128d w01 = _mm_loadu_pd(w + i);
    const __m256d ww = _mm256_permute4x64_pd(_mm256_castpd128_pd256(w01), 0b01010000);
    acc = _mm256_fmadd_pd(_mm256_mul_pd(x, x), ww, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += w[i] * std::norm(a[i]);
  return s;
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{"avx2", cmul_inplace, scale_inplace, cdot, norm2, weighted_norm2};
  return table;
}

}  // namespace cgwp::simd
