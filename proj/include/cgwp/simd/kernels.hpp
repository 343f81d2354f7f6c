#pragma once

#include <complex>
#include <cstddef>

namespace cgwp::simd {

using cplx = std::complex<double>;

/// Elementwise grid kernels. Every entry has a portable scalar version and,
/// where the CPU allows it, an AVX2/FMA version with identical semantics.
struct KernelTable {
  const char* name;
  /// a[i] *= b[i]
  void (*cmul_inplace)(cplx* a, const cplx* b, std::size_t n);
  /// a[i] *= s
  void (*scale_inplace)(cplx* a, double s, std::size_t n);
  /// sum_i conj(a[i]) b[i]
  cplx (*cdot)(const cplx* a, const cplx* b, std::size_t n);
  /// sum_i |a[i]|^2
  double (*norm2)(const cplx* a, std::size_t n);
  /// sum_i w[i] |a[i]|^2
  double (*weighted_norm2)(const cplx* a, const double* w, std::size_t n);
};

const KernelTable& scalar_kernels();
/// nullptr when the build or the CPU lacks AVX2 and FMA.
const KernelTable* avx2_kernels();

/// The table used by the library: AVX2 when available unless the
/// environment variable CGWP_SIMD=scalar forces the portable path.
const KernelTable& active_kernels();

}  // namespace cgwp::simd
