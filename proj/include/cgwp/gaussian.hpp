#pragma once

#include <cstddef>
#include <vector>

#include "cgwp/types.hpp"

namespace cgwp {

/// One Gaussian wave packet
///   g(x) = exp(i[(x-q) A (x-q) + p.(x-q) + gamma])
/// with complex symmetric width matrix A, real momentum p and center q and
/// complex phase/normalization gamma. The amplitude scales as exp(-Im gamma).
///
/// Construction validates the invariants (symmetry, positive definite Im A,
/// finite entries) and throws InvalidParameters otherwise.
class GaussianParams {
 public:
  GaussianParams(CMat A, RVec p, RVec q, cplx gamma);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(p_.size()); }
  const CMat& A() const noexcept { return A_; }
  const RVec& p() const noexcept { return p_; }
  const RVec& q() const noexcept { return q_; }
  cplx gamma() const noexcept { return gamma_; }

  /// g(x).
  cplx operator()(const RVec& x) const;

  /// Width matrix with Im A and Re A split out, convenient for real-form maps.
  RMat A_real() const { return A_.real(); }
  RMat A_imag() const { return A_.imag(); }

 private:
  CMat A_;
  RVec p_, q_;
  cplx gamma_;
};

/// Same as `g(x)`.
cplx evaluate(const GaussianParams& g, const RVec& x);

/// Returns (A + A^T) / 2.
CMat symmetrized(const CMat& A);

/// Superposition chi(x) = sum_k g^k(x) of N >= 1 packets of one dimension.
class WavePacket {
 public:
  explicit WavePacket(std::vector<GaussianParams> gwps);

  std::size_t size() const noexcept { return gwps_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const GaussianParams& operator[](std::size_t k) const { return gwps_[k]; }
  const std::vector<GaussianParams>& gwps() const noexcept { return gwps_; }
  auto begin() const noexcept { return gwps_.begin(); }
  auto end() const noexcept { return gwps_.end(); }

  cplx operator()(const RVec& x) const;

 private:
  std::vector<GaussianParams> gwps_;
  std::size_t dim_;
};

/// ||chi|| computed from analytic pair overlaps.
double norm(const WavePacket& wp);

/// Factorization A = 1/2 B C^{-1} of one packet's width matrix. Integrating
/// (B, C) instead of A avoids the stiff quadratic A^2 term.
struct WidthFactors {
  CMat B;
  CMat C;

  /// C = identity, B = 2A.
  static WidthFactors from_width(const CMat& A);

  /// 1/2 B C^{-1}; throws InvalidParameters when C is numerically singular
  /// (condition estimate above `cond_max`).
  CMat width(double cond_max = 1e12) const;
};

}  // namespace cgwp
