#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>

#include "cgwp/gaussian.hpp"
#include "cgwp/polynomial.hpp"
#include "cgwp/types.hpp"

namespace cgwp {

inline constexpr double kDefaultCondMax = 1e12;

/// Coefficients of the quadratic polynomial v0 + v1.x + 1/2 x V2 x attached
/// to one packet in (i d/dt - T) chi = sum_k poly_k(x) g_k(x).
struct PacketCoefficients {
  cplx v0;
  CVec v1;
  CMat V2;  ///< complex symmetric
};

/// Per-packet coefficients. The flat form stores, per packet, the coefficient
/// of each monomial of `quadratic_basis(D)`: v0, v1_i, V2_ii / 2 and
/// V2_ij (i < j).
class CoefficientSet {
 public:
  CoefficientSet() = default;
  explicit CoefficientSet(std::vector<PacketCoefficients> packets) : packets_(std::move(packets)) {}

  static CoefficientSet from_flat(const CVec& flat, std::size_t n_gwp, std::size_t dim);
  /// From the real form (Re v; Im v) of length 2 n_c.
  static CoefficientSet from_real(const RVec& vbar, std::size_t n_gwp, std::size_t dim);

  CVec flat() const;
  RVec real_form() const;

  std::size_t size() const noexcept { return packets_.size(); }
  const PacketCoefficients& operator[](std::size_t k) const { return packets_[k]; }
  PacketCoefficients& operator[](std::size_t k) { return packets_[k]; }

 private:
  std::vector<PacketCoefficients> packets_;
};

/// The variational linear system K v = r. Rows are indexed by
/// (packet l, basis monomial a), columns by (packet k, basis monomial b) with
/// K = <x^a g_l | x^b g_k> and r = <x^a g_l | V | chi>.
struct MomentSystem {
  std::size_t n_gwp = 0;
  std::size_t dim = 0;
  CMat K;
  CVec r;
  /// Im gamma per packet, kept for ill-conditioning diagnostics.
  std::vector<double> gamma_imag;

  std::size_t basis_size() const noexcept { return quadratic_basis_size(dim); }
  std::size_t n_coefficients() const noexcept { return n_gwp * basis_size(); }
  /// Number of real unknowns 2 n_c.
  std::size_t real_size() const noexcept { return 2 * n_coefficients(); }

  /// [[K_r, -K_i], [K_i, K_r]].
  RMat K_bar() const;
  /// (r_r; r_i).
  RVec r_bar() const;
};

MomentSystem assemble_system(const WavePacket& wp, const PolynomialPotential& V);

/// K_bar factored once with a pivoted symmetric factorization. Solves for the
/// unconstrained minimum w = K_bar^{-1} r_bar up front.
/// A real coefficient of v_bar held at a known value.
struct PinnedCoefficient {
  std::size_t index;
  double value;
};

class FactoredSystem {
 public:
  /// Throws IllConditioned when the condition estimate exceeds `cond_max`.
  explicit FactoredSystem(const MomentSystem& sys, double cond_max = kDefaultCondMax);
  /// Eliminates the pinned coefficients and factors the remaining block only,
  /// so the condition check sees just the free directions. Solves return
  /// full-length vectors with zeros in the pinned slots.
  FactoredSystem(const MomentSystem& sys, const std::vector<PinnedCoefficient>& pinned,
                 double cond_max = kDefaultCondMax);

  const MomentSystem& system() const noexcept { return *sys_; }
  double cond_estimate() const noexcept { return cond_; }
  const RVec& unconstrained() const noexcept { return w_; }
  RMat solve(const RMat& rhs) const;
  RVec solve(const RVec& rhs) const { return solve(RMat(rhs)).col(0); }
  std::size_t pinned_count() const noexcept { return pinned_; }

 private:
  void factor(const RMat& K, double cond_max);

  const MomentSystem* sys_;
  std::vector<Eigen::Index> free_;  // empty when nothing is pinned
  std::size_t pinned_ = 0;
  Eigen::LDLT<RMat> ldlt_;
  double cond_;
  RVec w_;
};

CoefficientSet solve_unconstrained(const MomentSystem& sys, double cond_max = kDefaultCondMax);

/// Time derivatives of one packet's parameters.
struct PacketDerivatives {
  CMat A_dot;
  RVec p_dot;
  RVec q_dot;
  cplx gamma_dot;
  std::optional<CMat> B_dot;
  std::optional<CMat> C_dot;
};

using ParameterDerivatives = std::vector<PacketDerivatives>;

/// Complex-form map from coefficients to parameter derivatives:
///   dA/dt = -2A^2 - V2/2,  dq/dt = p + s,
///   dp/dt = 2 Re A s - Re v1 - Re V2 q,
///   dgamma/dt = -v0 + i tr A + p^2/2 - v1.q - q V2 q / 2 + p.s,
/// with s = 1/2 (Im A)^{-1} (Im v1 + Im V2 q).
ParameterDerivatives coefficients_to_derivatives(const WavePacket& wp, const CoefficientSet& coeffs);

/// The same map written on real and imaginary parts separately with
/// Lambda = 1/2 (Im A)^{-1}. Kept as an independent code path for
/// cross-checking the complex form.
ParameterDerivatives coefficients_to_derivatives_real(const WavePacket& wp, const CoefficientSet& coeffs);

/// Pairs (dC/dt, dB/dt) = (B, -V2 C), one per packet.
std::vector<std::pair<CMat, CMat>> width_factor_derivatives(const CoefficientSet& coeffs,
                                                            const std::vector<WidthFactors>& factors);

/// I(v_a) - I(v_b) from the quadratic and linear parts of the variational
/// residual; the state-dependent constant <H chi|H chi> cancels.
double residual_gap(const MomentSystem& sys, const CoefficientSet& v_a, const CoefficientSet& v_b);

/// Quadratic-plus-linear part v_bar^T K_bar v_bar - 2 r_bar . v_bar.
double residual_quadratic(const MomentSystem& sys, const RVec& vbar);

}  // namespace cgwp
