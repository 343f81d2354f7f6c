#pragma once

#include <cstddef>
#include <span>
#include <tuple>
#include <vector>

#include "cgwp/gaussian.hpp"
#include "cgwp/polynomial.hpp"
#include "cgwp/types.hpp"

namespace cgwp {

inline constexpr int kDefaultDegreeCap = 12;

/// Precomputed traversal of all multi-indices up to a total degree, laid out
/// in a dense array with strides (max_degree + 1)^i. Because every component
/// of an admissible index is <= max_degree, flat(a + b) == flat(a) + flat(b)
/// whenever |a + b| <= max_degree.
class MonomialTable {
 public:
  MonomialTable(std::size_t dim, int max_degree);

  std::size_t dim() const noexcept { return dim_; }
  int max_degree() const noexcept { return max_degree_; }
  std::size_t storage_size() const noexcept { return storage_size_; }
  std::size_t flat(std::span<const int> alpha) const;

  /// One recursion step: E[alpha] = mu_i E[beta] + sum_j Sigma_ij beta_j E[beta - e_j]
  /// with beta = alpha - e_i.
  struct Step {
    std::size_t target;
    std::size_t pivot;  ///< i
    std::size_t beta;   ///< flat(alpha - e_i)
    /// (j, beta_j, flat(beta - e_j)) for every j with beta_j > 0
    std::vector<std::tuple<std::size_t, int, std::size_t>> lowered;
  };
  const std::vector<Step>& steps() const noexcept { return steps_; }

 private:
  std::size_t dim_;
  int max_degree_;
  std::size_t storage_size_;
  std::vector<std::size_t> strides_;
  std::vector<Step> steps_;
};

/// All moments <g_l | x^alpha | g_k> = int conj(g_l(x)) x^alpha g_k(x) dx of
/// one pair up to the table's degree.
///
/// The product conj(g_l) g_k is a single complex Gaussian exp(-x M x + b.x + c)
/// with M = -i (A_k - conj(A_l)), whose real part Im A_k + Im A_l is positive
/// definite. Completing the square gives the zeroth moment in closed form and
/// the rest follow from the Gaussian moment recursion with mean (1/2) M^{-1} b
/// and covariance (1/2) M^{-1}.
class PairMoments {
 public:
  PairMoments(const GaussianParams& bra, const GaussianParams& ket, const MonomialTable& table);

  cplx operator[](std::size_t flat_index) const { return values_[flat_index]; }
  cplx operator()(std::span<const int> alpha) const { return values_[table_->flat(alpha)]; }
  const MonomialTable& table() const noexcept { return *table_; }

 private:
  const MonomialTable* table_;
  std::vector<cplx> values_;
};

/// <g_l | x^alpha | g_k>. Throws DegreeUnsupported when |alpha| > degree_cap.
cplx pair_moment(const GaussianParams& bra, const GaussianParams& ket, std::span<const int> alpha,
                 int degree_cap = kDefaultDegreeCap);

/// <g_l | x^alpha V(x) | g_k> = sum_beta V_beta <g_l | x^(alpha+beta) | g_k>.
cplx potential_moment(const GaussianParams& bra, const GaussianParams& ket, std::span<const int> alpha,
                      const PolynomialPotential& V, int degree_cap = kDefaultDegreeCap);

}  // namespace cgwp
