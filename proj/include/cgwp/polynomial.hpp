#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "cgwp/types.hpp"

namespace cgwp {

/// Exponents (alpha_1, ..., alpha_D) of the monomial x_1^alpha_1 ... x_D^alpha_D.
using MultiIndex = std::vector<int>;

int total_degree(std::span<const int> alpha);

/// All multi-indices of dimension `dim` with total degree <= `max_degree`,
/// ordered by total degree and then reverse-lexicographically, so that
/// degree 1 comes out as e_1, e_2, ..., e_D.
std::vector<MultiIndex> multi_indices_up_to(std::size_t dim, int max_degree);

/// Monomial basis of the per-packet quadratic polynomial:
/// [1, x_1..x_D, x_1x_1, x_1x_2, .., x_1x_D, x_2x_2, .., x_Dx_D].
/// Mixed products appear once (upper triangle, i <= j).
std::vector<MultiIndex> quadratic_basis(std::size_t dim);

/// Number of entries in `quadratic_basis(dim)`: 1 + D + D(D+1)/2.
constexpr std::size_t quadratic_basis_size(std::size_t dim) { return 1 + dim + dim * (dim + 1) / 2; }

/// Real polynomial V(x) = sum_beta c_beta x^beta.
class PolynomialPotential {
 public:
  explicit PolynomialPotential(std::size_t dim);

  /// Adds `coefficient` to the term `alpha` (terms with equal exponents merge).
  void add_term(const MultiIndex& alpha, double coefficient);

  std::size_t dim() const noexcept { return dim_; }
  int max_degree() const noexcept { return max_degree_; }
  const std::map<MultiIndex, double>& terms() const noexcept { return terms_; }
  bool empty() const noexcept { return terms_.empty(); }

  double operator()(std::span<const double> x) const;
  double operator()(const RVec& x) const { return (*this)(std::span<const double>(x.data(), x.size())); }
  RVec gradient(const RVec& x) const;
  RMat hessian(const RVec& x) const;

 private:
  void refresh_degree();

  std::size_t dim_;
  std::map<MultiIndex, double> terms_;
  int max_degree_ = 0;
};

/// Regularized 2D diamagnetic Kepler potential in semiparabolic coordinates,
/// V(mu, nu) = alpha (mu^2 + nu^2) + beta^2/8 mu^2 nu^2 (mu^2 + nu^2).
PolynomialPotential build_diamagnetic_kepler(double alpha, double beta);

/// Separable oscillator V = sum_i omega_i^2 x_i^2 / 2.
PolynomialPotential build_harmonic(std::span<const double> omega);

}  // namespace cgwp
