#include "cgwp/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cgwp/errors.hpp"

namespace cgwp {

int total_degree(std::span<const int> alpha) { return std::accumulate(alpha.begin(), alpha.end(), 0); }

namespace {

void enumerate_degree(std::size_t dim, int degree, std::size_t pos, MultiIndex& current,
                      std::vector<MultiIndex>& out) {
  if (pos + 1 == dim) {
    current[pos] = degree;
    out.push_back(current);
    return;
  }
  for (int a = degree; a >= 0; --a) {
    current[pos] = a;
    enumerate_degree(dim, degree - a, pos + 1, current, out);
  }
}

}  // namespace

std::vector<MultiIndex> multi_indices_up_to(std::size_t dim, int max_degree) {
  std::vector<MultiIndex> out;
  if (dim == 0) return out;
  MultiIndex current(dim, 0);
  for (int d = 0; d <= max_degree; ++d) enumerate_degree(dim, d, 0, current, out);
  return out;
}

std::vector<MultiIndex> quadratic_basis(std::size_t dim) {
  std::vector<MultiIndex> basis;
  basis.reserve(quadratic_basis_size(dim));
  basis.emplace_back(dim, 0);
  for (std::size_t i = 0; i < dim; ++i) {
    MultiIndex e(dim, 0);
    e[i] = 1;
    basis.push_back(e);
  }
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i; j < dim; ++j) {
      MultiIndex e(dim, 0);
      e[i] += 1;
      e[j] += 1;
      basis.push_back(e);
    }
  }
  return basis;
}

PolynomialPotential::PolynomialPotential(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw InvalidParameters("potential dimension must be positive");
}

void PolynomialPotential::add_term(const MultiIndex& alpha, double coefficient) {
  if (alpha.size() != dim_) throw InvalidParameters("multi-index dimension does not match potential");
  if (!std::isfinite(coefficient)) throw InvalidParameters("potential coefficient is not finite");
  if (std::any_of(alpha.begin(), alpha.end(), [](int a) { return a < 0; }))
    throw InvalidParameters("negative exponent in potential term");
  double& c = terms_[alpha];
  c += coefficient;
  if (c == 0.0) terms_.erase(alpha);
  refresh_degree();
}

void PolynomialPotential::refresh_degree() {
  max_degree_ = 0;
  for (const auto& [alpha, c] : terms_) max_degree_ = std::max(max_degree_, total_degree(alpha));
}

double PolynomialPotential::operator()(std::span<const double> x) const {
  double v = 0.0;
  for (const auto& [alpha, c] : terms_) {
    double term = c;
    for (std::size_t i = 0; i < dim_; ++i) term *= std::pow(x[i], alpha[i]);
    v += term;
  }
  return v;
}

RVec PolynomialPotential::gradient(const RVec& x) const {
  RVec g = RVec::Zero(static_cast<Eigen::Index>(dim_));
  for (const auto& [alpha, c] : terms_) {
    for (std::size_t d = 0; d < dim_; ++d) {
      if (alpha[d] == 0) continue;
      double term = c * alpha[d];
      for (std::size_t i = 0; i < dim_; ++i) term *= std::pow(x[i], i == d ? alpha[i] - 1 : alpha[i]);
      g[d] += term;
    }
  }
  return g;
}

RMat PolynomialPotential::hessian(const RVec& x) const {
  const auto n = static_cast<Eigen::Index>(dim_);
  RMat h = RMat::Zero(n, n);
  for (const auto& [alpha, c] : terms_) {
    for (std::size_t a = 0; a < dim_; ++a) {
      for (std::size_t b = 0; b < dim_; ++b) {
        MultiIndex e = alpha;
        double term = c;
        term *= e[a];
        e[a] -= 1;
        if (term == 0.0) continue;
        term *= e[b];
        e[b] -= 1;
        if (term == 0.0) continue;
        for (std::size_t i = 0; i < dim_; ++i) term *= std::pow(x[i], e[i]);
        h(a, b) += term;
      }
    }
  }
  return h;
}

PolynomialPotential build_diamagnetic_kepler(double alpha, double beta) {
  PolynomialPotential v(2);
  const double quartic = beta * beta / 8.0;
  v.add_term({2, 0}, alpha);
  v.add_term({0, 2}, alpha);
  v.add_term({4, 2}, quartic);
  v.add_term({2, 4}, quartic);
  return v;
}

PolynomialPotential build_harmonic(std::span<const double> omega) {
  PolynomialPotential v(omega.size());
  for (std::size_t i = 0; i < omega.size(); ++i) {
    MultiIndex e(omega.size(), 0);
    e[i] = 2;
    v.add_term(e, 0.5 * omega[i] * omega[i]);
  }
  return v;
}

}  // namespace cgwp
