#include "cgwp/moments.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "cgwp/errors.hpp"

namespace cgwp {

MonomialTable::MonomialTable(std::size_t dim, int max_degree) : dim_(dim), max_degree_(max_degree) {
  if (dim == 0 || max_degree < 0) throw InvalidParameters("invalid monomial table shape");
  strides_.resize(dim);
  std::size_t stride = 1;
  for (std::size_t i = 0; i < dim; ++i) {
    strides_[i] = stride;
    stride *= static_cast<std::size_t>(max_degree + 1);
  }
  storage_size_ = stride;

  for (const MultiIndex& alpha : multi_indices_up_to(dim, max_degree)) {
    if (total_degree(alpha) == 0) continue;
    Step s;
    s.target = flat(alpha);
    s.pivot = 0;
    while (alpha[s.pivot] == 0) ++s.pivot;
    MultiIndex beta = alpha;
    beta[s.pivot] -= 1;
    s.beta = flat(beta);
    for (std::size_t j = 0; j < dim; ++j) {
      if (beta[j] == 0) continue;
      s.lowered.emplace_back(j, beta[j], s.beta - strides_[j]);
    }
    steps_.push_back(std::move(s));
  }
}

std::size_t MonomialTable::flat(std::span<const int> alpha) const {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < dim_; ++i) idx += static_cast<std::size_t>(alpha[i]) * strides_[i];
  return idx;
}

namespace {

// Principal branch of det(M)^{-1/2} continued from real positive definite M.
// Every eigenvalue of M has positive real part, so the product of principal
// square roots is the right branch. For D <= 2 the arguments sum to less
// than pi in magnitude and sqrt(det M) is already correct.
cplx inverse_sqrt_det(const CMat& M) {
  if (M.rows() <= 2) return 1.0 / std::sqrt(M.determinant());
  Eigen::ComplexEigenSolver<CMat> es(M, false);
  cplx prod = 1.0;
  for (Eigen::Index i = 0; i < M.rows(); ++i) prod *= std::sqrt(es.eigenvalues()[i]);
  return 1.0 / prod;
}

}  // namespace

PairMoments::PairMoments(const GaussianParams& bra, const GaussianParams& ket, const MonomialTable& table)
    : table_(&table), values_(table.storage_size(), cplx(0.0)) {
  const auto D = static_cast<Eigen::Index>(ket.dim());
  if (bra.dim() != ket.dim() || ket.dim() != table.dim())
    throw InvalidParameters("dimension mismatch in pair moment");

  const CMat Al = bra.A().conjugate();
  const CMat& Ak = ket.A();
  const CMat M = -kI * (Ak - Al);

  const RMat re_m = 0.5 * (M.real() + M.real().transpose());
  Eigen::LLT<RMat> llt(re_m);
  if (llt.info() != Eigen::Success) throw NonIntegrable("combined exponent is not decaying");

  const CVec ql = bra.q().cast<cplx>();
  const CVec qk = ket.q().cast<cplx>();
  const CVec pl = bra.p().cast<cplx>();
  const CVec pk = ket.p().cast<cplx>();

  const CVec b = kI * (pk - 2.0 * Ak * qk) - kI * (pl - 2.0 * Al * ql);
  const cplx c = kI * (qk.dot(Ak * qk) - pk.dot(qk) + ket.gamma()) -
                 kI * (ql.dot(Al * ql) - pl.dot(ql) + std::conj(bra.gamma()));
  // CVec::dot conjugates its first argument; qk, pk, ql, pl are real so that is harmless.

  const CMat Minv = M.inverse();
  const CVec Minv_b = Minv * b;
  const CVec mean = 0.5 * Minv_b;
  const CMat cov = 0.5 * Minv;
  const cplx exponent = c + 0.25 * (b.transpose() * Minv_b)(0);
  const double pi_factor = std::pow(std::numbers::pi, 0.5 * static_cast<double>(D));

  values_[0] = std::exp(exponent) * pi_factor * inverse_sqrt_det(M);
  for (const auto& s : table.steps()) {
    cplx v = mean[static_cast<Eigen::Index>(s.pivot)] * values_[s.beta];
    for (const auto& [j, count, lowered] : s.lowered)
      v += cov(static_cast<Eigen::Index>(s.pivot), static_cast<Eigen::Index>(j)) * static_cast<double>(count) *
           values_[lowered];
    values_[s.target] = v;
  }
}

cplx pair_moment(const GaussianParams& bra, const GaussianParams& ket, std::span<const int> alpha,
                 int degree_cap) {
  if (alpha.size() != ket.dim()) throw InvalidParameters("multi-index dimension mismatch");
  const int degree = total_degree(alpha);
  if (degree > degree_cap)
    throw DegreeUnsupported("moment degree " + std::to_string(degree) + " exceeds cap " +
                            std::to_string(degree_cap));
  MonomialTable table(ket.dim(), degree);
  return PairMoments(bra, ket, table)(alpha);
}

cplx potential_moment(const GaussianParams& bra, const GaussianParams& ket, std::span<const int> alpha,
                      const PolynomialPotential& V, int degree_cap) {
  if (alpha.size() != ket.dim() || V.dim() != ket.dim())
    throw InvalidParameters("multi-index dimension mismatch");
  if (V.empty()) return 0.0;
  const int degree = total_degree(alpha) + V.max_degree();
  if (degree > degree_cap)
    throw DegreeUnsupported("moment degree " + std::to_string(degree) + " exceeds cap " +
                            std::to_string(degree_cap));
  MonomialTable table(ket.dim(), degree);
  PairMoments moments(bra, ket, table);
  const std::size_t base = table.flat(alpha);
  cplx sum = 0.0;
  for (const auto& [beta, coeff] : V.terms()) sum += coeff * moments[base + table.flat(beta)];
  return sum;
}

}  // namespace cgwp
