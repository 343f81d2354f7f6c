#include "cgwp/tdvp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cgwp/errors.hpp"
#include "cgwp/moments.hpp"

namespace cgwp {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

}  // namespace

CoefficientSet CoefficientSet::from_flat(const CVec& flat, std::size_t n_gwp, std::size_t dim) {
  const std::size_t nb = quadratic_basis_size(dim);
  if (static_cast<std::size_t>(flat.size()) != n_gwp * nb)
    throw InvalidParameters("coefficient vector has the wrong length");
  std::vector<PacketCoefficients> packets;
  packets.reserve(n_gwp);
  const Index D = idx(dim);
  for (std::size_t k = 0; k < n_gwp; ++k) {
    const Index base = idx(k * nb);
    PacketCoefficients pc{flat[base], flat.segment(base + 1, D), CMat::Zero(D, D)};
    Index m = base + 1 + D;
    for (Index i = 0; i < D; ++i) {
      for (Index j = i; j < D; ++j, ++m) {
        if (i == j) {
          pc.V2(i, i) = 2.0 * flat[m];
        } else {
          pc.V2(i, j) = flat[m];
          pc.V2(j, i) = flat[m];
        }
      }
    }
    packets.push_back(std::move(pc));
  }
  return CoefficientSet(std::move(packets));
}

CoefficientSet CoefficientSet::from_real(const RVec& vbar, std::size_t n_gwp, std::size_t dim) {
  const Index n = vbar.size() / 2;
  CVec flat(n);
  for (Index i = 0; i < n; ++i) flat[i] = cplx(vbar[i], vbar[n + i]);
  return from_flat(flat, n_gwp, dim);
}

CVec CoefficientSet::flat() const {
  if (packets_.empty()) return {};
  const Index D = packets_.front().v1.size();
  const Index nb = idx(quadratic_basis_size(static_cast<std::size_t>(D)));
  CVec out(nb * idx(packets_.size()));
  for (std::size_t k = 0; k < packets_.size(); ++k) {
    const auto& pc = packets_[k];
    const Index base = idx(k) * nb;
    out[base] = pc.v0;
    out.segment(base + 1, D) = pc.v1;
    Index m = base + 1 + D;
    for (Index i = 0; i < D; ++i)
      for (Index j = i; j < D; ++j, ++m)
        out[m] = (i == j) ? 0.5 * pc.V2(i, i) : 0.5 * (pc.V2(i, j) + pc.V2(j, i));
  }
  return out;
}

RVec CoefficientSet::real_form() const {
  const CVec f = flat();
  RVec out(2 * f.size());
  out << f.real(), f.imag();
  return out;
}

RMat MomentSystem::K_bar() const {
  const Index n = K.rows();
  RMat kb(2 * n, 2 * n);
  kb.topLeftCorner(n, n) = K.real();
  kb.topRightCorner(n, n) = -K.imag();
  kb.bottomLeftCorner(n, n) = K.imag();
  kb.bottomRightCorner(n, n) = K.real();
  return kb;
}

RVec MomentSystem::r_bar() const {
  RVec rb(2 * r.size());
  rb << r.real(), r.imag();
  return rb;
}

MomentSystem assemble_system(const WavePacket& wp, const PolynomialPotential& V) {
  const std::size_t D = wp.dim();
  if (V.dim() != D) throw InvalidParameters("potential and wave packet dimensions differ");
  const std::size_t N = wp.size();
  const std::size_t nb = quadratic_basis_size(D);
  const int max_degree = std::max(4, 2 + V.max_degree());
  MonomialTable table(D, max_degree);

  std::vector<std::size_t> basis_flat;
  for (const auto& m : quadratic_basis(D)) basis_flat.push_back(table.flat(m));
  std::vector<std::pair<std::size_t, double>> v_terms;
  for (const auto& [beta, c] : V.terms()) v_terms.emplace_back(table.flat(beta), c);

  MomentSystem sys;
  sys.n_gwp = N;
  sys.dim = D;
  sys.K = CMat::Zero(idx(N * nb), idx(N * nb));
  sys.r = CVec::Zero(idx(N * nb));
  for (const auto& g : wp) sys.gamma_imag.push_back(g.gamma().imag());

  for (std::size_t l = 0; l < N; ++l) {
    for (std::size_t k = l; k < N; ++k) {
      const PairMoments P(wp[l], wp[k], table);
      for (std::size_t a = 0; a < nb; ++a) {
        const Index row = idx(l * nb + a);
        for (std::size_t b = 0; b < nb; ++b) {
          const cplx val = P[basis_flat[a] + basis_flat[b]];
          sys.K(row, idx(k * nb + b)) = val;
          if (k != l) sys.K(idx(k * nb + b), row) = std::conj(val);
        }
        cplx s = 0.0;
        for (const auto& [tf, c] : v_terms) s += c * P[basis_flat[a] + tf];
        sys.r[row] += s;
        if (k != l) sys.r[idx(k * nb + a)] += std::conj(s);
      }
    }
  }
  return sys;
}

namespace {

[[noreturn]] void throw_ill_conditioned(const MomentSystem& sys, double cond) {
  std::vector<std::pair<std::size_t, double>> gammas;
  for (std::size_t k = 0; k < sys.gamma_imag.size(); ++k) gammas.emplace_back(k, sys.gamma_imag[k]);
  std::sort(gammas.begin(), gammas.end(), [](auto& a, auto& b) { return a.second < b.second; });
  if (gammas.size() > 3) gammas.resize(3);

  const std::size_t nb = sys.basis_size();
  std::vector<IllConditioned::Overlap> overlaps;
  for (std::size_t l = 0; l < sys.n_gwp; ++l) {
    for (std::size_t k = l + 1; k < sys.n_gwp; ++k) {
      const double nl = sys.K(idx(l * nb), idx(l * nb)).real();
      const double nk = sys.K(idx(k * nb), idx(k * nb)).real();
      overlaps.push_back({l, k, std::abs(sys.K(idx(l * nb), idx(k * nb))) / std::sqrt(nl * nk)});
    }
  }
  std::sort(overlaps.begin(), overlaps.end(), [](auto& a, auto& b) { return a.value > b.value; });
  if (overlaps.size() > 3) overlaps.resize(3);
  throw IllConditioned(cond, std::move(gammas), std::move(overlaps));
}

}  // namespace

FactoredSystem::FactoredSystem(const MomentSystem& sys, double cond_max) : sys_(&sys) {
  factor(sys.K_bar(), cond_max);
  w_ = ldlt_.solve(sys.r_bar());
}

FactoredSystem::FactoredSystem(const MomentSystem& sys, const std::vector<PinnedCoefficient>& pinned,
                               double cond_max)
    : sys_(&sys) {
  const RMat K = sys.K_bar();
  const RVec r = sys.r_bar();
  const Index n = K.rows();
  if (pinned.empty()) {
    factor(K, cond_max);
    w_ = ldlt_.solve(r);
    return;
  }
  RVec fixed = RVec::Zero(n);
  std::vector<bool> is_pinned(static_cast<std::size_t>(n), false);
  for (const auto& pc : pinned) {
    if (pc.index >= static_cast<std::size_t>(n)) throw InvalidParameters("pinned coefficient out of range");
    if (is_pinned[pc.index]) throw InvalidParameters("coefficient pinned twice");
    is_pinned[pc.index] = true;
    fixed[idx(pc.index)] = pc.value;
  }
  for (Index i = 0; i < n; ++i)
    if (!is_pinned[static_cast<std::size_t>(i)]) free_.push_back(i);
  pinned_ = pinned.size();
  if (free_.empty()) throw InvalidParameters("every coefficient is pinned");

  // Move the known part to the right-hand side: K_ff w_f = r_f - K_fp w_p.
  const RVec rhs = r - K * fixed;
  factor(K(free_, free_), cond_max);
  w_ = fixed;
  const RVec wf = ldlt_.solve(RVec(rhs(free_)));
  w_(free_) = wf;
}

void FactoredSystem::factor(const RMat& K, double cond_max) {
  ldlt_.compute(K);
  const double rc = ldlt_.rcond();
  // A failed factorization means an exactly singular pivot; rcond is meaningless then.
  cond_ = (rc > 0.0 && ldlt_.info() == Eigen::Success) ? 1.0 / rc : std::numeric_limits<double>::infinity();
  if (!(cond_ <= cond_max)) throw_ill_conditioned(*sys_, cond_);
}

RMat FactoredSystem::solve(const RMat& rhs) const {
  if (free_.empty()) return ldlt_.solve(rhs);
  RMat out = RMat::Zero(rhs.rows(), rhs.cols());
  const RMat sf = ldlt_.solve(RMat(rhs(free_, Eigen::all)));
  out(free_, Eigen::all) = sf;
  return out;
}

CoefficientSet solve_unconstrained(const MomentSystem& sys, double cond_max) {
  const FactoredSystem fs(sys, cond_max);
  return CoefficientSet::from_real(fs.unconstrained(), sys.n_gwp, sys.dim);
}

ParameterDerivatives coefficients_to_derivatives(const WavePacket& wp, const CoefficientSet& coeffs) {
  if (coeffs.size() != wp.size()) throw InvalidParameters("coefficient set does not match wave packet");
  ParameterDerivatives out;
  out.reserve(wp.size());
  for (std::size_t k = 0; k < wp.size(); ++k) {
    const auto& g = wp[k];
    const auto& c = coeffs[k];
    const CMat& A = g.A();
    const RVec& p = g.p();
    const RVec& q = g.q();
    const CVec qc = q.cast<cplx>();

    const RVec s = 0.5 * g.A_imag().ldlt().solve(RVec(c.v1.imag() + c.V2.imag() * q));
    PacketDerivatives d;
    d.A_dot = -2.0 * A * A - 0.5 * c.V2;
    d.q_dot = p + s;
    d.p_dot = 2.0 * g.A_real() * s - c.v1.real() - c.V2.real() * q;
    d.gamma_dot = -c.v0 + kI * A.trace() + 0.5 * p.squaredNorm() - (c.v1.transpose() * qc)(0) -
                  0.5 * (qc.transpose() * c.V2 * qc)(0) + p.dot(s);
    out.push_back(std::move(d));
  }
  return out;
}

ParameterDerivatives coefficients_to_derivatives_real(const WavePacket& wp, const CoefficientSet& coeffs) {
  if (coeffs.size() != wp.size()) throw InvalidParameters("coefficient set does not match wave packet");
  ParameterDerivatives out;
  out.reserve(wp.size());
  for (std::size_t k = 0; k < wp.size(); ++k) {
    const auto& g = wp[k];
    const auto& c = coeffs[k];
    const RMat Ar = g.A_real();
    const RMat Ai = g.A_imag();
    const RMat Lambda = 0.5 * Ai.inverse();
    const RVec& p = g.p();
    const RVec& q = g.q();
    const double v0r = c.v0.real(), v0i = c.v0.imag();
    const RVec v1r = c.v1.real(), v1i = c.v1.imag();
    const RMat V2r = c.V2.real(), V2i = c.V2.imag();

    const RMat Ar_dot = -0.5 * V2r - 2.0 * (Ar * Ar - Ai * Ai);
    const RMat Ai_dot = -0.5 * V2i - 2.0 * Ar * Ai - 2.0 * Ai * Ar;

    PacketDerivatives d;
    d.A_dot = Ar_dot.cast<cplx>() + kI * Ai_dot.cast<cplx>();
    d.p_dot = -v1r - V2r * q + 2.0 * Ar * Lambda * v1i + 2.0 * Ar * Lambda * V2i * q;
    d.q_dot = Lambda * v1i + Lambda * V2i * q + p;
    const double gr_dot = -v0r - v1r.dot(q) - 0.5 * q.dot(V2r * q) + p.dot(Lambda * v1i) +
                          p.dot(Lambda * V2i * q) - Ai.trace() + 0.5 * p.squaredNorm();
    const double gi_dot = -v0i - q.dot(v1i) - 0.5 * q.dot(V2i * q) + Ar.trace();
    d.gamma_dot = cplx(gr_dot, gi_dot);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<std::pair<CMat, CMat>> width_factor_derivatives(const CoefficientSet& coeffs,
                                                            const std::vector<WidthFactors>& factors) {
  if (coeffs.size() != factors.size()) throw InvalidParameters("width factors do not match coefficients");
  std::vector<std::pair<CMat, CMat>> out;
  out.reserve(factors.size());
  for (std::size_t k = 0; k < factors.size(); ++k)
    out.emplace_back(factors[k].B, -coeffs[k].V2 * factors[k].C);
  return out;
}

double residual_quadratic(const MomentSystem& sys, const RVec& vbar) {
  return vbar.dot(sys.K_bar() * vbar) - 2.0 * sys.r_bar().dot(vbar);
}

double residual_gap(const MomentSystem& sys, const CoefficientSet& v_a, const CoefficientSet& v_b) {
  const RVec a = v_a.real_form();
  const RVec b = v_b.real_form();
  const RVec diff = a - b;
  // Q(a) - Q(b) = (a - b)^T K_bar (a + b) - 2 r_bar . (a - b), using symmetry of K_bar.
  return diff.dot(sys.K_bar() * (a + b)) - 2.0 * sys.r_bar().dot(diff);
}

}  // namespace cgwp
