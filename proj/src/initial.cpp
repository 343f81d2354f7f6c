#include "cgwp/initial.hpp"

#include <cmath>
#include <numbers>

#include "cgwp/errors.hpp"

namespace cgwp {

std::vector<std::size_t> lattice_shape(std::size_t n, std::size_t dim) {
  if (n == 0 || dim == 0) throw InvalidParameters("lattice needs at least one point and one axis");
  if (dim == 1) return {n};
  // Largest divisor not exceeding the dim-th root goes to the last axis.
  const auto target = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n), 1.0 / double(dim)) + 1e-9));
  std::size_t last = 1;
  for (std::size_t d = std::max<std::size_t>(target, 1); d >= 1; --d)
    if (n % d == 0) {
      last = d;
      break;
    }
  auto rest = lattice_shape(n / last, dim - 1);
  rest.push_back(last);
  return rest;
}

double unit_norm_gamma_imag(const CMat& A) {
  // |g|^2 integrates to exp(-2 Im gamma) pi^{D/2} / sqrt(det(2 Im A)).
  const RMat twoImA = 2.0 * A.imag();
  const double D = static_cast<double>(A.rows());
  return 0.5 * (0.5 * D * std::log(std::numbers::pi) - 0.5 * std::log(twoImA.determinant()));
}

WavePacket grid_packet(const LatticeSpec& spec) {
  const std::size_t D = static_cast<std::size_t>(spec.center.size());
  if (D == 0) throw InvalidParameters("lattice center is empty");
  if (spec.A0.rows() != spec.center.size() || spec.A0.cols() != spec.center.size())
    throw InvalidParameters("lattice width has the wrong shape");
  if (!(spec.spacing > 0.0)) throw InvalidParameters("lattice spacing must be positive");

  const auto shape = lattice_shape(spec.n_gwp, D);
  const double g_i = unit_norm_gamma_imag(spec.A0);
  std::vector<GaussianParams> gwps;
  std::vector<std::size_t> idx(D, 0);
  for (std::size_t m = 0; m < spec.n_gwp; ++m) {
    RVec q = spec.center;
    for (std::size_t a = 0; a < D; ++a)
      q[static_cast<Eigen::Index>(a)] +=
          spec.spacing * (static_cast<double>(idx[a]) - 0.5 * static_cast<double>(shape[a] - 1));
    gwps.emplace_back(spec.A0, RVec::Zero(static_cast<Eigen::Index>(D)), q, cplx(0.0, g_i));
    for (std::size_t a = D; a-- > 0;) {
      if (++idx[a] < shape[a]) break;
      idx[a] = 0;
    }
  }
  WavePacket wp(std::move(gwps));
  if (spec.normalization == Normalization::Individual) return wp;
  const double shift = std::log(norm(wp));
  std::vector<GaussianParams> scaled;
  for (const auto& g : wp) scaled.emplace_back(g.A(), g.p(), g.q(), g.gamma() + cplx(0.0, shift));
  return WavePacket(std::move(scaled));
}

}  // namespace cgwp
