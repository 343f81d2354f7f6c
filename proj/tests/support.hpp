#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cgwp/gaussian.hpp"
#include "cgwp/polynomial.hpp"
#include "cgwp/types.hpp"

namespace testing {

using namespace cgwp;

inline CMat random_width(std::mt19937_64& rng, Eigen::Index D, double im_lo = 0.3, double im_hi = 1.2) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(im_lo, im_hi);
  RMat L = RMat::Zero(D, D);
  for (Eigen::Index i = 0; i < D; ++i) {
    L(i, i) = std::sqrt(pos(rng));
    for (Eigen::Index j = 0; j < i; ++j) L(i, j) = 0.3 * u(rng);
  }
  const RMat im = L * L.transpose();
  RMat re(D, D);
  for (Eigen::Index i = 0; i < D; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) re(i, j) = re(j, i) = 0.4 * u(rng);
  return re.cast<cplx>() + kI * im.cast<cplx>();
}

inline GaussianParams random_gwp(std::mt19937_64& rng, Eigen::Index D, double spread = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RVec p(D), q(D);
  for (Eigen::Index i = 0; i < D; ++i) {
    p[i] = u(rng);
    q[i] = spread * u(rng);
  }
  return GaussianParams(random_width(rng, D), p, q, cplx(0.5 * u(rng), 0.5 * u(rng)));
}

inline WavePacket random_packet(std::mt19937_64& rng, std::size_t n, Eigen::Index D, double spread = 1.5) {
  std::vector<GaussianParams> g;
  for (std::size_t k = 0; k < n; ++k) g.push_back(random_gwp(rng, D, spread));
  return WavePacket(std::move(g));
}

/// Adaptive Gauss-Kronrod integral of a complex function over [a, b]
/// (real and imaginary parts separately), plus the integral of its modulus.
struct Quad1 {
  cplx value;
  double magnitude;
};

template <class F>
Quad1 quad1(F f, double a, double b, double tol = 1e-13) {
  using boost::math::quadrature::gauss_kronrod;
  const double re = gauss_kronrod<double, 61>::integrate([&](double x) { return f(x).real(); }, a, b, 15, tol);
  const double im = gauss_kronrod<double, 61>::integrate([&](double x) { return f(x).imag(); }, a, b, 15, tol);
  const double ab = gauss_kronrod<double, 61>::integrate([&](double x) { return std::abs(f(x)); }, a, b, 15, tol);
  return {cplx(re, im), ab};
}

/// Tensor-product rectangle rule on a uniform lattice; spectrally accurate
/// for smooth functions that decay to zero inside the box.
template <class F>
cplx lattice_integral(F f, const RVec& lo, const RVec& hi, int n) {
  const Eigen::Index D = lo.size();
  const RVec h = (hi - lo) / n;
  cplx sum = 0.0;
  RVec x(D);
  std::vector<int> idx(static_cast<std::size_t>(D), 0);
  while (true) {
    for (Eigen::Index i = 0; i < D; ++i) x[i] = lo[i] + h[i] * idx[static_cast<std::size_t>(i)];
    sum += f(x);
    Eigen::Index a = 0;
    for (; a < D; ++a) {
      if (++idx[static_cast<std::size_t>(a)] <= n) break;
      idx[static_cast<std::size_t>(a)] = 0;
    }
    if (a == D) break;
  }
  return sum * h.prod();
}

}  // namespace testing
