#include "cgwp/observables.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/interpolators/makima.hpp>
#include <fftw3.h>

#include "cgwp/errors.hpp"
#include "cgwp/fftw_lock.hpp"
#include "cgwp/moments.hpp"

namespace cgwp {

cplx autocorrelation(const WavePacket& wp0, const WavePacket& wp_t) {
  if (wp0.dim() != wp_t.dim()) throw InvalidParameters("autocorrelation of packets with different dimension");
  MonomialTable table(wp0.dim(), 0);
  cplx sum = 0.0;
  for (const auto& g0 : wp0)
    for (const auto& gt : wp_t) sum += PairMoments(g0, gt, table)[0];
  return sum;
}

double energy(const WavePacket& wp, const PolynomialPotential& V) {
  const std::size_t D = wp.dim();
  if (V.dim() != D) throw InvalidParameters("potential and wave packet dimensions differ");
  const int max_degree = std::max(2, V.max_degree());
  MonomialTable table(D, max_degree);
  const auto basis = quadratic_basis(D);
  std::vector<std::size_t> basis_flat;
  for (const auto& m : basis) basis_flat.push_back(table.flat(m));

  // T g_k = g_k [x (2A^2) x + (2Ap - 4A^2 q).x + 2 q A^2 q - 2 p A q + p^2/2 - i tr A]
  // expressed in the coefficients of quadratic_basis(D).
  std::vector<CVec> kinetic;
  for (const auto& g : wp) {
    const CMat& A = g.A();
    const CMat A2 = A * A;
    const CVec p = g.p().cast<cplx>();
    const CVec q = g.q().cast<cplx>();
    CVec c(static_cast<Eigen::Index>(basis.size()));
    c[0] = 2.0 * (q.transpose() * A2 * q)(0) - 2.0 * (p.transpose() * A * q)(0) + 0.5 * g.p().squaredNorm() -
           kI * A.trace();
    const CVec lin = 2.0 * A * p - 4.0 * A2 * q;
    Eigen::Index m = 1;
    for (std::size_t i = 0; i < D; ++i) c[m++] = lin[static_cast<Eigen::Index>(i)];
    for (std::size_t i = 0; i < D; ++i)
      for (std::size_t j = i; j < D; ++j)
        c[m++] = (i == j ? 2.0 : 4.0) * A2(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    kinetic.push_back(std::move(c));
  }

  cplx overlap = 0.0, kin = 0.0, pot = 0.0;
  for (const auto& gl : wp) {
    for (std::size_t k = 0; k < wp.size(); ++k) {
      const PairMoments P(gl, wp[k], table);
      overlap += P[0];
      for (std::size_t a = 0; a < basis.size(); ++a) kin += kinetic[k][static_cast<Eigen::Index>(a)] * P[basis_flat[a]];
      for (const auto& [beta, c] : V.terms()) pot += c * P(beta);
    }
  }
  return ((kin + pot) / overlap).real();
}

void TimeSeries::validate() const {
  if (times.size() != values.size()) throw InvalidParameters("time series lengths differ");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1])) throw InvalidParameters("time series times must increase strictly");
}

bool TimeSeries::uniform() const {
  if (times.size() < 3) return true;
  const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  for (std::size_t i = 1; i < times.size(); ++i)
    if (std::abs(times[i] - times[i - 1] - dt) > 1e-9 * dt) return false;
  return true;
}

Spectrum spectrum(const TimeSeries& series, const SpectrumOptions& options) {
  series.validate();
  const std::size_t n = series.times.size();
  if (n < 4) throw InvalidParameters("spectrum needs at least four samples");
  const double t0 = series.times.front();
  const double dt = (series.times.back() - t0) / static_cast<double>(n - 1);

  Spectrum out;
  std::vector<cplx> samples = series.values;
  if (!series.uniform()) {
    std::vector<double> re(n), im(n);
    for (std::size_t i = 0; i < n; ++i) {
      re[i] = series.values[i].real();
      im[i] = series.values[i].imag();
    }
    using boost::math::interpolators::makima;
    const auto lin = [&](double t) {
      const auto it = std::upper_bound(series.times.begin(), series.times.end(), t);
      const std::size_t hi = std::clamp<std::size_t>(static_cast<std::size_t>(it - series.times.begin()), 1, n - 1);
      const double s = (t - series.times[hi - 1]) / (series.times[hi] - series.times[hi - 1]);
      return (1.0 - s) * series.values[hi - 1] + s * series.values[hi];
    };
    auto times_re = series.times, times_im = series.times;
    makima<std::vector<double>> spline_re(std::move(times_re), std::move(re));
    makima<std::vector<double>> spline_im(std::move(times_im), std::move(im));
    for (std::size_t i = 0; i < n; ++i) {
      const double t = std::min(t0 + dt * static_cast<double>(i), series.times.back());
      samples[i] = cplx(spline_re(t), spline_im(t));
      out.resampling_error = std::max(out.resampling_error, std::abs(samples[i] - lin(t)));
    }
  }

  std::size_t padded = 1;
  while (padded < n * std::max<std::size_t>(options.padding, 1)) padded <<= 1;
  std::vector<cplx> buffer(padded, cplx(0.0));
  for (std::size_t i = 0; i < n; ++i) {
    double w = 1.0;
    if (options.window == Window::Hann)
      w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1)));
    buffer[i] = w * samples[i];
  }
  {
    auto* data = reinterpret_cast<fftw_complex*>(buffer.data());
    fftw_plan plan;
    {
      std::lock_guard lock(fftw_planner_mutex());
      plan = fftw_plan_dft_1d(static_cast<int>(padded), data, data, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }

  const double dE = 2.0 * std::numbers::pi / (static_cast<double>(padded) * dt);
  out.bin_width = 2.0 * std::numbers::pi / (static_cast<double>(n) * dt);
  out.frequency.resize(padded);
  out.power.resize(padded);
  for (std::size_t j = 0; j < padded; ++j) {
    // Negative energies live in the upper half of the transform.
    const std::size_t src = (j + padded / 2) % padded;
    const auto signed_index = static_cast<double>(src) - (src >= padded / 2 ? static_cast<double>(padded) : 0.0);
    out.frequency[j] = signed_index * dE;
    out.power[j] = std::abs(buffer[src]) * dt;
  }
  const double pmax = *std::max_element(out.power.begin(), out.power.end());
  for (std::size_t j = 1; j + 1 < padded; ++j) {
    if (out.power[j] >= options.peak_threshold * pmax && out.power[j] > out.power[j - 1] &&
        out.power[j] >= out.power[j + 1])
      out.peaks.push_back(out.frequency[j]);
  }
  return out;
}

}  // namespace cgwp
