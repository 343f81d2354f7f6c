#pragma once

#include <string>
#include <vector>

#include "cgwp/gaussian.hpp"
#include "cgwp/polynomial.hpp"
#include "cgwp/types.hpp"

namespace cgwp {

/// C(t) = <chi(0)|chi(t)> from analytic overlaps of every GWP pair.
cplx autocorrelation(const WavePacket& wp0, const WavePacket& wp_t);

/// <chi|H|chi> / <chi|chi> with H = p^2/2 + V (unit mass, hbar = 1). T g_k is
/// a quadratic polynomial times g_k, so both parts reduce to pair moments.
double energy(const WavePacket& wp, const PolynomialPotential& V);

/// Complex signal on strictly increasing sample times.
struct TimeSeries {
  std::vector<double> times;
  std::vector<cplx> values;
  std::string label;

  /// Throws InvalidParameters on length mismatch or non-increasing times.
  void validate() const;
  /// True when the spacing is constant to 1e-9 relative.
  bool uniform() const;
};

enum class Window { None, Hann };

struct SpectrumOptions {
  Window window = Window::Hann;
  /// Zero-padding factor applied before the transform.
  std::size_t padding = 8;
  /// Peaks below this fraction of the global maximum are ignored. The default
  /// sits above the first Hann sidelobe (about 2.7 %).
  double peak_threshold = 5e-2;
};

struct Spectrum {
  std::vector<double> frequency;  ///< energies E, ascending
  std::vector<double> power;      ///< |sum_n w_n C(t_n) exp(i E t_n)| dt
  std::vector<double> peaks;      ///< local maxima above threshold, ascending
  double bin_width = 0.0;         ///< 2 pi / (samples * dt), before padding
  double resampling_error = 0.0;  ///< 0 for uniform input
};

/// Windowed DFT of C(t) ~ sum_n |c_n|^2 exp(-i E_n t). Nonuniform input is
/// first resampled onto a uniform grid with a cubic (modified Akima)
/// interpolant; the reported resampling error is the largest difference
/// between that interpolant and a linear one at the new sample points.
Spectrum spectrum(const TimeSeries& series, const SpectrumOptions& options = {});

}  // namespace cgwp
