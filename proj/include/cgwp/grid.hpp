#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "cgwp/gaussian.hpp"
#include "cgwp/polynomial.hpp"
#include "cgwp/types.hpp"

namespace cgwp {

inline constexpr double kDefaultLeakTol = 1e-8;

/// Uniform periodic lattice on [-L_mu, L_mu) x [-L_nu, L_nu). Point j on an
/// axis sits at -L + j * 2L / n; wave numbers follow FFT ordering.
struct Grid2D {
  std::size_t n_mu = 512;
  std::size_t n_nu = 512;
  double L_mu = 12.0;
  double L_nu = 12.0;

  /// Throws InvalidParameters unless both sizes are powers of two (>= 4) and
  /// both extents are positive.
  void validate() const;
  std::size_t size() const noexcept { return n_mu * n_nu; }
  double d_mu() const noexcept { return 2.0 * L_mu / static_cast<double>(n_mu); }
  double d_nu() const noexcept { return 2.0 * L_nu / static_cast<double>(n_nu); }
  double cell() const noexcept { return d_mu() * d_nu(); }
  double x_mu(std::size_t i) const noexcept { return -L_mu + static_cast<double>(i) * d_mu(); }
  double x_nu(std::size_t j) const noexcept { return -L_nu + static_cast<double>(j) * d_nu(); }
  double k_mu(std::size_t i) const noexcept;
  double k_nu(std::size_t j) const noexcept;
  /// Flat index, mu major.
  std::size_t index(std::size_t i, std::size_t j) const noexcept { return i * n_nu + j; }
};

struct GridField {
  Grid2D grid;
  std::vector<cplx> values;  ///< size grid.size(), mu major
  double t = 0.0;
};

/// chi evaluated pointwise on the lattice.
GridField sample(const WavePacket& wp, const Grid2D& grid);

/// sum conj(f0) ft dmu dnu.
cplx grid_autocorrelation(const GridField& f0, const GridField& ft);

/// Square root of sum |f|^2 dmu dnu.
double grid_norm(const GridField& f);

/// <f|T + V|f> / <f|f>, kinetic part evaluated spectrally.
double grid_energy(const GridField& f, const PolynomialPotential& V);

/// Fraction of the probability that lies in the outer band of the box,
/// `band` points wide along every edge.
double boundary_probability(const GridField& f, std::size_t band = 8);

/// Strang split-operator propagator exp(-iT dt/2) exp(-iV dt) exp(-iT dt/2)
/// with T = (k_mu^2 + k_nu^2) / 2. Consecutive kinetic half steps are merged.
class SplitOperator {
 public:
  SplitOperator(const Grid2D& grid, const PolynomialPotential& V, double dt, double leak_tol = kDefaultLeakTol);
  ~SplitOperator();
  SplitOperator(const SplitOperator&) = delete;
  SplitOperator& operator=(const SplitOperator&) = delete;

  /// Advances `f` by n_steps * dt. Throws GridLeak when the boundary
  /// probability afterwards exceeds the leak tolerance.
  void advance(GridField& f, std::size_t n_steps);

  double dt() const noexcept { return dt_; }
  const Grid2D& grid() const noexcept { return grid_; }

 private:
  struct Impl;
  Grid2D grid_;
  double dt_;
  double leak_tol_;
  std::unique_ptr<Impl> impl_;
};

GridField split_operator_propagate(const GridField& field, const PolynomialPotential& V, double dt,
                                   std::size_t n_steps, double leak_tol = kDefaultLeakTol);

struct ReferenceRecord {
  double t;
  cplx autocorrelation;
  double norm;
  double energy;
};

/// Samples wp0, then records C(t), norm and energy every `record_every`
/// steps (and at t = 0). Records gathered before a GridLeak are kept in `out`.
void reference_run(const WavePacket& wp0, const PolynomialPotential& V, const Grid2D& grid, double dt,
                   std::size_t n_steps, std::size_t record_every, std::vector<ReferenceRecord>& out,
                   double leak_tol = kDefaultLeakTol);

}  // namespace cgwp
