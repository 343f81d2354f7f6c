#include "cgwp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <fftw3.h>

#include "cgwp/errors.hpp"
#include "cgwp/fftw_lock.hpp"
#include "cgwp/simd/kernels.hpp"

namespace cgwp {

namespace {

bool power_of_two(std::size_t n) { return n >= 4 && (n & (n - 1)) == 0; }

double wave_number(std::size_t j, std::size_t n, double L) {
  const double dk = std::numbers::pi / L;
  const auto s = static_cast<double>(j);
  return j < n / 2 ? s * dk : (s - static_cast<double>(n)) * dk;
}

void require_same_grid(const GridField& a, const GridField& b) {
  if (a.grid.n_mu != b.grid.n_mu || a.grid.n_nu != b.grid.n_nu || a.grid.L_mu != b.grid.L_mu ||
      a.grid.L_nu != b.grid.L_nu)
    throw InvalidParameters("grid fields live on different grids");
}

// RAII pair of in-place forward/backward plans on an fftw_malloc'd buffer.
class Fft2D {
 public:
  explicit Fft2D(const Grid2D& g) : n_(g.size()) {
    buf_ = reinterpret_cast<cplx*>(fftw_malloc(sizeof(fftw_complex) * n_));
    if (!buf_) throw std::bad_alloc();
    auto* p = reinterpret_cast<fftw_complex*>(buf_);
    std::lock_guard lock(fftw_planner_mutex());
    fwd_ = fftw_plan_dft_2d(static_cast<int>(g.n_mu), static_cast<int>(g.n_nu), p, p, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_2d(static_cast<int>(g.n_mu), static_cast<int>(g.n_nu), p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~Fft2D() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }
  Fft2D(const Fft2D&) = delete;
  Fft2D& operator=(const Fft2D&) = delete;

  cplx* data() noexcept { return buf_; }
  void forward() { fftw_execute(fwd_); }
  void backward() { fftw_execute(bwd_); }

 private:
  std::size_t n_;
  cplx* buf_ = nullptr;
  fftw_plan fwd_{};
  fftw_plan bwd_{};
};

std::vector<double> kinetic_table(const Grid2D& g) {
  std::vector<double> T(g.size());
  for (std::size_t i = 0; i < g.n_mu; ++i)
    for (std::size_t j = 0; j < g.n_nu; ++j) {
      const double a = g.k_mu(i), b = g.k_nu(j);
      T[g.index(i, j)] = 0.5 * (a * a + b * b);
    }
  return T;
}

std::vector<double> potential_table(const Grid2D& g, const PolynomialPotential& V) {
  if (V.dim() != 2) throw InvalidParameters("grid propagation needs a two-dimensional potential");
  std::vector<double> out(g.size());
  RVec x(2);
  for (std::size_t i = 0; i < g.n_mu; ++i)
    for (std::size_t j = 0; j < g.n_nu; ++j) {
      x << g.x_mu(i), g.x_nu(j);
      out[g.index(i, j)] = V(x);
    }
  return out;
}

}  // namespace

void Grid2D::validate() const {
  if (!power_of_two(n_mu) || !power_of_two(n_nu)) throw InvalidParameters("grid sizes must be powers of two >= 4");
  if (!(L_mu > 0.0 && L_nu > 0.0 && std::isfinite(L_mu) && std::isfinite(L_nu)))
    throw InvalidParameters("grid extents must be positive");
}

double Grid2D::k_mu(std::size_t i) const noexcept { return wave_number(i, n_mu, L_mu); }
double Grid2D::k_nu(std::size_t j) const noexcept { return wave_number(j, n_nu, L_nu); }

GridField sample(const WavePacket& wp, const Grid2D& grid) {
  grid.validate();
  if (wp.dim() != 2) throw InvalidParameters("grid sampling needs a two-dimensional packet");
  GridField f{grid, std::vector<cplx>(grid.size()), 0.0};
  RVec x(2);
  for (std::size_t i = 0; i < grid.n_mu; ++i)
    for (std::size_t j = 0; j < grid.n_nu; ++j) {
      x << grid.x_mu(i), grid.x_nu(j);
      f.values[grid.index(i, j)] = wp(x);
    }
  return f;
}

cplx grid_autocorrelation(const GridField& f0, const GridField& ft) {
  require_same_grid(f0, ft);
  return simd::active_kernels().cdot(f0.values.data(), ft.values.data(), f0.values.size()) * f0.grid.cell();
}

double grid_norm(const GridField& f) {
  return std::sqrt(simd::active_kernels().norm2(f.values.data(), f.values.size()) * f.grid.cell());
}

double grid_energy(const GridField& f, const PolynomialPotential& V) {
  const auto& K = simd::active_kernels();
  const std::size_t n = f.values.size();
  const double nrm2 = K.norm2(f.values.data(), n);
  if (!(nrm2 > 0.0)) throw InvalidParameters("energy of a zero field");
  const double pot = K.weighted_norm2(f.values.data(), potential_table(f.grid, V).data(), n);
  Fft2D fft(f.grid);
  std::copy(f.values.begin(), f.values.end(), fft.data());
  fft.forward();
  // Parseval: sum |F_k|^2 = n sum |f_j|^2.
  const double kin = K.weighted_norm2(fft.data(), kinetic_table(f.grid).data(), n) / static_cast<double>(n);
  return (kin + pot) / nrm2;
}

double boundary_probability(const GridField& f, std::size_t band) {
  const Grid2D& g = f.grid;
  band = std::min({band, g.n_mu / 2, g.n_nu / 2});
  double edge = 0.0, total = 0.0;
  for (std::size_t i = 0; i < g.n_mu; ++i) {
    const bool outer_row = i < band || i >= g.n_mu - band;
    for (std::size_t j = 0; j < g.n_nu; ++j) {
      const double w = std::norm(f.values[g.index(i, j)]);
      total += w;
      if (outer_row || j < band || j >= g.n_nu - band) edge += w;
    }
  }
  return total > 0.0 ? edge / total : 0.0;
}

struct SplitOperator::Impl {
  explicit Impl(const Grid2D& g) : fft(g) {}
  Fft2D fft;
  std::vector<cplx> expV;       ///< exp(-i V dt)
  std::vector<cplx> expT_half;  ///< exp(-i T dt / 2) / n
  std::vector<cplx> expT_full;  ///< exp(-i T dt) / n
};

SplitOperator::SplitOperator(const Grid2D& grid, const PolynomialPotential& V, double dt, double leak_tol)
    : grid_(grid), dt_(dt), leak_tol_(leak_tol) {
  grid_.validate();
  if (!(dt > 0.0 && std::isfinite(dt))) throw InvalidParameters("split-operator step must be positive");
  impl_ = std::make_unique<Impl>(grid_);
  const std::size_t n = grid_.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto T = kinetic_table(grid_);
  const auto Vt = potential_table(grid_, V);
  impl_->expV.resize(n);
  impl_->expT_half.resize(n);
  impl_->expT_full.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    impl_->expV[i] = std::polar(1.0, -Vt[i] * dt);
    // The inverse transform is unnormalized; fold 1/n into the kinetic factor.
    impl_->expT_half[i] = std::polar(inv_n, -0.5 * T[i] * dt);
    impl_->expT_full[i] = std::polar(inv_n, -T[i] * dt);
  }
}

SplitOperator::~SplitOperator() = default;

void SplitOperator::advance(GridField& f, std::size_t n_steps) {
  if (f.grid.n_mu != grid_.n_mu || f.grid.n_nu != grid_.n_nu || f.grid.L_mu != grid_.L_mu ||
      f.grid.L_nu != grid_.L_nu)
    throw InvalidParameters("field does not live on the propagator grid");
  if (n_steps == 0) return;
  const auto& K = simd::active_kernels();
  const std::size_t n = grid_.size();
  cplx* buf = impl_->fft.data();
  std::copy(f.values.begin(), f.values.end(), buf);

  impl_->fft.forward();
  K.cmul_inplace(buf, impl_->expT_half.data(), n);
  impl_->fft.backward();
  for (std::size_t s = 0; s < n_steps; ++s) {
    K.cmul_inplace(buf, impl_->expV.data(), n);
    impl_->fft.forward();
    K.cmul_inplace(buf, (s + 1 == n_steps ? impl_->expT_half : impl_->expT_full).data(), n);
    impl_->fft.backward();
  }
  std::copy(buf, buf + n, f.values.begin());
  f.t += static_cast<double>(n_steps) * dt_;

  const double leak = boundary_probability(f);
  if (leak > leak_tol_)
    throw GridLeak("boundary probability " + std::to_string(leak) + " exceeds " + std::to_string(leak_tol_) +
                   " at t=" + std::to_string(f.t));
}

GridField split_operator_propagate(const GridField& field, const PolynomialPotential& V, double dt,
                                   std::size_t n_steps, double leak_tol) {
  SplitOperator op(field.grid, V, dt, leak_tol);
  GridField out = field;
  op.advance(out, n_steps);
  return out;
}

void reference_run(const WavePacket& wp0, const PolynomialPotential& V, const Grid2D& grid, double dt,
                   std::size_t n_steps, std::size_t record_every, std::vector<ReferenceRecord>& out,
                   double leak_tol) {
  if (record_every == 0) throw InvalidParameters("record_every must be positive");
  const GridField f0 = sample(wp0, grid);
  GridField f = f0;
  SplitOperator op(grid, V, dt, leak_tol);
  auto push = [&] { out.push_back({f.t, grid_autocorrelation(f0, f), grid_norm(f), grid_energy(f, V)}); };
  push();
  std::size_t done = 0;
  while (done < n_steps) {
    const std::size_t chunk = std::min(record_every, n_steps - done);
    op.advance(f, chunk);
    done += chunk;
    // Recompute t from the step count to avoid accumulated rounding.
    f.t = static_cast<double>(done) * dt;
    push();
  }
}

}  // namespace cgwp
