#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "../support.hpp"
#include "cgwp/errors.hpp"
#include "cgwp/grid.hpp"
#include "cgwp/observables.hpp"

using namespace cgwp;

namespace {

constexpr double kPi = std::numbers::pi;

Grid2D small_grid(std::size_t n = 128, double L = 8.0) { return {n, n, L, L}; }

WavePacket ground(double qx = 0.0, double qy = 0.0, double px = 0.0, double py = 0.0) {
  RVec q(2), p(2);
  q << qx, qy;
  p << px, py;
  return WavePacket({GaussianParams(CMat::Identity(2, 2) * cplx(0, 0.5), p, q, 0.0)});
}

}  // namespace

TEST_CASE("grid layout") {
  const auto g = small_grid(8, 4.0);
  CHECK(g.x_mu(0) == -4.0);
  CHECK(g.x_mu(4) == doctest::Approx(0.0));
  CHECK(g.k_mu(0) == 0.0);
  CHECK(g.k_mu(1) == doctest::Approx(2 * kPi / 8.0));
  CHECK(g.k_mu(4) == doctest::Approx(-kPi));  // Nyquist sits on the negative side
  CHECK(g.k_mu(7) == doctest::Approx(-2 * kPi / 8.0));
  CHECK(g.index(1, 2) == 10);
  CHECK_NOTHROW(g.validate());
  CHECK_THROWS_AS((Grid2D{100, 128, 8, 8}.validate()), InvalidParameters);
  CHECK_THROWS_AS((Grid2D{128, 128, 0, 8}.validate()), InvalidParameters);
}

TEST_CASE("sampled overlaps and norms match the analytic values") {
  std::mt19937_64 rng(61);
  const auto grid = small_grid(256, 10.0);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = testing::random_packet(rng, 2, 2, 1.0);
    const auto b = testing::random_packet(rng, 3, 2, 1.0);
    const auto fa = sample(a, grid), fb = sample(b, grid);
    CHECK(grid_norm(fa) == doctest::Approx(norm(a)).epsilon(1e-10));
    const cplx analytic = autocorrelation(a, b);
    CHECK(std::abs(grid_autocorrelation(fa, fb) - analytic) < 1e-10 * (1.0 + std::abs(analytic)));
  }
}

TEST_CASE("grid energy of the harmonic ground state") {
  const std::vector<double> w{1.0, 1.0};
  const auto f = sample(ground(), small_grid());
  CHECK(grid_energy(f, build_harmonic(w)) == doctest::Approx(1.0).epsilon(1e-10));
  const auto V = build_diamagnetic_kepler(0.5, 0.2);
  const auto wp = ground(0.7, -0.4, 0.3, 0.1);
  CHECK(grid_energy(sample(wp, small_grid()), V) == doctest::Approx(energy(wp, V)).epsilon(1e-10));
}

TEST_CASE("coherent state revives after one period") {
  const std::vector<double> w{1.0, 1.0};
  const auto V = build_harmonic(w);
  const auto f0 = sample(ground(1.5, -1.0, 0.0, 0.8), small_grid());
  const auto fT = split_operator_propagate(f0, V, 2 * kPi / 1000, 1000);
  // E = 1 + displacement energy; phase after 2 pi is exp(-i 2 pi (1 + E_cl)) but
  // the coherent state itself returns, so |C| = ||f||^2.
  const cplx c = grid_autocorrelation(f0, fT);
  CHECK(std::abs(c) == doctest::Approx(grid_norm(f0) * grid_norm(f0)).epsilon(1e-6));
  CHECK(fT.t == doctest::Approx(2 * kPi));
}

TEST_CASE("free dispersion matches the analytic autocorrelation") {
  PolynomialPotential V(2);
  const auto f0 = sample(ground(), small_grid(256, 16.0));
  GridField f = f0;
  SplitOperator op(f.grid, V, 0.01, 1.0);
  for (int i = 1; i <= 4; ++i) {
    op.advance(f, 50);
    const double t = 0.5 * i;
    const cplx expect = kPi / (1.0 + cplx(0, t / 2));
    CHECK(std::abs(grid_autocorrelation(f0, f) - expect) < 1e-10);
  }
}

TEST_CASE("Strang splitting converges at second order") {
  const auto V = build_diamagnetic_kepler(0.5, 0.2);
  const auto f0 = sample(ground(1.0, 0.5), small_grid());
  const double T = 2.0;
  const auto ref = split_operator_propagate(f0, V, T / 1600, 1600);
  double err[2];
  for (int i = 0; i < 2; ++i) {
    const std::size_t n = 50u << i;
    const auto f = split_operator_propagate(f0, V, T / static_cast<double>(n), n);
    double e = 0.0;
    for (std::size_t j = 0; j < f.values.size(); ++j) e += std::norm(f.values[j] - ref.values[j]);
    err[i] = std::sqrt(e * f.grid.cell());
  }
  const double order = std::log2(err[0] / err[1]);
  CHECK(order == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("propagation is unitary") {
  const auto V = build_diamagnetic_kepler(0.5, 0.2);
  GridField f = sample(ground(1.0, -1.0, 0.5, 0.0), small_grid());
  const double n0 = grid_norm(f);
  SplitOperator op(f.grid, V, 0.01);
  op.advance(f, 500);
  CHECK(grid_norm(f) == doctest::Approx(n0).epsilon(1e-12));
  CHECK(op.dt() == 0.01);
}

TEST_CASE("a packet leaving the box is reported") {
  PolynomialPotential V(2);
  GridField f = sample(ground(0.0, 0.0, 6.0, 0.0), small_grid(64, 6.0));
  CHECK(boundary_probability(f) < 1e-8);
  SplitOperator op(f.grid, V, 0.01);
  CHECK_THROWS_AS(op.advance(f, 100), GridLeak);
}

TEST_CASE("reference run records") {
  const auto V = build_diamagnetic_kepler(0.5, 0.2);
  const auto wp = ground(0.5, 0.5);
  std::vector<ReferenceRecord> rec;
  reference_run(wp, V, small_grid(), 0.01, 100, 25, rec);
  REQUIRE(rec.size() == 5);
  CHECK(rec[0].t == 0.0);
  CHECK(rec[4].t == doctest::Approx(1.0));
  CHECK(std::abs(rec[0].autocorrelation - cplx(norm(wp) * norm(wp))) < 1e-10);
  for (const auto& r : rec) {
    CHECK(r.norm == doctest::Approx(rec[0].norm).epsilon(1e-12));
    CHECK(r.energy == doctest::Approx(rec[0].energy).epsilon(1e-4));
  }
  CHECK_THROWS_AS(reference_run(ground(), V, small_grid(), 0.01, 10, 0, rec), InvalidParameters);
}
