#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <random>

#include "cgwp/errors.hpp"
#include "cgwp/polynomial.hpp"

using namespace cgwp;

TEST_CASE("multi-indices are ordered by degree with unit vectors first") {
  const auto idx = multi_indices_up_to(2, 2);
  REQUIRE(idx.size() == 6);
  CHECK(idx[0] == MultiIndex{0, 0});
  CHECK(idx[1] == MultiIndex{1, 0});
  CHECK(idx[2] == MultiIndex{0, 1});
  for (std::size_t i = 1; i < idx.size(); ++i) CHECK(total_degree(idx[i - 1]) <= total_degree(idx[i]));
  CHECK(multi_indices_up_to(3, 4).size() == 35);
}

TEST_CASE("quadratic basis layout") {
  const auto b = quadratic_basis(2);
  REQUIRE(b.size() == quadratic_basis_size(2));
  CHECK(b == std::vector<MultiIndex>{{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}});
  CHECK(quadratic_basis_size(1) == 3);
  CHECK(quadratic_basis_size(3) == 10);
}

TEST_CASE("diamagnetic Kepler coefficients") {
  const auto V = build_diamagnetic_kepler(0.5, 0.2);
  CHECK(V.max_degree() == 6);
  REQUIRE(V.terms().size() == 4);
  CHECK(V.terms().at({2, 0}) == doctest::Approx(0.5));
  CHECK(V.terms().at({0, 2}) == doctest::Approx(0.5));
  CHECK(V.terms().at({4, 2}) == doctest::Approx(0.005));
  CHECK(V.terms().at({2, 4}) == doctest::Approx(0.005));
  const std::array<double, 2> x{1.0, 1.0};
  CHECK(V(x) == doctest::Approx(1.01).epsilon(1e-15));

  const auto H = build_diamagnetic_kepler(0.5, 0.0);
  CHECK(H.max_degree() == 2);
  CHECK(H.hessian(RVec::Zero(2)).isApprox(RMat::Identity(2, 2)));
}

TEST_CASE("terms merge and cancel") {
  PolynomialPotential V(2);
  V.add_term({1, 1}, 2.0);
  V.add_term({1, 1}, 1.0);
  CHECK(V.terms().at({1, 1}) == doctest::Approx(3.0));
  V.add_term({3, 0}, 1.0);
  CHECK(V.max_degree() == 3);
  V.add_term({3, 0}, -1.0);
  CHECK(V.max_degree() == 2);
  CHECK_THROWS_AS(V.add_term({1}, 1.0), InvalidParameters);
}

TEST_CASE("gradient and Hessian match central differences") {
  const auto V = build_diamagnetic_kepler(0.7, 0.4);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    RVec x(2);
    x << u(rng), u(rng);
    const double h = 1e-5;
    const RVec g = V.gradient(x);
    const RMat H = V.hessian(x);
    for (int i = 0; i < 2; ++i) {
      RVec e = RVec::Zero(2);
      e[i] = h;
      CHECK(g[i] == doctest::Approx((V(x + e) - V(x - e)) / (2 * h)).epsilon(1e-7));
      const RVec dg = (V.gradient(x + e) - V.gradient(x - e)) / (2 * h);
      for (int j = 0; j < 2; ++j) CHECK(H(j, i) == doctest::Approx(dg[j]).epsilon(1e-7));
    }
  }
}

TEST_CASE("harmonic builder") {
  const std::array<double, 2> w{1.0, 2.0};
  const auto V = build_harmonic(w);
  const std::array<double, 2> x{1.0, 1.0};
  CHECK(V(x) == doctest::Approx(0.5 + 2.0));
}
