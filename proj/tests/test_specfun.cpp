#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "fraclap/quadrature.hpp"
#include "fraclap/specfun.hpp"

using namespace fraclap;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

// Reference values: tests/oracles/specfun_oracles.py (mpmath, 40 digits).

TEST_CASE("gamma values and poles", "[specfun]") {
  CHECK_THAT(specfun::gamma(1.0).value, WithinRel(1.0, 1e-14));
  CHECK_THAT(specfun::gamma(0.5).value, WithinRel(1.7724538509055160, 1e-14));
  CHECK_THAT(specfun::gamma(3.7).value, WithinRel(4.1706517837966031654, 1e-12));
  CHECK_THROWS_AS(specfun::gamma(0.0), DomainError);
  CHECK_THROWS_AS(specfun::gamma(-3.0), DomainError);
  CHECK(specfun::gamma(2.5).abs_err_bound >= 0.0);
}

TEST_CASE("gamma recurrence on random arguments", "[specfun][property]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(0.5, 20.0);
  for (int k = 0; k < 200; ++k) {
    const double x = dist(rng);
    CHECK_THAT(specfun::gamma(x + 1.0).value, WithinRel(x * specfun::gamma(x).value, 1e-12));
  }
}

TEST_CASE("c_ns values, sign and poles", "[specfun]") {
  CHECK_THAT(specfun::c_ns(1, 0.5).value, WithinRel(1.0 / std::numbers::pi, 1e-13));
  CHECK_THAT(specfun::c_ns(2, 0.75).value, WithinRel(0.17116712969055234293, 1e-12));
  CHECK_THAT(specfun::c_ns(1, 1.25).value, WithinRel(-0.74801677575268627114, 1e-12));
  CHECK_THROWS_AS(specfun::c_ns(1, 1.0), DomainError);
  CHECK_THROWS_AS(specfun::c_ns(1, 0.0), DomainError);
  CHECK_THROWS_AS(specfun::c_ns(0, 0.5), DomainError);
}

TEST_CASE("c_ns sign by regime and smoothness in s", "[specfun][property]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lo(0.01, 0.99), hi(1.01, 1.99);
  for (int n = 1; n <= 2; ++n) {
    for (int k = 0; k < 50; ++k) {
      CHECK(specfun::c_ns(n, lo(rng)).value > 0.0);
      CHECK(specfun::c_ns(n, hi(rng)).value < 0.0);
    }
    // Second differences are small relative to the value: no jumps away from s = 1.
    for (double s : {0.2, 0.5, 0.8, 1.2, 1.5, 1.8}) {
      const double d = 1e-3;
      const double f0 = specfun::c_ns(n, s - d).value, f1 = specfun::c_ns(n, s).value,
                   f2 = specfun::c_ns(n, s + d).value;
      CHECK(std::abs(f0 - 2 * f1 + f2) < 1e-3 * std::abs(f1) + 1e-6);
    }
  }
}

TEST_CASE("c_ns order-lowering identity", "[specfun][property]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(1.01, 1.99);
  for (int k = 0; k < 50; ++k) {
    const int n = 1 + static_cast<int>(k % 2);
    const double s = dist(rng);
    const double lhs = 2.0 * s * (n + 2.0 * s - 2.0) * specfun::c_ns(n, s - 1.0).value;
    CHECK_THAT(lhs, WithinRel(-specfun::c_ns(n, s).value, 1e-10));
  }
}

TEST_CASE("c_sigma values", "[specfun]") {
  CHECK_THAT(specfun::c_sigma(0.5).value, WithinRel(1.0, 1e-14));
  CHECK_THAT(specfun::c_sigma(0.25).value, WithinRel(1.046049620053101649, 1e-12));
  CHECK_THAT(specfun::c_sigma(0.75).value, WithinRel(0.71698319622918749305, 1e-12));
  CHECK_THROWS_AS(specfun::c_sigma(0.0), DomainError);
  CHECK_THROWS_AS(specfun::c_sigma(1.0), DomainError);
}

TEST_CASE("bessel_k against high-precision references", "[specfun]") {
  CHECK_THAT(specfun::bessel_k(0.5, 1.0).value,
             WithinRel(std::sqrt(std::numbers::pi / 2.0) * std::exp(-1.0), 1e-12));
  CHECK_THAT(specfun::bessel_k(0.3, 1e-4).value, WithinRel(29.075356949442205967, 1e-10));
  CHECK_THAT(specfun::bessel_k(0.3, 0.7).value, WithinRel(0.68956248975697501701, 1e-10));
  CHECK_THAT(specfun::bessel_k(0.7, 2.0).value, WithinRel(0.12601327130661063859, 1e-10));
  CHECK_THAT(specfun::bessel_k(0.05, 5.0).value, WithinRel(0.003691944293433675819, 1e-10));
  CHECK_THAT(specfun::bessel_k(0.95, 50.0).value, WithinRel(3.4407789072891091402e-23, 1e-10));
  CHECK_THROWS_AS(specfun::bessel_k(0.5, 0.0), DomainError);
  CHECK_THROWS_AS(specfun::bessel_k(0.5, -1.0), DomainError);
}

TEST_CASE("bessel_k agrees with the standard library", "[specfun][property]") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> sd(0.05, 0.95), ld(std::log(1e-4), std::log(50.0));
  for (int k = 0; k < 200; ++k) {
    const double s = sd(rng), t = std::exp(ld(rng));
    CHECK_THAT(specfun::bessel_k(s, t).value, WithinRel(std::cyl_bessel_k(s, t), 1e-8));
  }
}

TEST_CASE("bessel_k asymptotics", "[specfun]") {
  const double s = 0.3;
  for (double t : {1e-6, 1e-8}) {
    const double r = specfun::bessel_k(s, t).value * std::pow(t, s) / (std::tgamma(s) * std::pow(2.0, s - 1.0));
    CHECK_THAT(r, WithinAbs(1.0, 1e-3));
  }
  const double t = 20.0;
  const double k = specfun::bessel_k(0.7, t).value;
  CHECK_THAT(k / (std::sqrt(std::numbers::pi / (2 * t)) * std::exp(-t)), WithinAbs(1.0, 0.05));
}

TEST_CASE("extension profile", "[specfun]") {
  CHECK(specfun::q_profile(0.3, 0.0).value == 1.0);
  CHECK_THAT(specfun::q_profile(0.5, 1.0).value, WithinRel(std::exp(-1.0), 1e-10));
  CHECK_THAT(specfun::q_profile(0.3, 2.5).value, WithinRel(0.045258786063023981515, 1e-10));
  for (int k = 0; k <= 1000; ++k) {
    const double t = 0.01 * k;
    CHECK_THAT(specfun::q_profile(0.5, t).value, WithinAbs(std::exp(-t), 1e-8));
  }
  for (double s : {0.1, 0.5, 0.9}) {
    double prev = 1.0;
    for (int k = 1; k <= 200; ++k) {
      const double q = specfun::q_profile(s, 0.05 * k).value;
      CHECK(q <= prev);
      CHECK(q > 0.0);
      prev = q;
    }
  }
}

TEST_CASE("zeta and Dirichlet beta", "[specfun]") {
  CHECK_THAT(specfun::zeta(2.0), WithinRel(std::numbers::pi * std::numbers::pi / 6.0, 1e-13));
  CHECK_THAT(specfun::zeta(-1.0), WithinRel(-1.0 / 12.0, 1e-12));
  CHECK_THAT(specfun::zeta(-0.5), WithinRel(-0.20788622497735456602, 1e-11));
  CHECK_THAT(specfun::zeta(0.3), WithinRel(-0.90455925725398399001, 1e-12));
  CHECK_THAT(specfun::zeta(1.5), WithinRel(2.6123753486854883433, 1e-12));
  CHECK(specfun::zeta(-2.0) == 0.0);
  CHECK_THROWS_AS(specfun::zeta(1.0), DomainError);
  CHECK_THAT(specfun::dirichlet_beta(1.0), WithinRel(std::numbers::pi / 4.0, 1e-13));
  CHECK_THAT(specfun::dirichlet_beta(0.5), WithinRel(0.66769145718960917666, 1e-12));
  CHECK_THAT(specfun::dirichlet_beta(1.25), WithinRel(0.82905071313839657038, 1e-12));
}

TEST_CASE("lattice zeta matches direct lattice sums", "[specfun]") {
  // Z_1(4) = 2 zeta(4) = pi^4 / 45.
  CHECK_THAT(specfun::lattice_zeta(1, 4.0), WithinRel(std::pow(std::numbers::pi, 4) / 45.0, 1e-13));
  // Direct square-lattice sum for t = 6 with a continuum tail beyond radius R.
  const int R = 300;
  double sum = 0.0;
  for (int i = -R; i <= R; ++i)
    for (int j = -R; j <= R; ++j) {
      const double r2 = double(i) * i + double(j) * j;
      if (r2 == 0.0 || r2 > double(R) * R) continue;
      sum += std::pow(r2, -3.0);
    }
  sum += 2.0 * std::numbers::pi / (4.0 * std::pow(R, 4));
  CHECK_THAT(specfun::lattice_zeta(2, 6.0), WithinRel(sum, 1e-8));
}

TEST_CASE("quadrature rules", "[quadrature]") {
  CHECK_THAT(quad::gauss([](double x) { return std::pow(x, 15); }, 0.0, 1.0, 8), WithinRel(1.0 / 16.0, 1e-13));
  CHECK_THAT(quad::tanh_sinh([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0), WithinRel(2.0, 1e-10));
  const auto g = quad::graded_rule(10.0, 1.0, 12);
  double acc = 0.0;
  for (std::size_t k = 0; k < g.points.size(); ++k) acc += g.points.w[k] * std::pow(g.points.x[k], -0.5);
  acc += 2.0 * std::sqrt(g.eps);
  CHECK_THAT(acc, WithinRel(2.0 * std::sqrt(10.0), 1e-10));
}
