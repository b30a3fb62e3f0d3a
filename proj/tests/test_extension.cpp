#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "fraclap/extension.hpp"
#include "fraclap/restricted.hpp"
#include "fraclap/spectral.hpp"

using namespace fraclap;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
constexpr double pi = std::numbers::pi;

DomainPtr unit_interval() {
  static const DomainPtr d = make_interval(0.0, 1.0, 129);
  return d;
}

GridFunction suite_function(const DomainPtr& d, SignConstraint sign, std::uint64_t seed = 7) {
  TestSuiteSpec spec;
  spec.count = 1;
  spec.sign = sign;
  spec.seed = seed;
  return generate_test_functions(spec, d).front();
}

double rel_l2(const GridFunction& a, const GridFunction& ref, const std::vector<std::size_t>& nodes) {
  double e = 0.0, n = 0.0;
  for (std::size_t i : nodes) {
    e += (a[i] - ref[i]) * (a[i] - ref[i]);
    n += ref[i] * ref[i];
  }
  return std::sqrt(e / n);
}

double energy_factor(double sigma) { return specfun::c_sigma(sigma).value / (2.0 * sigma); }

struct Case {
  Geometry g;
  LateralBC lateral;
};
constexpr Case kCases[] = {{Geometry::half_space, LateralBC::none},
                           {Geometry::half_cylinder, LateralBC::dirichlet},
                           {Geometry::half_cylinder, LateralBC::neumann}};

double reference_form(const GridFunction& u, double s, const Case& c) {
  const auto& d = u.domain_ptr();
  if (c.g == Geometry::half_space) return restricted_form(u, s).value;
  return spectral_form(u, s, eigensystem(d, c.lateral == LateralBC::dirichlet ? BasisKind::dirichlet : BasisKind::neumann)).value;
}
}  // namespace

TEST_CASE("energy identities of the trace problems", "[extension]") {
  const auto d = unit_interval();
  const auto u = suite_function(d, SignConstraint::nonnegative);
  for (double s : {0.25, 0.5, 0.75}) {
    for (const auto& c : kCases) {
      INFO("sigma " << s << " " << to_string(c.g) << " " << to_string(c.lateral));
      const auto w = solve_extension(u, s, c.g, c.lateral, BottomBC::trace);
      const auto e = energy(w);
      const double q = energy_factor(s) * e.value;
      CHECK_THAT(q, WithinRel(reference_form(u, s, c), 0.03));
      // y-refinement: the error against the exact-in-y reference falls by at least 2x per halving.
      ExtensionOptions coarse;
      coarse.levels = 64;
      const auto wc = solve_extension(u, s, c.g, c.lateral, BottomBC::trace, coarse);
      const double ref = semidiscrete_form(w);
      const double err_fine = std::abs(q / ref - 1.0);
      const double err_coarse = std::abs(energy_factor(s) * energy(wc).value / ref - 1.0);
      CHECK(err_fine <= 0.5 * err_coarse);
      // The reported estimate is of the size of the actual y-error.
      const double est = energy_factor(s) * e.discretization_estimate / ref;
      CHECK(est >= 0.5 * err_fine);
      CHECK(est <= 2.0 * err_fine);
    }
  }
}

TEST_CASE("energy identities of the dual problems", "[extension]") {
  const auto d = unit_interval();
  const auto u = suite_function(d, SignConstraint::zero_mean);
  for (double s : {0.25, 0.5, 0.75}) {
    const double g = 2.0 * s / specfun::c_sigma(s).value;
    for (const auto& c : kCases) {
      INFO("sigma " << s << " " << to_string(c.g) << " " << to_string(c.lateral));
      const auto w = solve_extension(u, s, c.g, c.lateral, BottomBC::weighted_neumann);
      const double q = -g * dual_functional(w).value;
      CHECK_THAT(q, WithinRel(reference_form(u, -s, c), 0.03));
      // At the minimiser E = (u, w(.,0)), so the dual value is -E.
      CHECK_THAT(dual_functional(w).value, WithinRel(-energy(w).value, 1e-8));
      ExtensionOptions coarse;
      coarse.levels = 64;
      const auto wc = solve_extension(u, s, c.g, c.lateral, BottomBC::weighted_neumann, coarse);
      const double ref = semidiscrete_form(w);
      CHECK(std::abs(q / ref - 1.0) <= 0.5 * std::abs(-g * dual_functional(wc).value / ref - 1.0));
    }
  }
}

TEST_CASE("DtN map of the first Dirichlet mode", "[extension]") {
  auto d = make_interval(0.0, 1.0, 257);
  const auto phi = sample(d, [](double x) { return std::sqrt(2.0) * std::sin(pi * x); });
  const auto w = solve_extension(phi, 0.5, Geometry::half_cylinder, LateralBC::dirichlet, BottomBC::trace);
  const auto t = dtn_trace(w);
  const auto nodes = d->interior_nodes(0.05);
  GridFunction ref = pi * phi;
  CHECK(rel_l2(t, ref, nodes) < 0.03);
  for (double s : {0.25, 0.75}) {
    const auto ws = solve_extension(phi, s, Geometry::half_cylinder, LateralBC::dirichlet, BottomBC::trace);
    CHECK(rel_l2(dtn_trace(ws), std::pow(pi, 2 * s) * phi, nodes) < 0.03);
  }
}

TEST_CASE("DtN and NtD maps against the direct operators", "[extension]") {
  const auto d = unit_interval();
  const auto u = suite_function(d, SignConstraint::nonnegative);
  const auto uz = suite_function(d, SignConstraint::zero_mean);
  const auto nodes = d->interior_nodes(0.05);
  const auto bd = eigensystem(d, BasisKind::dirichlet);
  const auto bn = eigensystem(d, BasisKind::neumann);
  for (double s : {0.25, 0.5, 0.75}) {
    INFO("sigma " << s);
    const auto wh = solve_extension(u, s, Geometry::half_space, LateralBC::none, BottomBC::trace);
    const auto wd = solve_extension(u, s, Geometry::half_cylinder, LateralBC::dirichlet, BottomBC::trace);
    const auto wn = solve_extension(u, s, Geometry::half_cylinder, LateralBC::neumann, BottomBC::trace);
    CHECK(rel_l2(dtn_trace(wh), restricted_apply(u, s, nodes).values, nodes) < 0.05);
    CHECK(rel_l2(dtn_trace(wd), spectral_apply(u, s, bd).values, nodes) < 0.05);
    CHECK(rel_l2(dtn_trace(wn), spectral_apply(u, s, bn).values, nodes) < 0.05);
    // The two-level fit and the Galerkin flux are two readings of the same limit.
    CHECK(rel_l2(dtn_trace(wd), dtn_flux(wd), nodes) < 0.02);

    const auto vh = solve_extension(uz, s, Geometry::half_space, LateralBC::none, BottomBC::weighted_neumann);
    const auto vd = solve_extension(uz, s, Geometry::half_cylinder, LateralBC::dirichlet, BottomBC::weighted_neumann);
    const auto vn = solve_extension(uz, s, Geometry::half_cylinder, LateralBC::neumann, BottomBC::weighted_neumann);
    CHECK(rel_l2(ntd_trace(vh), negative_restricted_apply(uz, s).values, nodes) < 0.05);
    CHECK(rel_l2(ntd_trace(vd), spectral_apply(uz, -s, bd).values, nodes) < 0.05);
    CHECK(rel_l2(ntd_trace(vn), spectral_apply(uz, -s, bn).values, nodes) < 0.05);
  }
}

TEST_CASE("half-space solve reproduces the Poisson-kernel extension", "[extension]") {
  for (int n : {1, 2})
    for (double s : {0.2, 0.5, 0.8}) CHECK_THAT(poisson_normalization(n, s), WithinRel(specfun::poisson_kernel_constant_exact(n, s), 1e-10));

  auto d = make_interval(0.0, 1.0, 257);
  const auto u = suite_function(d, SignConstraint::nonnegative);
  const auto w = solve_extension(u, 0.5, Geometry::half_space, LateralBC::none, BottomBC::trace);
  std::vector<std::array<double, 3>> pts;
  std::vector<double> vals;
  for (std::size_t k = 0; k < w.levels(); ++k) {
    if (w.y[k] < 0.05 || w.y[k] > 1.0) continue;
    for (std::size_t i = 0; i < d->size(); i += 4) {
      pts.push_back({d->x(i), 0.0, w.y[k]});
      vals.push_back(w.value(i, k));
    }
  }
  const auto p = poisson_extension(u, 0.5, pts);
  double e = 0.0, nrm = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    e += (vals[j] - p[j]) * (vals[j] - p[j]);
    nrm += p[j] * p[j];
  }
  CHECK(std::sqrt(e / nrm) < 0.01);
  CHECK_THROWS_AS(poisson_extension(u, 0.5, {{0.5, 0.0, 0.0}}), DomainError);
}

TEST_CASE("Bessel series agrees with the Neumann-cylinder solve", "[extension]") {
  const auto d = unit_interval();
  const auto u = suite_function(d, SignConstraint::nonnegative);
  const auto basis = eigensystem(d, BasisKind::neumann);
  for (double s : {0.25, 0.5, 0.75}) {
    const auto w = solve_extension(u, s, Geometry::half_cylinder, LateralBC::neumann, BottomBC::trace);
    const auto series = bessel_series_extension(u, s, basis, w.y);
    const double top = w.ymesh->graded_top;
    double e = 0.0, nrm = 0.0;
    for (std::size_t k = 1; k < w.levels(); ++k) {
      if (w.y[k] < 0.05 * top || w.y[k] > top) continue;
      const double wt = std::pow(w.y[k], 1 - 2 * s) * (w.y[k] - w.y[k - 1]);
      for (std::size_t i : d->closure_nodes()) {
        const double diff = w.value(i, k) - series.value(i, k);
        e += wt * diff * diff;
        nrm += wt * series.value(i, k) * series.value(i, k);
      }
    }
    CHECK(std::sqrt(e / nrm) < 0.01);
    // The series tends to the mean of u.
    const double mean = integral(u) / integral(indicator(d));
    const auto far = bessel_series_extension(u, s, basis, {50.0});
    CHECK_THAT(far.value(64, 0), WithinAbs(mean, 1e-8));
    CHECK_THROWS_AS(energy(series), DomainError);
  }
}

TEST_CASE("maximum principle and minimality", "[extension][property]") {
  const auto d = unit_interval();
  const auto u = suite_function(d, SignConstraint::nonnegative, 11);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (double s : {0.25, 0.75}) {
    for (const auto& c : kCases) {
      const auto w = solve_extension(u, s, c.g, c.lateral, BottomBC::trace);
      CHECK(w.w.minCoeff() >= -1e-12 * w.w.maxCoeff());
      CHECK(w.w.maxCoeff() <= u.max() * (1.0 + 1e-12));
      const double e0 = energy(w).value;
      for (int trial = 0; trial < 5; ++trial) {
        Eigen::MatrixXd p = w.w;
        for (std::size_t x : std::vector<std::size_t>(w.xspace->free.begin(), w.xspace->free.end()))
          for (long k = 1; k + 1 < p.cols(); ++k) p(static_cast<long>(x), k) += 1e-3 * nd(rng);
        CHECK(energy_of(w, p) >= e0);
      }
    }
    // Zero extension of the lateral-Dirichlet minimiser is admissible for the half-space problem,
    // and the restriction of the half-space minimiser to the cylinder is admissible for Neumann.
    const auto wh = solve_extension(u, s, Geometry::half_space, LateralBC::none, BottomBC::trace);
    const auto wd = solve_extension(u, s, Geometry::half_cylinder, LateralBC::dirichlet, BottomBC::trace);
    const auto wn = solve_extension(u, s, Geometry::half_cylinder, LateralBC::neumann, BottomBC::trace);
    const double eh = energy(wh).value, ed = energy(wd).value, en = energy(wn).value;
    CHECK(energy_of(wh, transfer_field(wd, wh)) == Catch::Approx(ed).epsilon(1e-10));
    CHECK(eh < ed);
    CHECK(energy_of(wn, transfer_field(wh, wn)) >= en);
    CHECK(en < eh);
  }
}

TEST_CASE("two-dimensional energy identities", "[extension][2d]") {
  auto sq = make_rectangle(0.0, 1.0, 0.0, 1.0, 33, 33);
  const auto u = suite_function(sq, SignConstraint::nonnegative);
  const double s = 0.5;
  const auto wd = solve_extension(u, s, Geometry::half_cylinder, LateralBC::dirichlet, BottomBC::trace);
  CHECK_THAT(energy_factor(s) * energy(wd).value, WithinRel(spectral_form(u, s, eigensystem(sq, BasisKind::dirichlet)).value, 0.03));
  const auto wh = solve_extension(u, s, Geometry::half_space, LateralBC::none, BottomBC::trace);
  CHECK_THAT(energy_factor(s) * energy(wh).value, WithinRel(restricted_form(u, s).value, 0.03));
  CHECK(energy(wh).value < energy(wd).value);

  // A general mask goes through the dense modal path.
  auto db = make_split_lobes(DumbbellSpec{1.0, 1.0, 0.1, 0.5, 41, 17});
  const auto ub = suite_function(db, SignConstraint::nonnegative);
  const auto wb = solve_extension(ub, s, Geometry::half_cylinder, LateralBC::neumann, BottomBC::trace);
  CHECK_THAT(energy_factor(s) * energy(wb).value, WithinRel(spectral_form(ub, s, eigensystem(db, BasisKind::neumann)).value, 0.03));
}

TEST_CASE("extension argument validation", "[extension][errors]") {
  const auto d = unit_interval();
  const auto u = suite_function(d, SignConstraint::nonnegative);
  CHECK_THROWS_AS(solve_extension(u, 1.2, Geometry::half_space, LateralBC::none, BottomBC::trace), DomainError);
  CHECK_THROWS_AS(solve_extension(u, 0.0, Geometry::half_space, LateralBC::none, BottomBC::trace), DomainError);
  CHECK_THROWS_AS(solve_extension(u, 0.5, Geometry::half_space, LateralBC::dirichlet, BottomBC::trace), DomainError);
  CHECK_THROWS_AS(solve_extension(u, 0.5, Geometry::half_cylinder, LateralBC::none, BottomBC::trace), DomainError);
  CHECK_THROWS_AS(solve_extension(u, 0.5, Geometry::half_cylinder, LateralBC::neumann, BottomBC::weighted_neumann),
                  SideConditionError);
  CHECK_THROWS_AS(solve_extension(u, 0.75, Geometry::half_space, LateralBC::none, BottomBC::weighted_neumann),
                  SideConditionError);
  GridFunction edge(d);
  edge[0] = 1.0;
  CHECK_THROWS_AS(solve_extension(edge, 0.5, Geometry::half_cylinder, LateralBC::dirichlet, BottomBC::trace),
                  SideConditionError);
  ExtensionOptions coarse;
  coarse.levels = 8;
  const auto w = solve_extension(u, 0.5, Geometry::half_cylinder, LateralBC::dirichlet, BottomBC::trace, coarse);
  CHECK_THROWS_AS(dtn_trace(w), GridError);
  CHECK_THROWS_AS(ntd_trace(w), DomainError);
  coarse.levels = 2;
  CHECK_THROWS_AS(solve_extension(u, 0.5, Geometry::half_space, LateralBC::none, BottomBC::trace, coarse), GridError);
}

TEST_CASE("extension field export", "[extension][io]") {
  auto d = make_interval(0.0, 1.0, 17);
  const auto u = suite_function(d, SignConstraint::nonnegative);
  ExtensionOptions o;
  o.levels = 16;
  const auto w = solve_extension(u, 0.5, Geometry::half_cylinder, LateralBC::dirichlet, BottomBC::trace, o);
  std::ostringstream csv;
  write_slices_csv(csv, w, {0, 3});
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "x,y,value");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2 * d->size());
  CHECK_THROWS_AS(write_slices_csv(csv, w, {w.levels()}), GridError);

  std::stringstream bin;
  write_binary(bin, w);
  const auto back = read_binary(bin);  // leading block is the trace as a GridFunction dump
  for (std::size_t i = 0; i < d->size(); ++i) CHECK(back[i] == u[i]);
}
