#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

#include "fraclap/grid.hpp"

using namespace fraclap;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
GridFunction sine_mode(const DomainPtr& d, int j) {
  return sample(d, [j](double x) { return std::sqrt(2.0) * std::sin(j * std::numbers::pi * x); });
}
}  // namespace

TEST_CASE("interval construction", "[grid]") {
  auto d = make_interval(0.0, 1.0, 257);
  CHECK_THAT(d->h(), WithinRel(1.0 / 256.0, 1e-15));
  CHECK(d->convex());
  auto e = make_interval(-1.0, 1.0, 129);
  CHECK_THAT(e->h(), WithinRel(1.0 / 64.0, 1e-15));
  CHECK(e->mask_nodes().size() == 127);
  CHECK(e->closure_nodes().size() == 129);
  CHECK(e->components() == 1);
  CHECK_THROWS_AS(make_interval(0.0, 1.0, 8), GridError);
  CHECK_THROWS_AS(make_interval(1.0, 1.0, 64), GridError);
}

TEST_CASE("inner products of sampled modes", "[grid]") {
  auto d = make_interval(0.0, 1.0, 257);
  const auto p1 = sine_mode(d, 1), p2 = sine_mode(d, 2);
  CHECK_THAT(inner_product(p1, p1), WithinAbs(1.0, 1e-3));
  CHECK_THAT(inner_product(p1, p2), WithinAbs(0.0, 1e-3));
  for (int j = 1; j <= 8; ++j)
    for (int k = 1; k <= 8; ++k)
      CHECK_THAT(inner_product(sine_mode(d, j), sine_mode(d, k)), WithinAbs(j == k ? 1.0 : 0.0, 1e-3));
  auto other = make_interval(0.0, 1.0, 129);
  CHECK_THROWS_AS(inner_product(p1, sine_mode(other, 1)), GridError);
}

TEST_CASE("rectangle and dumbbell", "[grid]") {
  auto sq = make_rectangle(0, 1, 0, 1, 33, 33);
  CHECK(sq->dim() == 2);
  CHECK(sq->mask_nodes().size() == 31 * 31);
  CHECK_THAT(integral(indicator(sq)), WithinRel(1.0, 1e-14));
  CHECK_THROWS_AS(make_rectangle(0, 1, 0, 1, 33, 17), GridError);

  DumbbellSpec spec;
  spec.lobe_width = 1.0;
  spec.lobe_height = 1.0;
  spec.channel_width = 0.125;
  spec.channel_length = 0.5;
  spec.nx = 81;
  spec.ny = 33;
  auto db = make_dumbbell(spec);
  CHECK_FALSE(db->convex());
  CHECK(db->components() == 1);
  CHECK_FALSE(db->region_nodes(Region::lobe1).empty());
  CHECK_FALSE(db->region_nodes(Region::lobe2).empty());
  CHECK_FALSE(db->region_nodes(Region::channel).empty());
  // Mirror symmetry x -> L - x.
  for (std::size_t j = 0; j < db->ny(); ++j)
    for (std::size_t i = 0; i < db->nx(); ++i)
      CHECK(db->in_mask(db->index(i, j)) == db->in_mask(db->index(db->nx() - 1 - i, j)));
  auto split = make_split_lobes(spec);
  CHECK(split->components() == 2);

  auto bad = spec;
  bad.channel_width = 0.0;
  CHECK_THROWS_AS(make_dumbbell(bad), GridError);
  bad.channel_width = 0.01;
  CHECK_THROWS_AS(make_dumbbell(bad), GridError);
  bad = spec;
  bad.channel_length = -0.25;
  CHECK_THROWS_AS(make_dumbbell(bad), GridError);
}

TEST_CASE("graph Laplacian reproduces the Dirichlet energy", "[grid]") {
  auto d = make_interval(0.0, 1.0, 129);
  const auto g = graph_laplacian(*d, BoundaryKind::dirichlet);
  Eigen::VectorXd v(static_cast<long>(g.nodes.size()));
  for (std::size_t k = 0; k < g.nodes.size(); ++k) v[static_cast<long>(k)] = std::sin(std::numbers::pi * d->x(g.nodes[k]));
  const double e = v.dot(g.stiffness * v);
  CHECK_THAT(e, WithinRel(std::numbers::pi * std::numbers::pi / 2.0, 1e-3));
  const auto n = graph_laplacian(*d, BoundaryKind::neumann);
  Eigen::VectorXd one = Eigen::VectorXd::Ones(static_cast<long>(n.nodes.size()));
  CHECK((n.stiffness * one).norm() < 1e-12);
}

TEST_CASE("test function suites honour their constraints", "[grid][property]") {
  auto d = make_interval(0.0, 1.0, 257);
  auto sq = make_rectangle(0, 1, 0, 1, 33, 33);
  for (const auto& dom : {d, sq}) {
    for (auto sign : {SignConstraint::none, SignConstraint::nonnegative, SignConstraint::sign_changing,
                      SignConstraint::zero_mean}) {
      TestSuiteSpec spec;
      spec.count = 20;
      spec.sign = sign;
      spec.seed = 42;
      const auto suite = generate_test_functions(spec, dom);
      REQUIRE(suite.size() == 20);
      for (const auto& u : suite) {
        CHECK(u.supported_in_mask(2.0 * dom->h()));
        CHECK_FALSE(u.is_zero());
        if (sign == SignConstraint::nonnegative) CHECK(u.min() >= 0.0);
        if (sign == SignConstraint::sign_changing) CHECK((u.min() < 0.0 && u.max() > 0.0));
        if (sign == SignConstraint::zero_mean) CHECK(std::abs(integral(u)) < 1e-12);
        // Bounded second differences (smooth on the grid scale).
        const auto lap = negative_laplacian(u);
        CHECK(lap.max_abs() * dom->h() * dom->h() < u.max_abs());
      }
      // Determinism.
      const auto again = generate_test_functions(spec, dom);
      for (std::size_t k = 0; k < suite.size(); ++k)
        CHECK(std::equal(suite[k].values().begin(), suite[k].values().end(), again[k].values().begin()));
    }
  }
}

TEST_CASE("zero mean survives extension by zero", "[grid][property]") {
  auto small = make_interval(0.0, 1.0, 129);
  auto big = make_interval(-1.0, 2.0, 385);
  TestSuiteSpec spec;
  spec.sign = SignConstraint::zero_mean;
  spec.count = 5;
  for (const auto& u : generate_test_functions(spec, small)) {
    GridFunction v(big);
    for (std::size_t i = 0; i < small->size(); ++i) v[i + 128] = u[i];
    CHECK(std::abs(integral(v)) < 1e-12);
  }
}

TEST_CASE("csv and binary round trips", "[grid][io]") {
  DumbbellSpec spec;
  spec.lobe_width = 0.875;
  spec.channel_length = 0.25;
  spec.channel_width = 0.0625;
  spec.nx = 65;
  spec.ny = 33;
  auto db = make_dumbbell(spec);
  TestSuiteSpec ts;
  ts.count = 1;
  ts.region = Region::lobe1;
  const auto u = generate_test_functions(ts, db).front();
  std::stringstream csv;
  write_csv(csv, u);
  const auto back = read_csv(csv, db);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(back[i] == u[i]);

  std::stringstream bin;
  write_binary(bin, u);
  const auto b2 = read_binary(bin);
  CHECK(b2.domain().same_grid(*db));
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(b2[i] == u[i]);

  std::stringstream junk("not a dump");
  CHECK_THROWS_AS(read_binary(junk), FormatError);
}
