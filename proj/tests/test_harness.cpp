#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "fraclap/harness.hpp"
#include "fraclap/report.hpp"

using namespace fraclap;
using namespace fraclap::harness;

namespace {

DomainPtr interval(std::size_t n = 257) { return make_interval(0.0, 1.0, n); }

TestSuiteSpec suite(std::size_t count, SignConstraint sign, std::uint64_t seed = 7) {
  TestSuiteSpec s;
  s.count = count;
  s.sign = sign;
  s.seed = seed;
  return s;
}

bool all_pass(const std::vector<ComparisonReport>& rs) { return count_verdict(rs, Verdict::pass) == rs.size(); }

std::string dump(const std::vector<ComparisonReport>& rs) {
  report::RunInfo info;
  info.command = "test";
  info.timestamp = "fixed";
  return report::to_json(info, rs).dump();
}

}  // namespace

TEST_CASE("verdict rule: pass needs every gap above its budget", "[harness]") {
  ComparisonReport r;
  r.relations.push_back({"a", "b", Rel::greater, 2.0, 1.0, 0.1, 2.0});
  harness::detail::finalize(r);
  CHECK(r.verdict == Verdict::pass);
  CHECK(r.margin == Catch::Approx(0.5));
  CHECK(r.error_budget == Catch::Approx(0.05));

  r.relations.push_back({"b", "c", Rel::greater, 1.0, 0.95, 0.1, 2.0});
  harness::detail::finalize(r);
  CHECK(r.verdict == Verdict::inconclusive);
  CHECK(r.margin <= r.error_budget);

  r.relations.push_back({"c", "d", Rel::less, 1.0, 0.9, 0.0, 2.0});
  harness::detail::finalize(r);
  CHECK(r.verdict == Verdict::fail);

  ComparisonReport eq;
  eq.relations.push_back({"x", "y", Rel::equal, 1.0, 1.0 + 1e-15, 0.0, 1.0});
  harness::detail::finalize(eq);
  CHECK(eq.verdict == Verdict::pass);
}

TEST_CASE("pass verdicts always carry margin > budget", "[harness][property]") {
  const auto d = interval(129);
  const auto rs = verify_theorem1(d, {-0.25, 0.5, 1.25}, suite(8, SignConstraint::none, 3));
  for (const auto& r : rs) {
    INFO(r.id);
    if (r.verdict == Verdict::pass) CHECK(r.margin > r.error_budget);
    for (const auto& rel : r.relations)
      if (r.verdict == Verdict::pass) CHECK(rel.gap() > rel.budget);
  }
}

TEST_CASE("form ordering on the interval", "[harness][t1]") {
  const auto d = interval();
  const auto rs = verify_theorem1(d, {-0.75, -0.25, 0.25, 0.75, 1.5}, suite(6, SignConstraint::none));
  REQUIRE(rs.size() == 30);
  CHECK(all_pass(rs));
  for (const auto& r : rs) {
    INFO(r.id);
    const double dsp = r.form("Q_DSp")->value, dr = r.form("Q_DR")->value, nsp = r.form("Q_NSp")->value;
    if (r.s > 0.0 && r.s < 1.0) CHECK((dsp > dr && dr > nsp));
    else CHECK((dsp < dr && dr < nsp));
    if (r.s > 1.0) {
      CHECK(*r.extra_value("reduction_max_rel_diff") < 0.03);
      CHECK(*r.extra_value("reduction_same_ordering") == 1.0);
    }
  }
}

TEST_CASE("results do not depend on the thread count", "[harness][concurrency]") {
  const auto d = interval(129);
  RunOptions one, four;
  one.threads = 1;
  four.threads = 4;
  const auto sp = suite(6, SignConstraint::none, 5);
  CHECK(dump(verify_theorem1(d, {0.5, -0.5}, sp, one)) == dump(verify_theorem1(d, {0.5, -0.5}, sp, four)));
  const auto sc = suite(4, SignConstraint::sign_changing, 5);
  CHECK(dump(verify_theorem3(d, {0.5}, sc, one)) == dump(verify_theorem3(d, {0.5}, sc, four)));
}

TEST_CASE("injected violations turn every verdict into fail", "[harness]") {
  const auto d = interval(129);
  RunOptions flip;
  flip.inject_violation = true;
  const auto rs = verify_theorem1(d, {0.5}, suite(4, SignConstraint::none), flip);
  CHECK(count_verdict(rs, Verdict::fail) == rs.size());
  const auto r2 = verify_theorem2(d, {0.5}, suite(2, SignConstraint::nonnegative), flip);
  CHECK(count_verdict(r2, Verdict::fail) == r2.size());
}

TEST_CASE("pointwise ordering on the interval", "[harness][t2]") {
  const auto d = interval();
  const auto rs = verify_theorem2(d, {0.5, -0.25}, suite(4, SignConstraint::nonnegative));
  // A and C for s = 0.5, B for s = -0.25.
  REQUIRE(rs.size() == 12);
  CHECK(all_pass(rs));
  for (const auto& r : rs) {
    REQUIRE(r.pointwise.size() == 1);
    const auto& p = r.pointwise.front();
    CHECK(p.excluded > 0);
    for (std::size_t k = 0; k < p.nodes.size(); ++k) CHECK(d->boundary_distance(p.nodes[k]) >= 4.0 * d->h() - 1e-12);
  }
}

TEST_CASE("pointwise ordering preconditions", "[harness][t2]") {
  const auto d = interval(129);
  CHECK_THROWS_AS(verify_theorem2(d, {-0.5}, suite(2, SignConstraint::nonnegative)), SideConditionError);
  CHECK_THROWS_AS(verify_theorem2(d, {0.5}, suite(2, SignConstraint::none)), DomainError);
  CHECK_THROWS_AS(verify_theorem2(d, {1.25}, suite(2, SignConstraint::nonnegative)), DomainError);
  const auto dumbbell = example_dumbbell(16, 0.2);
  CHECK_THROWS_AS(verify_theorem2(dumbbell, {0.5}, suite(1, SignConstraint::nonnegative), {}, PartC::required),
                  DomainError);
}

TEST_CASE("order ranges are enforced", "[harness]") {
  const auto d = interval(129);
  CHECK_THROWS_AS(verify_theorem1(d, {2.5}, suite(1, SignConstraint::none)), DomainError);
  CHECK_THROWS_AS(verify_theorem3(d, {1.25}, suite(1, SignConstraint::sign_changing)), DomainError);
  CHECK_THROWS_AS(verify_theorem4(d, {0.5}, 1, 7), DomainError);
  CHECK_THROWS_AS(probe_conjecture(d, {1.75}, suite(1, SignConstraint::sign_changing)), DomainError);
}

TEST_CASE("|u| contraction: strict for sign-changing u, equality for u >= 0", "[harness][t3]") {
  const auto d = interval();
  const auto rs = verify_theorem3(d, {0.25, 0.75}, suite(5, SignConstraint::sign_changing));
  CHECK(all_pass(rs));
  for (const auto& r : rs) {
    CHECK(r.relations.size() == 4);
    for (const auto& rel : r.relations) CHECK(rel.op == Rel::greater);
  }
  const auto eq = verify_theorem3(d, {0.5}, suite(3, SignConstraint::nonnegative));
  CHECK(all_pass(eq));
  for (const auto& r : eq)
    for (const auto& rel : r.relations) CHECK(rel.op == Rel::equal);
}

TEST_CASE("reversal for s in (1, 3/2) with the interaction identity", "[harness][t4]") {
  const auto d = interval();
  const auto pairs = disjoint_pairs(d, 4, 11);
  for (const auto& p : pairs) {
    // Supports separated by at least 4h.
    double last_plus = -1.0, first_minus = 2.0;
    for (std::size_t i = 0; i < d->size(); ++i) {
      if (p.plus[i] != 0.0) last_plus = std::max(last_plus, d->x(i));
      if (p.minus[i] != 0.0) first_minus = std::min(first_minus, d->x(i));
    }
    CHECK(first_minus - last_plus >= 4.0 * d->h());
  }
  const auto rs = verify_theorem4(d, {1.1, 1.4}, 4, 11);
  CHECK(all_pass(rs));
  for (const auto& r : rs) CHECK(*r.extra_value("identity_rel_error") < 0.02);
}

TEST_CASE("non-convex counterexample on the dumbbell", "[harness][counterexample]") {
  const auto r = counterexample_nonconvex(example_dumbbell(32, 0.05), 0.5);
  CHECK(r.verdict == Verdict::pass);
  REQUIRE(r.pointwise.size() == 1);
  CHECK(r.pointwise.front().existential);
  CHECK(r.pointwise.front().holding() > 0);

  const auto split = counterexample_nonconvex(example_dumbbell(32, 0.05, true), 0.5);
  CHECK(split.verdict == Verdict::pass);
  CHECK(split.pointwise.size() == 2);
  CHECK(*split.extra_value("max_abs_nsp_on_lobe2") < 1e-10);

  CHECK_THROWS_AS(counterexample_nonconvex(example_dumbbell(32, 0.05), 1.5), DomainError);
}

TEST_CASE("conjecture probe records differences without a verdict", "[harness][probe]") {
  const auto d = interval();
  const auto nn = probe_conjecture(d, {1.25}, suite(3, SignConstraint::nonnegative));
  for (const auto& e : nn.entries) CHECK(std::abs(e.difference) <= 1e-12 * std::abs(e.q_u));
  const EigenBasis b = eigensystem(d, BasisKind::dirichlet, 2);
  const auto rep = probe_conjecture(d, {1.1, 1.4}, suite(5, SignConstraint::sign_changing), {}, {b.mode(1)});
  REQUIRE(rep.summary.size() == 2);
  CHECK(rep.summary[0].count == 6);
  CHECK(rep.summary[0].min <= rep.summary[0].median);
  CHECK(rep.summary[0].median <= rep.summary[0].max);
}

TEST_CASE("report serialisation", "[harness][report]") {
  const auto d = interval(129);
  const auto rs = verify_theorem1(d, {0.5}, suite(2, SignConstraint::none));
  report::RunInfo info;
  info.command = "verify t1";
  info.config = {{"domain", "interval"}};
  const auto j = report::to_json(info, rs);
  CHECK(j["schema"] == 1);
  CHECK(j["cases"].size() == 2);
  CHECK(j["summary"]["pass"] == 2);
  CHECK(j["cases"][0]["verdict"] == "pass");
  CHECK(!j["timestamp"].get<std::string>().empty());
  const auto back = nlohmann::json::parse(j.dump());
  CHECK(back["cases"][1]["id"] == rs[1].id);

  std::ostringstream csv;
  report::write_csv(csv, rs);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "id,theorem,s,Q_DSp,Q_DR,Q_NSp,Q_NR,margin,budget,verdict");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(line.substr(line.rfind(',') + 1) == "pass");
  }
  CHECK(rows == 2);
}

TEST_CASE("doubling the resolution does not flip pass verdicts", "[harness][property]") {
  const auto sp = suite(5, SignConstraint::none, 13);
  const auto coarse = verify_theorem1(interval(129), {-0.5, 0.5}, sp);
  const auto fine = verify_theorem1(interval(257), {-0.5, 0.5}, sp);
  REQUIRE(coarse.size() == fine.size());
  for (std::size_t k = 0; k < coarse.size(); ++k)
    if (coarse[k].verdict == Verdict::pass) CHECK(fine[k].verdict == Verdict::pass);
}

TEST_CASE("a channel as wide as the lobes yields no violation", "[harness][counterexample]") {
  const auto r = counterexample_nonconvex(example_dumbbell(32, 1.0), 0.5);
  CHECK(r.verdict == Verdict::inconclusive);
  CHECK(r.pointwise.front().holding() == 0);
  CHECK(r.note.find("shrink") != std::string::npos);
}
