#ifndef FRACLAP_HARNESS_HPP
#define FRACLAP_HARNESS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fraclap/errors.hpp"
#include "fraclap/grid.hpp"
#include "fraclap/order.hpp"
#include "fraclap/restricted.hpp"
#include "fraclap/specfun.hpp"
#include "fraclap/spectral.hpp"

namespace fraclap::harness {

enum class Verdict { pass, fail, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

enum class Rel { greater, less, equal };

inline const char* to_string(Rel r) { return r == Rel::greater ? ">" : (r == Rel::less ? "<" : "="); }

/*
 * One asserted relation lhs (op) rhs.  gap is positive when the relation holds
 * (for equality: tolerance minus the discrepancy); budget is the sum of the
 * error estimates reported for both sides; scale normalises both for the
 * report.
 */
struct Relation {
  std::string lhs, rhs;
  Rel op = Rel::greater;
  double lhs_value = 0.0, rhs_value = 0.0;
  double budget = 0.0;
  double scale = 1.0;
  double equal_tol = 1e-12;  // relative, for Rel::equal

  double gap() const {
    switch (op) {
      case Rel::greater: return lhs_value - rhs_value;
      case Rel::less: return rhs_value - lhs_value;
      case Rel::equal: return equal_tol * scale - std::abs(lhs_value - rhs_value);
    }
    return 0.0;
  }
};

/// Nodewise comparison lhs (op) rhs on a node set; the excluded band is counted separately.
struct Pointwise {
  std::string lhs, rhs;
  Rel op = Rel::greater;
  bool existential = false;  // "holds at some node" rather than "at every node"
  std::vector<std::size_t> nodes;
  std::vector<double> x, y, lhs_values, rhs_values, budget;
  std::size_t excluded = 0;
  double scale = 1.0;

  double gap(std::size_t k) const {
    return op == Rel::greater ? lhs_values[k] - rhs_values[k] : rhs_values[k] - lhs_values[k];
  }
  std::size_t holding() const {
    std::size_t c = 0;
    for (std::size_t k = 0; k < nodes.size(); ++k)
      if (gap(k) > budget[k]) ++c;
    return c;
  }
};

struct ComparisonReport {
  std::string id;
  std::string check;
  double s = 0.0;
  std::string u_label;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, FormValue>> forms;
  std::vector<Relation> relations;
  std::vector<Pointwise> pointwise;
  std::vector<std::pair<std::string, double>> extra;
  double margin = 0.0;        // normalised gap of the critical relation
  double error_budget = 0.0;  // normalised budget of the critical relation
  Verdict verdict = Verdict::inconclusive;
  std::string note;

  const FormValue* form(const std::string& name) const {
    for (const auto& f : forms)
      if (f.first == name) return &f.second;
    return nullptr;
  }
  std::optional<double> extra_value(const std::string& name) const {
    for (const auto& e : extra)
      if (e.first == name) return e.second;
    return std::nullopt;
  }
};

/// Part C of the pointwise check needs a convex domain.
enum class PartC { automatic, required, skip };

struct RunOptions {
  unsigned threads = 0;           // 0: hardware concurrency
  bool inject_violation = false;  // flip every asserted relation (exit-code contract checks)
  double exclusion = 4.0;         // pointwise exclusion zone, in units of h
};

struct ProbeEntry {
  std::string id, u_label;
  double s = 0.0;
  double q_u = 0.0, q_abs = 0.0, difference = 0.0, budget = 0.0;
  bool candidate = false;  // Q[|u|] - Q[u] < 0 beyond the budget
};

struct ProbeSummary {
  double s = 0.0;
  std::size_t count = 0;
  double min = 0.0, max = 0.0, median = 0.0;
  std::size_t candidates = 0;
};

struct ProbeReport {
  std::vector<ProbeEntry> entries;
  std::vector<ProbeSummary> summary;
};

namespace detail {

inline Rel flipped(Rel r, bool flip) {
  if (!flip) return r;
  return r == Rel::greater ? Rel::less : (r == Rel::less ? Rel::greater : r);
}

/*
 * Verdict: every relation must hold with gap > budget.  The critical relation
 * (or node) is the one with the smallest gap - budget; its normalised gap and
 * budget are reported, so margin > error_budget iff the verdict is pass.
 */
inline void finalize(ComparisonReport& r, bool extra_failure = false) {
  if (!r.note.empty() && r.relations.empty() && r.pointwise.empty()) {
    r.verdict = Verdict::fail;
    return;
  }
  bool all_hold = true;
  double best = std::numeric_limits<double>::infinity();
  bool have = false;
  auto consider = [&](double gap, double budget, double scale) {
    scale = scale > 0.0 ? scale : 1.0;
    const double slack = (gap - budget) / scale;
    if (!have || slack < best) {
      best = slack;
      r.margin = gap / scale;
      r.error_budget = budget / scale;
      have = true;
    }
  };
  for (const auto& rel : r.relations) {
    if (!(rel.gap() > 0.0)) all_hold = false;
    consider(rel.gap(), rel.budget, rel.scale);
  }
  for (const auto& p : r.pointwise) {
    if (p.nodes.empty()) {
      all_hold = false;
      continue;
    }
    if (p.existential) {
      // Critical node: the strongest violation witness.
      double top = -std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t k = 0; k < p.nodes.size(); ++k)
        if (p.gap(k) - p.budget[k] > top) {
          top = p.gap(k) - p.budget[k];
          arg = k;
        }
      if (!(p.gap(arg) > 0.0)) all_hold = false;
      consider(p.gap(arg), p.budget[arg], p.scale);
    } else {
      for (std::size_t k = 0; k < p.nodes.size(); ++k) {
        if (!(p.gap(k) > 0.0)) all_hold = false;
        consider(p.gap(k), p.budget[k], p.scale);
      }
    }
  }
  if (!all_hold || extra_failure) r.verdict = Verdict::fail;
  else r.verdict = best > 0.0 ? Verdict::pass : Verdict::inconclusive;
}

/// Runs f(0..n-1) on a thread pool; results are stored by index, so the order never depends on scheduling.
template <class T>
std::vector<T> parallel_map(std::size_t n, unsigned threads, const std::function<T(std::size_t)>& f) {
  std::vector<T> out(n);
  std::vector<std::exception_ptr> errs(n);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = f(i);
      } catch (...) {
        errs[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return out;
}

/// Runs a case, turning numerical exceptions into a failed report carrying the message.
inline ComparisonReport guarded(const std::string& id, const std::string& check, double s,
                                const std::function<ComparisonReport()>& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    ComparisonReport r;
    r.id = id;
    r.check = check;
    r.s = s;
    r.note = std::string("error: ") + e.what();
    r.verdict = Verdict::fail;
    return r;
  }
}

inline std::string case_id(const std::string& prefix, double s, std::size_t k) {
  std::ostringstream os;
  os << prefix << "-s" << s << "-u" << (k < 10 ? "0" : "") << k;
  return os.str();
}

inline std::vector<std::size_t> interior_eval_nodes(const Domain& d, double exclusion_h, std::size_t* excluded) {
  std::vector<std::size_t> nodes;
  const double h = d.h();
  for (std::size_t i : d.mask_nodes())
    if (d.boundary_distance(i) >= exclusion_h * h * (1.0 - 1e-12) && d.box_distance(i) >= 2.0 * h * (1.0 - 1e-12))
      nodes.push_back(i);
  *excluded = d.mask_nodes().size() - nodes.size();
  return nodes;
}

inline Pointwise make_pointwise(const Domain& d, const std::string& lhs, const std::string& rhs, Rel op,
                                const std::vector<std::size_t>& nodes, const FieldValue& a, const FieldValue& b) {
  Pointwise p;
  p.lhs = lhs;
  p.rhs = rhs;
  p.op = op;
  p.nodes = nodes;
  double scale = 0.0;
  for (std::size_t i : nodes) {
    p.x.push_back(d.x(i));
    p.y.push_back(d.y(i));
    p.lhs_values.push_back(a.values[i]);
    p.rhs_values.push_back(b.values[i]);
    p.budget.push_back(a.error[i] + b.error[i]);
    scale = std::max({scale, std::abs(a.values[i]), std::abs(b.values[i])});
  }
  p.scale = scale;
  return p;
}

inline void require_orders(const std::vector<double>& s_list, double lo, double hi, const char* what) {
  if (s_list.empty()) throw DomainError(std::string(what) + ": empty order list");
  for (double s : s_list) {
    FracOrder checked(s);  // validates the global range
    (void)checked;
    if (!(s > lo && s < hi))
      throw DomainError(std::string(what) + ": order " + std::to_string(s) + " outside (" + std::to_string(lo) + ", " +
                        std::to_string(hi) + ")");
  }
}

}  // namespace detail

/*
 * Quadratic-form ordering of the spectral Dirichlet, restricted and spectral
 * Neumann forms: DSp > DR > NSp for s in (0,1), reversed for s in (-1,0) and
 * (1,2).  For s < 0 the suite is drawn with zero mean, which covers both side
 * conditions.  For s in (1,2) the forms are recomputed from v = -Delta_h u at
 * order s - 2; the two routes must give the same ordering and agree to 3%.
 */
inline std::vector<ComparisonReport> verify_theorem1(const DomainPtr& d, const std::vector<double>& s_list,
                                                     const TestSuiteSpec& suite, const RunOptions& opt = {}) {
  detail::require_orders(s_list, -1.0, 2.0, "verify_theorem1");
  const EigenBasis bd = eigensystem(d, BasisKind::dirichlet);
  const EigenBasis bn = eigensystem(d, BasisKind::neumann);
  TestSuiteSpec zsuite = suite;
  zsuite.sign = SignConstraint::zero_mean;
  bool need_plain = false, need_zero = false;
  for (double s : s_list) (s < 0.0 ? need_zero : need_plain) = true;
  const auto plain = need_plain ? generate_test_functions(suite, d) : std::vector<GridFunction>{};
  const auto zero = need_zero ? generate_test_functions(zsuite, d) : std::vector<GridFunction>{};
  const std::size_t m = suite.count;
  std::function<ComparisonReport(std::size_t)> body = [&](std::size_t c) {
    const double s = s_list[c / m];
    const std::size_t k = c % m;
    const std::string id = detail::case_id("t1", s, k);
    return detail::guarded(id, "theorem1", s, [&] {
      const GridFunction& u = s < 0.0 ? zero[k] : plain[k];
      ComparisonReport r;
      r.id = id;
      r.check = "theorem1";
      r.s = s;
      r.u_label = u.label();
      r.seed = suite.seed;
      if (s < 0.0) r.note = "suite drawn with zero mean (negative order)";
      const FormValue dsp = spectral_form(u, s, bd);
      const FormValue dr = restricted_form(u, s);
      const FormValue nsp = spectral_form(u, s, bn);
      r.forms = {{"Q_DSp", dsp}, {"Q_DR", dr}, {"Q_NSp", nsp}};
      const double scale = std::max({std::abs(dsp.value), std::abs(dr.value), std::abs(nsp.value)});
      const Rel op = detail::flipped(s > 0.0 && s < 1.0 ? Rel::greater : Rel::less, opt.inject_violation);
      r.relations.push_back({"Q_DSp", "Q_DR", op, dsp.value, dr.value, dsp.error_estimate + dr.error_estimate, scale});
      r.relations.push_back({"Q_DR", "Q_NSp", op, dr.value, nsp.value, dr.error_estimate + nsp.error_estimate, scale});
      bool cross_fail = false;
      if (s > 1.0) {
        const GridFunction v = negative_laplacian(u);
        const double s2 = s - 2.0;
        const FormValue dsp2 = spectral_form(v, s2, bd);
        const FormValue dr2 = restricted_form(v, s2);
        const FormValue nsp2 = spectral_form(v, s2, bn);
        r.forms.push_back({"Q_DSp_reduced", dsp2});
        r.forms.push_back({"Q_DR_reduced", dr2});
        r.forms.push_back({"Q_NSp_reduced", nsp2});
        double worst = 0.0;
        for (auto [a, b] : {std::pair{dsp.value, dsp2.value}, std::pair{dr.value, dr2.value}, std::pair{nsp.value, nsp2.value}})
          worst = std::max(worst, std::abs(a - b) / std::max(std::abs(a), 1e-300));
        r.extra.push_back({"reduction_max_rel_diff", worst});
        const bool same_order = ((dsp.value < dr.value) == (dsp2.value < dr2.value)) &&
                                ((dr.value < nsp.value) == (dr2.value < nsp2.value));
        r.extra.push_back({"reduction_same_ordering", same_order ? 1.0 : 0.0});
        if (worst > 0.03 || !same_order) {
          cross_fail = true;
          r.note = "direct and reduced routes disagree";
        }
      }
      detail::finalize(r, cross_fail);
      return r;
    });
  };
  return detail::parallel_map<ComparisonReport>(s_list.size() * m, opt.threads, body);
}

/*
 * Pointwise comparisons for nonnegative u on interior nodes at least
 * opt.exclusion * h from the boundary:
 *   A (s in (0,1)):  DSp u > DR u;
 *   B (s in (-1,0)): DSp u < DR u;
 *   C (s in (0,1), convex Omega only): DR u > NSp u.
 */
inline std::vector<ComparisonReport> verify_theorem2(const DomainPtr& d, const std::vector<double>& s_list,
                                                     const TestSuiteSpec& suite, const RunOptions& opt = {},
                                                     PartC c_mode = PartC::automatic) {
  detail::require_orders(s_list, -1.0, 1.0, "verify_theorem2");
  if (suite.sign != SignConstraint::nonnegative) throw DomainError("verify_theorem2: the suite must be nonnegative");
  for (double s : s_list)
    if (s < 0.0 && d->dim() == 1 && s <= -0.5)
      throw SideConditionError("verify_theorem2: s <= -1/2 on an interval needs (u,1) = 0, impossible for u >= 0");
  if (c_mode == PartC::required && !d->convex())
    throw DomainError("verify_theorem2: part C is stated for convex domains only");
  const bool part_c = c_mode != PartC::skip && d->convex();
  const EigenBasis bd = eigensystem(d, BasisKind::dirichlet);
  std::optional<EigenBasis> bn;
  if (part_c) bn = eigensystem(d, BasisKind::neumann);
  const auto fns = generate_test_functions(suite, d);
  std::size_t excluded = 0;
  const auto nodes = detail::interior_eval_nodes(*d, opt.exclusion, &excluded);
  struct Job {
    double s;
    std::size_t k;
    char part;
  };
  std::vector<Job> jobs;
  for (double s : s_list)
    for (std::size_t k = 0; k < fns.size(); ++k) {
      if (s > 0.0) {
        jobs.push_back({s, k, 'A'});
        if (part_c) jobs.push_back({s, k, 'C'});
      } else {
        jobs.push_back({s, k, 'B'});
      }
    }
  std::function<ComparisonReport(std::size_t)> body = [&](std::size_t c) {
    const Job j = jobs[c];
    const std::string id = detail::case_id(std::string("t2") + j.part, j.s, j.k);
    return detail::guarded(id, std::string("theorem2") + j.part, j.s, [&] {
      const GridFunction& u = fns[j.k];
      ComparisonReport r;
      r.id = id;
      r.check = std::string("theorem2") + j.part;
      r.s = j.s;
      r.u_label = u.label();
      r.seed = suite.seed;
      const double s = j.s;
      Pointwise p;
      if (j.part == 'A') {
        p = detail::make_pointwise(*d, "DSp u", "DR u", detail::flipped(Rel::greater, opt.inject_violation), nodes,
                                   spectral_apply(u, s, bd), restricted_apply(u, s, nodes));
      } else if (j.part == 'B') {
        p = detail::make_pointwise(*d, "DSp u", "DR u", detail::flipped(Rel::less, opt.inject_violation), nodes,
                                   spectral_apply(u, s, bd), negative_restricted_apply(u, -s));
      } else {
        p = detail::make_pointwise(*d, "DR u", "NSp u", detail::flipped(Rel::greater, opt.inject_violation), nodes,
                                   restricted_apply(u, s, nodes), spectral_apply(u, s, *bn));
      }
      p.excluded = excluded;
      r.pointwise.push_back(std::move(p));
      detail::finalize(r);
      return r;
    });
  };
  return detail::parallel_map<ComparisonReport>(jobs.size(), opt.threads, body);
}

/*
 * Dumbbell for the counterexample: unit-height lobes 26/31 wide joined by a
 * channel 11/31 long, h = 1/(ny - 1).  ny = 32 gives the 64 x 32 grid.
 */
inline DomainPtr example_dumbbell(std::size_t ny, double channel_width, bool split = false) {
  if (ny < 8) throw GridError("example_dumbbell: need at least 8 nodes across");
  const double cells = static_cast<double>(ny - 1);
  const double lobe = std::round(26.0 / 31.0 * cells), channel = std::round(11.0 / 31.0 * cells);
  DumbbellSpec spec;
  spec.lobe_height = 1.0;
  spec.lobe_width = lobe / cells;
  spec.channel_length = channel / cells;
  spec.channel_width = channel_width;
  spec.ny = ny;
  spec.nx = static_cast<std::size_t>(2.0 * lobe + channel) + 1;
  return split ? make_split_lobes(spec) : make_dumbbell(spec);
}

/// Nonnegative bump in the first lobe, next to the channel mouth, 2h clear of the lobe boundary.
inline GridFunction lobe_bump(const DomainPtr& d) {
  const auto lobe = d->region_nodes(Region::lobe1);
  if (lobe.empty()) throw GridError("lobe_bump: domain has no first lobe");
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (std::size_t i : lobe) {
    x0 = std::min(x0, d->x(i));
    x1 = std::max(x1, d->x(i));
    y0 = std::min(y0, d->y(i));
    y1 = std::max(y1, d->y(i));
  }
  const double h = d->h();
  Bump b;
  b.radius = std::min(0.5 * (y1 - y0), 0.5 * (x1 - x0)) - 2.0 * h;
  b.radius = std::min(b.radius, 0.25);
  if (b.radius < 4.0 * h) throw GridError("lobe_bump: first lobe too small for the grid");
  b.center = {x1 + h - 2.0 * h - b.radius, 0.5 * (y0 + y1)};
  b.amplitude = 1.0;
  std::ostringstream os;
  os << std::setprecision(6) << "lobe1 bump(c=" << b.center[0] << ',' << b.center[1] << " r=" << b.radius << ')';
  return bump_function(d, {b}, os.str());
}

/*
 * Non-convex counterexample.  u >= 0 is supported in the first lobe; on the
 * second lobe the restricted operator is compared with the spectral Neumann
 * one.  Connected domain: pass iff DR u < NSp u at some node of Omega_2 beyond
 * the error budget.  Disconnected lobes: NSp u must vanish on Omega_2 (within
 * its budget) and DR u < 0 there.
 */
inline ComparisonReport counterexample_nonconvex(const DomainPtr& d, double s, const RunOptions& opt = {}) {
  if (!(s > 0.0 && s < 1.0)) throw DomainError("counterexample: s must lie in (0,1)");
  const std::string id = d->components() > 1 ? "counterexample-split" : "counterexample-channel";
  return detail::guarded(id, "counterexample", s, [&] {
    const GridFunction u = lobe_bump(d);
    std::vector<std::size_t> nodes;
    std::size_t excluded = 0;
    for (std::size_t i : d->region_nodes(Region::lobe2)) {
      if (d->box_distance(i) >= 2.0 * d->h() * (1.0 - 1e-12)) nodes.push_back(i);
      else ++excluded;
    }
    if (nodes.empty()) throw GridError("counterexample: second lobe has no evaluation nodes");
    const EigenBasis bn = eigensystem(d, BasisKind::neumann);
    const FieldValue dr = restricted_apply(u, s, nodes);
    const FieldValue nsp = spectral_apply(u, s, bn);
    ComparisonReport r;
    r.id = id;
    r.check = "counterexample";
    r.s = s;
    r.u_label = u.label();
    r.extra.push_back({"components", static_cast<double>(d->components())});
    if (d->components() == 1) {
      Pointwise p = detail::make_pointwise(*d, "NSp u", "DR u", detail::flipped(Rel::greater, opt.inject_violation), nodes, nsp, dr);
      // The negated claim is "NSp u <= DR u at every node".
      p.existential = !opt.inject_violation;
      p.excluded = excluded;
      r.extra.push_back({"violation_nodes", static_cast<double>(p.holding())});
      r.pointwise.push_back(std::move(p));
      detail::finalize(r);
      if (r.verdict != Verdict::pass && !opt.inject_violation) {
        // No witness is not evidence against the example; it calls for a thinner channel.
        r.verdict = Verdict::inconclusive;
        r.note = "no violation beyond the error budget: shrink the channel width";
      }
    } else {
      // NSp u == 0 on Omega_2: the equality is checked against the reported error of NSp.
      FieldValue zero{GridFunction(d), GridFunction(d)};
      Pointwise vanish = detail::make_pointwise(*d, "|NSp u| budget", "|NSp u|", Rel::greater, nodes, nsp, zero);
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        vanish.lhs_values[k] = nsp.error[nodes[k]] + 1e-12 * nsp.values.max_abs();
        vanish.rhs_values[k] = std::abs(nsp.values[nodes[k]]);
        vanish.budget[k] = 0.0;
      }
      vanish.op = detail::flipped(Rel::greater, opt.inject_violation);
      vanish.scale = std::max(dr.values.max_abs(), 1e-300);
      vanish.excluded = excluded;
      Pointwise neg = detail::make_pointwise(*d, "0", "DR u", detail::flipped(Rel::greater, opt.inject_violation), nodes, zero, dr);
      neg.excluded = excluded;
      r.extra.push_back({"max_abs_nsp_on_lobe2", [&] {
                           double m = 0.0;
                           for (std::size_t i : nodes) m = std::max(m, std::abs(nsp.values[i]));
                           return m;
                         }()});
      r.pointwise.push_back(std::move(vanish));
      r.pointwise.push_back(std::move(neg));
      detail::finalize(r);
    }
    return r;
  });
}

/*
 * |u|-contraction: Q[u] > Q[|u|] for sign-changing u and the four forms
 * (restricted, spectral Dirichlet, regional, spectral Neumann); equality for
 * u >= 0.
 */
inline std::vector<ComparisonReport> verify_theorem3(const DomainPtr& d, const std::vector<double>& s_list,
                                                     const TestSuiteSpec& suite, const RunOptions& opt = {}) {
  detail::require_orders(s_list, 0.0, 1.0, "verify_theorem3");
  const EigenBasis bd = eigensystem(d, BasisKind::dirichlet);
  const EigenBasis bn = eigensystem(d, BasisKind::neumann);
  const auto fns = generate_test_functions(suite, d);
  const std::size_t m = fns.size();
  std::function<ComparisonReport(std::size_t)> body = [&](std::size_t c) {
    const double s = s_list[c / m];
    const std::size_t k = c % m;
    const std::string id = detail::case_id("t3", s, k);
    return detail::guarded(id, "theorem3", s, [&] {
      const GridFunction& u = fns[k];
      const GridFunction a = u.abs();
      ComparisonReport r;
      r.id = id;
      r.check = "theorem3";
      r.s = s;
      r.u_label = u.label();
      r.seed = suite.seed;
      const bool nonneg = u.min() >= 0.0;
      const Rel op = detail::flipped(nonneg ? Rel::equal : Rel::greater, opt.inject_violation);
      auto add = [&](const std::string& name, const FormValue& fu, const FormValue& fa) {
        r.forms.push_back({name + "[u]", fu});
        r.forms.push_back({name + "[|u|]", fa});
        Relation rel{name + "[u]", name + "[|u|]", op, fu.value, fa.value, fu.error_estimate + fa.error_estimate,
                     std::max(std::abs(fu.value), std::abs(fa.value))};
        if (op == Rel::equal) rel.budget = 0.0;
        r.relations.push_back(rel);
      };
      add("Q_DR", restricted_form_singular(u, s), restricted_form_singular(a, s));
      add("Q_DSp", spectral_form(u, s, bd), spectral_form(a, s, bd));
      add("Q_NR", regional_form(u, s), regional_form(a, s));
      add("Q_NSp", spectral_form(u, s, bn), spectral_form(a, s, bn));
      detail::finalize(r);
      return r;
    });
  };
  return detail::parallel_map<ComparisonReport>(s_list.size() * m, opt.threads, body);
}

/// A pair u+ , u- of bumps with supports separated by at least `gap` (in units of h).
struct DisjointPair {
  GridFunction plus, minus;
  std::string label;
};

inline std::vector<DisjointPair> disjoint_pairs(const DomainPtr& d, std::size_t count, std::uint64_t seed,
                                                double gap_h = 4.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double h = d->h();
  // Work in the bounding box of the mask; u+ on the left part, u- on the right part.
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (std::size_t i : d->mask_nodes()) {
    x0 = std::min(x0, d->x(i));
    x1 = std::max(x1, d->x(i));
    y0 = std::min(y0, d->y(i));
    y1 = std::max(y1, d->y(i));
  }
  const double L = x1 - x0;
  std::vector<DisjointPair> out;
  for (std::size_t n = 0; n < count; ++n) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 500) throw GridError("disjoint_pairs: cannot place separated bumps at this resolution");
      Bump p, q;
      p.radius = std::max((0.07 + 0.08 * unit(rng)) * L, 8.0 * h);
      q.radius = std::max((0.07 + 0.08 * unit(rng)) * L, 8.0 * h);
      p.center = {x0 + (0.15 + 0.25 * unit(rng)) * L, 0.0};
      q.center = {x0 + (0.6 + 0.25 * unit(rng)) * L, 0.0};
      if (d->dim() == 2) {
        p.center[1] = y0 + (0.3 + 0.4 * unit(rng)) * (y1 - y0);
        q.center[1] = y0 + (0.3 + 0.4 * unit(rng)) * (y1 - y0);
      }
      p.amplitude = 0.5 + unit(rng);
      q.amplitude = 0.5 + unit(rng);
      const double dist = std::hypot(q.center[0] - p.center[0], q.center[1] - p.center[1]);
      if (dist - p.radius - q.radius < gap_h * h) continue;
      GridFunction a = bump_function(d, {p}), b = bump_function(d, {q});
      // Both bumps must sit inside the mask with a 2h margin.
      if (!a.supported_in_mask(2.0 * h) || !b.supported_in_mask(2.0 * h)) continue;
      std::ostringstream os;
      os << std::setprecision(6) << "pair#" << n << ":seed=" << seed << " plus(c=" << p.center[0];
      if (d->dim() == 2) os << ',' << p.center[1];
      os << " r=" << p.radius << " a=" << p.amplitude << ") minus(c=" << q.center[0];
      if (d->dim() == 2) os << ',' << q.center[1];
      os << " r=" << q.radius << " a=" << q.amplitude << ')';
      out.push_back({std::move(a), std::move(b), os.str()});
      break;
    }
  }
  return out;
}

/*
 * Reversal for s in (1, 3/2): Q_DR[u] < Q_DR[|u|] with u = u+ - u-, and the
 * identity Q[|u|] - Q[u] = -4 c_{n,s} iint u+(x) u-(y) |x-y|^{-n-2s} to 2%.
 */
inline std::vector<ComparisonReport> verify_theorem4(const DomainPtr& d, const std::vector<double>& s_list,
                                                     std::size_t count, std::uint64_t seed, const RunOptions& opt = {}) {
  detail::require_orders(s_list, 1.0, 1.5, "verify_theorem4");
  const auto pairs = disjoint_pairs(d, count, seed);
  const std::size_t m = pairs.size();
  std::function<ComparisonReport(std::size_t)> body = [&](std::size_t c) {
    const double s = s_list[c / m];
    const std::size_t k = c % m;
    const std::string id = detail::case_id("t4", s, k);
    return detail::guarded(id, "theorem4", s, [&] {
      const auto& pr = pairs[k];
      GridFunction u = pr.plus;
      u -= pr.minus;
      const GridFunction a = u.abs();
      ComparisonReport r;
      r.id = id;
      r.check = "theorem4";
      r.s = s;
      r.u_label = pr.label;
      r.seed = seed;
      const FormValue qu = restricted_form(u, s), qa = restricted_form(a, s);
      const FormValue inter = interaction_integral(pr.plus, pr.minus, s);
      const double cns = specfun::c_ns(d->dim(), s).value;
      r.forms = {{"Q_DR[u]", qu}, {"Q_DR[|u|]", qa}, {"interaction", inter}};
      r.relations.push_back({"Q_DR[u]", "Q_DR[|u|]", detail::flipped(Rel::less, opt.inject_violation), qu.value, qa.value,
                             qu.error_estimate + qa.error_estimate, std::max(std::abs(qu.value), std::abs(qa.value))});
      const double lhs = qa.value - qu.value;
      const double rhs = -4.0 * cns * inter.value;
      const double rel = std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-300);
      r.extra.push_back({"difference", lhs});
      r.extra.push_back({"interaction_identity", rhs});
      r.extra.push_back({"identity_rel_error", rel});
      const bool bad = rel > 0.02;
      if (bad) r.note = "interaction identity off by more than 2%";
      detail::finalize(r, bad);
      return r;
    });
  };
  return detail::parallel_map<ComparisonReport>(s_list.size() * m, opt.threads, body);
}

/*
 * Evidence for the spectral analogue of the reversal: distribution of
 * Q_DSp[|u|] - Q_DSp[u] over a sign-changing suite.  No verdict.
 */
inline ProbeReport probe_conjecture(const DomainPtr& d, const std::vector<double>& s_list, const TestSuiteSpec& suite,
                                    const RunOptions& opt = {}, const std::vector<GridFunction>& extra_functions = {}) {
  detail::require_orders(s_list, 1.0, 1.5, "probe_conjecture");
  const EigenBasis bd = eigensystem(d, BasisKind::dirichlet);
  auto fns = generate_test_functions(suite, d);
  fns.insert(fns.end(), extra_functions.begin(), extra_functions.end());
  const std::size_t m = fns.size();
  std::function<ProbeEntry(std::size_t)> body = [&](std::size_t c) {
    const double s = s_list[c / m];
    const std::size_t k = c % m;
    const GridFunction& u = fns[k];
    const FormValue qu = spectral_form(u, s, bd), qa = spectral_form(u.abs(), s, bd);
    ProbeEntry e;
    e.id = detail::case_id("probe", s, k);
    e.u_label = u.label();
    e.s = s;
    e.q_u = qu.value;
    e.q_abs = qa.value;
    e.difference = qa.value - qu.value;
    e.budget = qu.error_estimate + qa.error_estimate;
    e.candidate = e.difference < -e.budget;
    return e;
  };
  ProbeReport rep;
  rep.entries = detail::parallel_map<ProbeEntry>(s_list.size() * m, opt.threads, body);
  for (std::size_t a = 0; a < s_list.size(); ++a) {
    std::vector<double> v;
    ProbeSummary sm;
    sm.s = s_list[a];
    for (std::size_t k = 0; k < m; ++k) {
      const auto& e = rep.entries[a * m + k];
      v.push_back(e.difference);
      if (e.candidate) ++sm.candidates;
    }
    std::sort(v.begin(), v.end());
    sm.count = v.size();
    sm.min = v.front();
    sm.max = v.back();
    sm.median = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    rep.summary.push_back(sm);
  }
  return rep;
}

inline std::size_t count_verdict(const std::vector<ComparisonReport>& rs, Verdict v) {
  return static_cast<std::size_t>(std::count_if(rs.begin(), rs.end(), [v](const auto& r) { return r.verdict == v; }));
}

}  // namespace fraclap::harness

#endif  // FRACLAP_HARNESS_HPP
