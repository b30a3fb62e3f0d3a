// fraclap: command line front end for the comparison checks and the extension solver.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fraclap/fraclap.hpp"
#include "fraclap/report.hpp"

namespace {

using namespace fraclap;
namespace fs = std::filesystem;

constexpr int kExitPass = 0;
constexpr int kExitFail = 1;
constexpr int kExitUsage = 2;

struct VerifyArgs {
  std::string theorem;
  std::string domain = "interval";
  std::vector<double> s;
  std::size_t suite_size = 0;
  std::uint64_t seed = 7;
  std::size_t resolution = 0;
  std::string out = ".";
  unsigned threads = 0;
  double exclusion = 4.0;
  double channel_width = 0.05;
  bool no_part_c = false;
  bool part_c = false;
  bool inject = false;
};

struct CounterArgs {
  double channel_width = 0.05;
  double s = 0.5;
  std::size_t resolution = 32;
  bool split = false;
  std::string out = ".";
  bool inject = false;
};

struct ExtendArgs {
  double sigma = 0.5;
  std::string geometry = "half-cylinder";
  std::string bc;
  std::string bottom = "trace";
  std::string domain = "interval";
  std::size_t resolution = 0;
  std::size_t levels = 128;
  std::uint64_t seed = 7;
  std::string out = ".";
};

struct ProbeArgs {
  std::string domain = "interval";
  std::vector<double> s{1.25};
  std::size_t suite_size = 50;
  std::uint64_t seed = 7;
  std::size_t resolution = 0;
  std::string out = ".";
  unsigned threads = 0;
};

struct TableArgs {
  std::string function = "c_ns";
  int n = 1;
  double s = 0.5;
  double from = 0.05, to = 1.95;
  std::size_t count = 20;
  std::string out;
};

std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

DomainPtr make_domain(const std::string& kind, std::size_t resolution, double channel_width) {
  if (kind == "interval") return make_interval(0.0, 1.0, resolution ? resolution : 257);
  if (kind == "square") {
    const std::size_t n = resolution ? resolution : 33;
    return make_rectangle(0.0, 1.0, 0.0, 1.0, n, n);
  }
  return harness::example_dumbbell(resolution ? resolution : 32, channel_width);
}

void print_cases(const std::vector<harness::ComparisonReport>& rs) {
  for (const auto& r : rs) {
    std::cout << r.id << ' ' << harness::to_string(r.verdict) << " margin=" << r.margin
              << " budget=" << r.error_budget;
    if (!r.note.empty()) std::cout << " (" << r.note << ')';
    std::cout << '\n';
  }
  std::cout << "summary: " << rs.size() << " cases, " << harness::count_verdict(rs, harness::Verdict::pass)
            << " pass, " << harness::count_verdict(rs, harness::Verdict::fail) << " fail, "
            << harness::count_verdict(rs, harness::Verdict::inconclusive) << " inconclusive\n";
}

int exit_code(const std::vector<harness::ComparisonReport>& rs) {
  return harness::count_verdict(rs, harness::Verdict::pass) == rs.size() ? kExitPass : kExitFail;
}

int run_verify(const VerifyArgs& a) {
  const DomainPtr d = make_domain(a.domain, a.resolution, a.channel_width);
  harness::RunOptions opt;
  opt.threads = a.threads;
  opt.inject_violation = a.inject;
  opt.exclusion = a.exclusion;
  std::vector<double> s = a.s;
  TestSuiteSpec suite;
  suite.seed = a.seed;
  std::vector<harness::ComparisonReport> rs;
  std::string resolution = std::to_string(d->nx()) + (d->dim() == 2 ? "x" + std::to_string(d->ny()) : "");
  if (a.theorem == "t1") {
    if (s.empty()) s = {-0.75, -0.5, -0.25, 0.25, 0.5, 0.75, 1.25, 1.5, 1.75};
    suite.count = a.suite_size ? a.suite_size : 20;
    rs = harness::verify_theorem1(d, s, suite, opt);
  } else if (a.theorem == "t2") {
    if (s.empty()) s = d->dim() == 1 ? std::vector<double>{0.5, -0.25} : std::vector<double>{0.5, -0.5};
    suite.count = a.suite_size ? a.suite_size : 20;
    suite.sign = SignConstraint::nonnegative;
    const harness::PartC c = a.no_part_c ? harness::PartC::skip
                                         : (a.part_c ? harness::PartC::required : harness::PartC::automatic);
    if (a.domain == "square" && a.resolution == 0) {
      // The positive-order comparisons need h = 1/96 to resolve their margins; the
      // negative-order ones are resolved at 33x33 and cost far more per node.
      std::vector<double> pos, neg;
      for (double v : s) (v > 0.0 ? pos : neg).push_back(v);
      if (!pos.empty()) rs = harness::verify_theorem2(make_domain("square", 97, 0.0), pos, suite, opt, c);
      if (!neg.empty()) {
        auto rn = harness::verify_theorem2(d, neg, suite, opt, c);
        rs.insert(rs.end(), rn.begin(), rn.end());
      }
      resolution = (pos.empty() ? "" : "97x97 for s > 0") + std::string(pos.empty() || neg.empty() ? "" : ", ") +
                   (neg.empty() ? "" : "33x33 for s < 0");
    } else {
      rs = harness::verify_theorem2(d, s, suite, opt, c);
    }
  } else if (a.theorem == "t3") {
    if (s.empty()) s = {0.25, 0.5, 0.75};
    suite.count = a.suite_size ? a.suite_size : 20;
    suite.sign = SignConstraint::sign_changing;
    rs = harness::verify_theorem3(d, s, suite, opt);
  } else {
    if (s.empty()) s = {1.1, 1.25, 1.4};
    suite.count = a.suite_size ? a.suite_size : 20;
    rs = harness::verify_theorem4(d, s, suite.count, suite.seed, opt);
  }
  report::RunInfo info;
  info.command = "verify " + a.theorem;
  info.config = {{"domain", a.domain},
                 {"resolution", resolution},
                 {"s", join(s)},
                 {"suite_size", std::to_string(suite.count)},
                 {"seed", std::to_string(a.seed)},
                 {"exclusion_h", std::to_string(a.exclusion)},
                 {"inject_violation", a.inject ? "true" : "false"}};
  report::write_reports(a.out, info, rs);
  print_cases(rs);
  return exit_code(rs);
}

int run_counterexample(const CounterArgs& a) {
  const DomainPtr d = harness::example_dumbbell(a.resolution, a.channel_width, a.split);
  harness::RunOptions opt;
  opt.inject_violation = a.inject;
  const auto r = harness::counterexample_nonconvex(d, a.s, opt);
  report::RunInfo info;
  info.command = "counterexample";
  info.config = {{"grid", std::to_string(d->nx()) + "x" + std::to_string(d->ny())},
                 {"channel_width", a.split ? "none" : std::to_string(a.channel_width)},
                 {"s", join({a.s})},
                 {"inject_violation", a.inject ? "true" : "false"}};
  report::write_reports(a.out, info, {r});
  print_cases({r});
  if (!r.pointwise.empty() && d->components() == 1)
    std::cout << "violation nodes in second lobe: " << r.pointwise.front().holding() << " of "
              << r.pointwise.front().nodes.size() << '\n';
  return exit_code({r});
}

int run_extend(const ExtendArgs& a) {
  const Geometry geometry = a.geometry == "half-space" ? Geometry::half_space : Geometry::half_cylinder;
  std::string bc = a.bc.empty() ? (geometry == Geometry::half_space ? "none" : "dirichlet") : a.bc;
  const LateralBC lateral = bc == "none" ? LateralBC::none : (bc == "dirichlet" ? LateralBC::dirichlet : LateralBC::neumann);
  const BottomBC bottom = a.bottom == "trace" ? BottomBC::trace : BottomBC::weighted_neumann;
  const DomainPtr d = make_domain(a.domain, a.resolution ? a.resolution : (a.domain == "interval" ? 129 : 33), 0.05);
  TestSuiteSpec suite;
  suite.count = 1;
  suite.seed = a.seed;
  const bool zero_mean = bottom == BottomBC::weighted_neumann &&
                         (lateral == LateralBC::neumann || (geometry == Geometry::half_space && d->dim() <= 2.0 * a.sigma));
  suite.sign = zero_mean ? SignConstraint::zero_mean : SignConstraint::nonnegative;
  const GridFunction u = generate_test_functions(suite, d).front();
  ExtensionOptions eo;
  eo.levels = a.levels;
  const ExtensionField f = solve_extension(u, a.sigma, geometry, lateral, bottom, eo);
  const double cs = specfun::c_sigma(a.sigma).value;
  const double order = bottom == BottomBC::trace ? a.sigma : -a.sigma;
  FormValue form;
  if (lateral == LateralBC::none) form = restricted_form(u, order);
  else form = spectral_form(u, order, eigensystem(d, lateral == LateralBC::dirichlet ? BasisKind::dirichlet : BasisKind::neumann));
  const EnergyValue e = bottom == BottomBC::trace ? energy(f) : dual_functional(f);
  const double predicted = bottom == BottomBC::trace ? cs / (2.0 * a.sigma) * e.value : -(2.0 * a.sigma / cs) * e.value;
  fs::create_directories(a.out);
  std::vector<std::size_t> levels;
  for (std::size_t k = 0; k < f.levels(); k += std::max<std::size_t>(1, f.levels() / 16)) levels.push_back(k);
  {
    std::ofstream os(fs::path(a.out) / "extension_slices.csv");
    write_slices_csv(os, f, levels);
  }
  {
    std::ofstream os(fs::path(a.out) / "extension.bin", std::ios::binary);
    write_binary(os, f);
  }
  report::ordered_json j;
  j["schema"] = report::kSchema;
  j["command"] = "extend";
  j["config"] = {{"sigma", a.sigma}, {"geometry", to_string(geometry)}, {"bc", to_string(lateral)},
                 {"bottom", to_string(bottom)}, {"domain", a.domain}, {"levels", a.levels}, {"seed", a.seed}};
  j["timestamp"] = report::utc_timestamp();
  j["u"] = u.label();
  j["energy"] = {{"value", e.value}, {"discretization_estimate", e.discretization_estimate}};
  j["residual"] = f.residual;
  j["form"] = report::to_json(form);
  j["form_from_energy"] = predicted;
  j["relative_difference"] = std::abs(predicted - form.value) / std::max(std::abs(form.value), 1e-300);
  std::ofstream(fs::path(a.out) / "extension.json") << j.dump(2) << '\n';
  std::cout << "extension sigma=" << a.sigma << ' ' << to_string(geometry) << '/' << to_string(lateral) << '/'
            << to_string(bottom) << ": form=" << form.value << " from energy=" << predicted
            << " rel.diff=" << j["relative_difference"].get<double>() << '\n';
  return kExitPass;
}

int run_probe(const ProbeArgs& a) {
  const DomainPtr d = make_domain(a.domain, a.resolution, 0.05);
  TestSuiteSpec suite;
  suite.count = a.suite_size;
  suite.seed = a.seed;
  suite.sign = SignConstraint::sign_changing;
  harness::RunOptions opt;
  opt.threads = a.threads;
  // The second Dirichlet eigenfunction: the simplest sign-changing candidate.
  const EigenBasis bd = eigensystem(d, BasisKind::dirichlet, 2);
  GridFunction phi2 = bd.mode(1);
  phi2.set_label("dirichlet eigenfunction 2");
  const auto rep = harness::probe_conjecture(d, a.s, suite, opt, {phi2});
  report::RunInfo info;
  info.command = "probe-conjecture";
  info.config = {{"domain", a.domain},
                 {"resolution", std::to_string(d->nx())},
                 {"s", join(a.s)},
                 {"suite_size", std::to_string(a.suite_size)},
                 {"seed", std::to_string(a.seed)}};
  report::write_probe(a.out, info, rep);
  for (const auto& sm : rep.summary) {
    std::cout << "s=" << sm.s << ": " << sm.count << " functions, Q[|u|]-Q[u] min=" << sm.min << " median=" << sm.median
              << " max=" << sm.max << '\n';
    if (sm.candidates)
      std::cout << "*** " << sm.candidates << " COUNTEREXAMPLE CANDIDATE(S) at s=" << sm.s << " (see probe.csv) ***\n";
  }
  return kExitPass;
}

int run_table(const TableArgs& a) {
  std::ofstream file;
  if (!a.out.empty()) {
    file.open(a.out);
    if (!file) throw FormatError("cannot write " + a.out);
  }
  std::ostream& os = a.out.empty() ? std::cout : file;
  os << std::setprecision(17) << (a.function == "q_profile" || a.function == "bessel_k" ? "t" : "x")
     << ",value,abs_err_bound\n";
  for (std::size_t k = 0; k < a.count; ++k) {
    const double x = a.count == 1 ? a.from : a.from + (a.to - a.from) * static_cast<double>(k) / static_cast<double>(a.count - 1);
    SpecialValue v;
    if (a.function == "c_ns") v = specfun::c_ns(a.n, x);
    else if (a.function == "c_sigma") v = specfun::c_sigma(x);
    else if (a.function == "gamma") v = specfun::gamma(x);
    else if (a.function == "q_profile") v = specfun::q_profile(a.s, x);
    else v = specfun::bessel_k(a.s, x);
    os << x << ',' << v.value << ',' << v.abs_err_bound << '\n';
  }
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fraclap: fractional Laplacians on intervals and masked grids, with comparison checks"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI/TOML file; keys are option names, one [section] per subcommand");
  app.fallthrough();

  VerifyArgs va;
  auto* verify = app.add_subcommand("verify", "check a comparison theorem on a test suite");
  verify->add_option("theorem", va.theorem, "t1 form ordering, t2 pointwise ordering, t3 |u| contraction, t4 reversal")
      ->required()
      ->check(CLI::IsMember({"t1", "t2", "t3", "t4"}));
  verify->add_option("--domain", va.domain, "interval, square or dumbbell")
      ->check(CLI::IsMember({"interval", "square", "dumbbell"}))
      ->capture_default_str();
  verify->add_option("--s", va.s, "orders, comma separated (default: the theorem's standard list)")->delimiter(',');
  verify->add_option("--suite-size", va.suite_size, "test functions per order (t4: pairs)");
  verify->add_option("--seed", va.seed, "suite seed")->capture_default_str();
  verify->add_option("--resolution", va.resolution, "nodes per axis (dumbbell: nodes across; default: interval 257, square 33, square t2 97 for s > 0)");
  verify->add_option("--out", va.out, "directory for report.json and report.csv")->capture_default_str();
  verify->add_option("--threads", va.threads, "worker threads (0: all cores)");
  verify->add_option("--exclusion", va.exclusion, "pointwise exclusion zone in units of h")->capture_default_str();
  verify->add_option("--channel-width", va.channel_width, "dumbbell channel width")->capture_default_str();
  verify->add_flag("--no-part-c", va.no_part_c, "t2: skip the restricted vs spectral Neumann comparison");
  verify->add_flag("--part-c", va.part_c, "t2: require the restricted vs spectral Neumann comparison (convex domains)")
      ->excludes("--no-part-c");
  verify->add_flag("--inject-violation", va.inject, "negate every asserted relation")->group("");

  CounterArgs ca;
  auto* counter = app.add_subcommand("counterexample", "non-convex dumbbell: restricted below spectral Neumann");
  counter->add_option("--channel-width", ca.channel_width, "channel width")->capture_default_str();
  counter->add_option("--s", ca.s, "order in (0,1)")->capture_default_str();
  counter->add_option("--resolution", ca.resolution, "nodes across the lobes (32 gives 64x32)")->capture_default_str();
  counter->add_flag("--split", ca.split, "remove the channel (two separate lobes)");
  counter->add_option("--out", ca.out, "report directory")->capture_default_str();
  counter->add_flag("--inject-violation", ca.inject, "negate every asserted relation")->group("");

  ExtendArgs ea;
  auto* extend = app.add_subcommand("extend", "solve the weighted extension problem and dump the field");
  extend->add_option("--sigma", ea.sigma, "order in (0,1)")->capture_default_str();
  extend->add_option("--geometry", ea.geometry, "half-space or half-cylinder")
      ->check(CLI::IsMember({"half-space", "half-cylinder"}))
      ->capture_default_str();
  extend->add_option("--bc", ea.bc, "lateral condition: none (half-space), dirichlet or neumann (half-cylinder)")
      ->check(CLI::IsMember({"none", "dirichlet", "neumann"}));
  extend->add_option("--bottom", ea.bottom, "trace (positive order) or weighted-neumann (negative order)")
      ->check(CLI::IsMember({"trace", "weighted-neumann"}))
      ->capture_default_str();
  extend->add_option("--domain", ea.domain, "interval or square")
      ->check(CLI::IsMember({"interval", "square"}))
      ->capture_default_str();
  extend->add_option("--resolution", ea.resolution, "nodes per axis");
  extend->add_option("--levels", ea.levels, "graded y-levels below the top of the core mesh")->capture_default_str();
  extend->add_option("--seed", ea.seed, "seed of the boundary datum")->capture_default_str();
  extend->add_option("--out", ea.out, "output directory")->capture_default_str();

  ProbeArgs pa;
  auto* probe = app.add_subcommand("probe-conjecture", "distribution of Q_DSp[|u|] - Q_DSp[u] for s in (1, 3/2)");
  probe->add_option("--domain", pa.domain, "interval or square")
      ->check(CLI::IsMember({"interval", "square"}))
      ->capture_default_str();
  probe->add_option("--s", pa.s, "orders, comma separated")->delimiter(',');
  probe->add_option("--suite-size", pa.suite_size, "sign-changing test functions")->capture_default_str();
  probe->add_option("--seed", pa.seed, "suite seed")->capture_default_str();
  probe->add_option("--resolution", pa.resolution, "nodes per axis");
  probe->add_option("--out", pa.out, "directory for probe.json and probe.csv")->capture_default_str();
  probe->add_option("--threads", pa.threads, "worker threads (0: all cores)");

  TableArgs ta;
  auto* table = app.add_subcommand("specfun-table", "tabulate a special function as CSV");
  table->add_option("--function", ta.function, "c_ns, c_sigma, gamma, q_profile or bessel_k")
      ->check(CLI::IsMember({"c_ns", "c_sigma", "gamma", "q_profile", "bessel_k"}))
      ->capture_default_str();
  table->add_option("--n", ta.n, "dimension for c_ns")->check(CLI::Range(1, 3))->capture_default_str();
  table->add_option("--s", ta.s, "order for q_profile and bessel_k")->capture_default_str();
  table->add_option("--from", ta.from, "first abscissa")->capture_default_str();
  table->add_option("--to", ta.to, "last abscissa")->capture_default_str();
  table->add_option("--count", ta.count, "number of rows")->check(CLI::PositiveNumber)->capture_default_str();
  table->add_option("--out", ta.out, "CSV file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (verify->parsed()) return run_verify(va);
    if (counter->parsed()) return run_counterexample(ca);
    if (extend->parsed()) return run_extend(ea);
    if (probe->parsed()) return run_probe(pa);
    return run_table(ta);
  } catch (const DomainError& e) {
    std::cerr << "fraclap: " << e.what() << '\n';
    return kExitUsage;
  } catch (const GridError& e) {
    std::cerr << "fraclap: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SideConditionError& e) {
    std::cerr << "fraclap: " << e.what() << '\n';
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "fraclap: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "fraclap: " << e.what() << '\n';
    return kExitFail;
  }
}
