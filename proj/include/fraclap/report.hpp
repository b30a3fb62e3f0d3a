#ifndef FRACLAP_REPORT_HPP
#define FRACLAP_REPORT_HPP

// JSON/CSV serialisation of harness results.  Needs nlohmann/json on the include path.

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fraclap/errors.hpp"
#include "fraclap/harness.hpp"

namespace fraclap::report {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kSchema = 1;

/// Run metadata: the command and the effective configuration, in insertion order.
struct RunInfo {
  std::string command;
  std::vector<std::pair<std::string, std::string>> config;
  std::string timestamp;  // empty: filled with the current UTC time
};

inline std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

namespace detail {

inline ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

inline ordered_json numbers(const std::vector<double>& v) {
  ordered_json a = ordered_json::array();
  for (double x : v) a.push_back(number(x));
  return a;
}

inline ordered_json header(const RunInfo& info) {
  ordered_json j;
  j["schema"] = kSchema;
  j["command"] = info.command;
  ordered_json cfg = ordered_json::object();
  for (const auto& [k, v] : info.config) cfg[k] = v;
  j["config"] = cfg;
  j["timestamp"] = info.timestamp.empty() ? utc_timestamp() : info.timestamp;
  return j;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw FormatError("cannot write " + p.string());
  os << text;
  if (!os) throw FormatError("write failed: " + p.string());
}

inline std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// CSV field quoting for labels containing separators.
inline std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

}  // namespace detail

inline ordered_json to_json(const FormValue& f) {
  return ordered_json{{"value", detail::number(f.value)}, {"error_estimate", detail::number(f.error_estimate)}};
}

inline ordered_json to_json(const harness::Relation& r) {
  return ordered_json{{"lhs", r.lhs},
                      {"op", harness::to_string(r.op)},
                      {"rhs", r.rhs},
                      {"lhs_value", detail::number(r.lhs_value)},
                      {"rhs_value", detail::number(r.rhs_value)},
                      {"gap", detail::number(r.gap())},
                      {"budget", detail::number(r.budget)},
                      {"scale", detail::number(r.scale)}};
}

inline ordered_json to_json(const harness::Pointwise& p) {
  ordered_json j;
  j["lhs"] = p.lhs;
  j["op"] = harness::to_string(p.op);
  j["rhs"] = p.rhs;
  j["quantifier"] = p.existential ? "some node" : "every node";
  j["evaluated"] = p.nodes.size();
  j["excluded"] = p.excluded;
  j["holding"] = p.holding();
  j["scale"] = detail::number(p.scale);
  j["nodes"] = p.nodes;
  j["x"] = detail::numbers(p.x);
  j["y"] = detail::numbers(p.y);
  j["lhs_values"] = detail::numbers(p.lhs_values);
  j["rhs_values"] = detail::numbers(p.rhs_values);
  j["budget"] = detail::numbers(p.budget);
  return j;
}

inline ordered_json to_json(const harness::ComparisonReport& r) {
  ordered_json j;
  j["id"] = r.id;
  j["theorem"] = r.check;
  j["s"] = detail::number(r.s);
  j["u"] = r.u_label;
  j["seed"] = r.seed;
  ordered_json forms = ordered_json::object();
  for (const auto& [name, f] : r.forms) forms[name] = to_json(f);
  j["forms"] = forms;
  ordered_json rel = ordered_json::array();
  for (const auto& x : r.relations) rel.push_back(to_json(x));
  j["relations"] = rel;
  ordered_json pw = ordered_json::array();
  for (const auto& x : r.pointwise) pw.push_back(to_json(x));
  j["pointwise"] = pw;
  ordered_json extra = ordered_json::object();
  for (const auto& [k, v] : r.extra) extra[k] = detail::number(v);
  j["checks"] = extra;
  j["margin"] = detail::number(r.margin);
  j["error_budget"] = detail::number(r.error_budget);
  j["verdict"] = harness::to_string(r.verdict);
  j["note"] = r.note;
  return j;
}

inline ordered_json to_json(const RunInfo& info, const std::vector<harness::ComparisonReport>& rs) {
  ordered_json j = detail::header(info);
  j["summary"] = ordered_json{{"cases", rs.size()},
                              {"pass", harness::count_verdict(rs, harness::Verdict::pass)},
                              {"fail", harness::count_verdict(rs, harness::Verdict::fail)},
                              {"inconclusive", harness::count_verdict(rs, harness::Verdict::inconclusive)}};
  ordered_json cases = ordered_json::array();
  for (const auto& r : rs) cases.push_back(to_json(r));
  j["cases"] = cases;
  return j;
}

/// One row per case.  Q columns hold the value on u (name or name[u]); empty when not computed.
inline void write_csv(std::ostream& os, const std::vector<harness::ComparisonReport>& rs) {
  os << "id,theorem,s,Q_DSp,Q_DR,Q_NSp,Q_NR,margin,budget,verdict\n";
  for (const auto& r : rs) {
    auto q = [&](const std::string& name) {
      const FormValue* f = r.form(name);
      if (!f) f = r.form(name + "[u]");
      return f ? detail::csv_number(f->value) : std::string();
    };
    os << detail::csv_text(r.id) << ',' << r.check << ',' << detail::csv_number(r.s) << ',' << q("Q_DSp") << ','
       << q("Q_DR") << ',' << q("Q_NSp") << ',' << q("Q_NR") << ',' << detail::csv_number(r.margin) << ','
       << detail::csv_number(r.error_budget) << ',' << harness::to_string(r.verdict) << '\n';
  }
}

/// Writes report.json and report.csv into dir (created if missing).
inline void write_reports(const std::filesystem::path& dir, const RunInfo& info,
                          const std::vector<harness::ComparisonReport>& rs) {
  std::filesystem::create_directories(dir);
  detail::write_file(dir / "report.json", to_json(info, rs).dump(2) + "\n");
  std::ostringstream csv;
  write_csv(csv, rs);
  detail::write_file(dir / "report.csv", csv.str());
}

inline ordered_json to_json(const RunInfo& info, const harness::ProbeReport& p) {
  ordered_json j = detail::header(info);
  ordered_json sm = ordered_json::array();
  for (const auto& s : p.summary)
    sm.push_back(ordered_json{{"s", detail::number(s.s)},
                              {"count", s.count},
                              {"min", detail::number(s.min)},
                              {"max", detail::number(s.max)},
                              {"median", detail::number(s.median)},
                              {"candidates", s.candidates}});
  j["summary"] = sm;
  ordered_json es = ordered_json::array();
  for (const auto& e : p.entries)
    es.push_back(ordered_json{{"id", e.id},
                              {"s", detail::number(e.s)},
                              {"u", e.u_label},
                              {"Q[u]", detail::number(e.q_u)},
                              {"Q[|u|]", detail::number(e.q_abs)},
                              {"difference", detail::number(e.difference)},
                              {"budget", detail::number(e.budget)},
                              {"candidate", e.candidate}});
  j["entries"] = es;
  return j;
}

/// Writes probe.json and probe.csv into dir.
inline void write_probe(const std::filesystem::path& dir, const RunInfo& info, const harness::ProbeReport& p) {
  std::filesystem::create_directories(dir);
  detail::write_file(dir / "probe.json", to_json(info, p).dump(2) + "\n");
  std::ostringstream csv;
  csv << "id,s,Q_u,Q_abs_u,difference,budget,candidate\n";
  for (const auto& e : p.entries)
    csv << e.id << ',' << detail::csv_number(e.s) << ',' << detail::csv_number(e.q_u) << ','
        << detail::csv_number(e.q_abs) << ',' << detail::csv_number(e.difference) << ','
        << detail::csv_number(e.budget) << ',' << (e.candidate ? 1 : 0) << '\n';
  detail::write_file(dir / "probe.csv", csv.str());
}

}  // namespace fraclap::report

#endif  // FRACLAP_REPORT_HPP
