#ifndef FRACLAP_QUADRATURE_HPP
#define FRACLAP_QUADRATURE_HPP

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <utility>
#include <vector>

namespace fraclap::quad {

struct Rule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

namespace detail {

inline Rule compute_gauss_legendre(int n) {
  Rule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute derivative at the converged root.
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = w;
    r.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  return r;
}

}  // namespace detail

/// Gauss-Legendre rule with n points on [-1, 1]; cached, thread-safe.
inline const Rule& gauss_legendre(int n) {
  static std::mutex mtx;
  static std::map<int, Rule> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::compute_gauss_legendre(n)).first;
  return it->second;
}

/// Integrates f over [a, b] with an n-point Gauss-Legendre rule.
template <class F>
double gauss(F&& f, double a, double b, int n) {
  const Rule& r = gauss_legendre(n);
  const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += r.weights[i] * f(c + hw * r.nodes[i]);
  return acc * hw;
}

/// Points and weights of a composite rule (absolute coordinates).
struct PointSet {
  std::vector<double> x;
  std::vector<double> w;

  void append_panel(double a, double b, int n) {
    const Rule& r = gauss_legendre(n);
    const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
    for (int i = 0; i < n; ++i) {
      x.push_back(c + hw * r.nodes[i]);
      w.push_back(hw * r.weights[i]);
    }
  }

  std::size_t size() const { return x.size(); }
};

/*
 * Composite rule on [0, upper] for integrands of the form t^alpha * g(t) with
 * g smooth and oscillating on the scale `panel`.  Uniform panels of width
 * <= panel cover [panel, upper]; the first panel is split geometrically
 * towards 0 (ratio `ratio`, `levels` times).  The piece [0, eps] left over is
 * returned in `eps` so the caller can add g(0) * eps^(alpha+1) / (alpha+1).
 */
struct GradedRule {
  PointSet points;
  double eps = 0.0;
};

inline GradedRule graded_rule(double upper, double panel, int order, int levels = 24,
                              double ratio = 0.2) {
  GradedRule g;
  if (panel > upper) panel = upper;
  double hi = panel;
  for (int k = 0; k < levels; ++k) {
    const double lo = hi * ratio;
    g.points.append_panel(lo, hi, order);
    hi = lo;
  }
  g.eps = hi;
  const int n_uniform = static_cast<int>(std::ceil((upper - panel) / panel - 1e-9));
  if (n_uniform > 0) {
    const double width = (upper - panel) / n_uniform;
    for (int k = 0; k < n_uniform; ++k)
      g.points.append_panel(panel + k * width, panel + (k + 1) * width, order);
  }
  return g;
}

/*
 * Tanh-sinh (double exponential) quadrature on [a, b].  Tolerates integrable
 * endpoint singularities; f is never evaluated at the endpoints.
 */
template <class F>
double tanh_sinh(F&& f, double a, double b, double rel_tol = 1e-14, int max_levels = 8) {
  const double hw = 0.5 * (b - a);
  const double half_pi = 0.5 * std::numbers::pi;
  auto term = [&](double t) {
    const double u = half_pi * std::sinh(t);
    const double ch = std::cosh(u);
    const double x = std::tanh(u);
    const double wt = half_pi * std::cosh(t) / (ch * ch);
    // Distance to the nearest endpoint computed without cancellation.
    const double dist = hw / (std::exp(std::abs(u)) * ch);
    const double pt = x >= 0 ? b - dist : a + dist;
    if (dist <= 0.0 || !(pt > a && pt < b)) return 0.0;
    return wt * f(pt);
  };
  // Wide enough that nodes reach ~1e-300 from the endpoints, so x^{-0.9}-type singularities are not truncated.
  const double tmax = 6.5;
  double step = 0.5;
  double sum = term(0.0);
  for (double t = step; t <= tmax; t += step) sum += term(t) + term(-t);
  double prev = sum * step;
  for (int level = 1; level <= max_levels; ++level) {
    step *= 0.5;
    for (double t = step; t <= tmax; t += 2.0 * step) sum += term(t) + term(-t);
    const double cur = sum * step;
    if (std::abs(cur - prev) <= rel_tol * std::abs(cur)) return cur * hw;
    prev = cur;
  }
  return prev * hw;
}

}  // namespace fraclap::quad

#endif  // FRACLAP_QUADRATURE_HPP
