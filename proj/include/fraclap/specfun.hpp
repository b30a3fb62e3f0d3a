#ifndef FRACLAP_SPECFUN_HPP
#define FRACLAP_SPECFUN_HPP

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "fraclap/errors.hpp"

namespace fraclap {

/// A computed value together with an estimate of its absolute error.
struct SpecialValue {
  double value = 0.0;
  double abs_err_bound = 0.0;
};

namespace specfun {

inline constexpr double kEps = std::numeric_limits<double>::epsilon();

namespace detail {

inline bool is_nonpositive_integer(double x) { return x <= 0.0 && std::floor(x) == x; }

/*
 * Alternating-series acceleration of Cohen, Rodriguez Villegas and Zagier for
 * sum_{k>=0} (-1)^k a_k, valid when a_k are moments of a positive measure.
 * The error decays like (3 + sqrt 8)^-n.
 */
template <class Term>
double alternating_sum(Term&& a, int n = 48) {
  double d = std::pow(3.0 + std::sqrt(8.0), n);
  d = 0.5 * (d + 1.0 / d);
  double b = -1.0, c = -d, s = 0.0;
  for (int k = 0; k < n; ++k) {
    c = b - c;
    s += c * a(k);
    b = (k + n) * (k - n) * b / ((k + 0.5) * (k + 1.0));
  }
  return s / d;
}

// Dirichlet eta for x > 0.
inline double eta(double x) {
  return alternating_sum([x](int k) { return std::pow(k + 1.0, -x); });
}

}  // namespace detail

/// Gamma function.  Backed by std::tgamma; poles are rejected.
inline SpecialValue gamma(double x) {
  if (!std::isfinite(x) || detail::is_nonpositive_integer(x))
    throw DomainError("gamma: pole at non-positive integer " + std::to_string(x));
  const double v = std::tgamma(x);
  return {v, 4.0 * kEps * std::abs(v)};
}

/// Riemann zeta for real x != 1 (eta series for x >= 1/2, reflection below).
inline double zeta(double x) {
  if (x == 1.0) throw DomainError("zeta: pole at 1");
  if (x == 0.0) return -0.5;
  if (x >= 0.5) {
    // 1 - 2^(1-x) without cancellation near x = 1.
    return detail::eta(x) / -std::expm1((1.0 - x) * std::numbers::ln2);
  }
  if (detail::is_nonpositive_integer(x) && std::fmod(-x, 2.0) == 0.0) return 0.0;  // trivial zeros
  const double y = 1.0 - x;
  return std::pow(2.0, x) * std::pow(std::numbers::pi, x - 1.0) *
         std::sin(0.5 * std::numbers::pi * x) * std::tgamma(y) * zeta(y);
}

/// Dirichlet beta function sum (-1)^k (2k+1)^-x for x > 0.
inline double dirichlet_beta(double x) {
  if (!(x > 0.0)) throw DomainError("dirichlet_beta: requires x > 0");
  return detail::alternating_sum([x](int k) { return std::pow(2.0 * k + 1.0, -x); });
}

/*
 * Analytically continued lattice sum  Z_n(t) = sum_{k in Z^n, k != 0} |k|^-t
 * for n = 1, 2:  Z_1(t) = 2 zeta(t),  Z_2(t) = 4 zeta(t/2) beta(t/2).
 */
inline double lattice_zeta(int n, double t) {
  if (n == 1) return 2.0 * zeta(t);
  if (n == 2) return 4.0 * zeta(0.5 * t) * dirichlet_beta(0.5 * t);
  throw DomainError("lattice_zeta: only n = 1, 2 supported");
}

/// c_{n,s} = 2^{2s} s Gamma((n+2s)/2) / (pi^{n/2} Gamma(1-s)); positive on (0,1), negative on (1,2).
inline SpecialValue c_ns(int n, double s) {
  if (n < 1) throw DomainError("c_ns: dimension must be >= 1");
  if (!(s > 0.0 && s < 2.0) || s == 1.0)
    throw DomainError("c_ns: order must lie in (0,1) u (1,2), got " + std::to_string(s));
  const double v = std::pow(4.0, s) * s / std::pow(std::numbers::pi, 0.5 * n) *
                   std::tgamma(0.5 * n + s) / std::tgamma(1.0 - s);
  return {v, 16.0 * kEps * std::abs(v)};
}

/// C_sigma = 4^sigma Gamma(1+sigma) / Gamma(1-sigma), the extension constant.
inline SpecialValue c_sigma(double sigma) {
  if (!(sigma > 0.0 && sigma < 1.0))
    throw DomainError("c_sigma: sigma must lie in (0,1), got " + std::to_string(sigma));
  const double v = std::pow(4.0, sigma) * std::tgamma(1.0 + sigma) / std::tgamma(1.0 - sigma);
  return {v, 12.0 * kEps * v};
}

/*
 * Modified Bessel function of the second kind K_s(t), 0 < s < 1, t > 0.
 *
 * t <= 2:  K_s = pi / (2 sin(s pi)) (I_{-s} - I_s) with the power series of
 *          I_{+-s}; the cancellation costs O(1/min(s, 1-s)) ulps.
 * t >  2:  K_s(t) = int_0^inf exp(-t cosh u) cosh(s u) du by the trapezoidal
 *          rule, which converges geometrically for this entire integrand.
 */
inline SpecialValue bessel_k(double s, double t) {
  if (!(s > 0.0 && s < 1.0)) throw DomainError("bessel_k: order must lie in (0,1)");
  if (!(t > 0.0)) throw DomainError("bessel_k: argument must be positive");
  if (t <= 2.0) {
    const double q = 0.25 * t * t;
    double tp = std::pow(0.5 * t, s) / std::tgamma(1.0 + s);
    double tm = std::pow(0.5 * t, -s) / std::tgamma(1.0 - s);
    double ip = tp, im = tm;
    for (int k = 1; k < 60; ++k) {
      tp *= q / (k * (k + s));
      tm *= q / (k * (k - s));
      ip += tp;
      im += tm;
      if (std::abs(tm) < 1e-18 * im && std::abs(tp) < 1e-18 * (ip + im)) break;
    }
    const double pref = 0.5 * std::numbers::pi / std::sin(std::numbers::pi * s);
    const double v = pref * (im - ip);
    return {v, 8.0 * kEps * pref * (im + ip)};
  }
  // Scaled integrand exp(-t (cosh u - 1)); the result is multiplied by exp(-t).
  const double h = 0.05;
  double sum = 0.5;  // u = 0 term, halved (integrand is even in u)
  for (int k = 1;; ++k) {
    const double u = k * h;
    const double f = std::exp(-t * (std::cosh(u) - 1.0)) * std::cosh(s * u);
    sum += f;
    if (f < 1e-18 * sum) break;
  }
  const double v = std::exp(-t) * h * sum;
  return {v, 8.0 * kEps * v};
}

/// Extension profile Q_s(t) = 2^{1-s} t^s K_s(t) / Gamma(s); Q_s(0) = 1.
inline SpecialValue q_profile(double s, double t) {
  if (!(s > 0.0 && s < 1.0)) throw DomainError("q_profile: order must lie in (0,1)");
  if (t < 0.0) throw DomainError("q_profile: argument must be non-negative");
  if (t == 0.0) return {1.0, 0.0};
  if (t > 700.0) return {0.0, std::numeric_limits<double>::min()};
  const SpecialValue k = bessel_k(s, t);
  const double f = std::pow(2.0, 1.0 - s) * std::pow(t, s) / std::tgamma(s);
  return {f * k.value, f * k.abs_err_bound + 8.0 * kEps * f * k.value};
}

/// Unit-mass normalisation of the whole-space Poisson kernel y^{2s} / (|x|^2 + y^2)^{(n+2s)/2}.
inline double poisson_kernel_constant_exact(int n, double s) {
  return std::tgamma(0.5 * n + s) / (std::pow(std::numbers::pi, 0.5 * n) * std::tgamma(s));
}

}  // namespace specfun
}  // namespace fraclap

#endif  // FRACLAP_SPECFUN_HPP
