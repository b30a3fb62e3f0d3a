#ifndef FRACLAP_ORDER_HPP
#define FRACLAP_ORDER_HPP

#include <cmath>
#include <string>

#include "fraclap/errors.hpp"
#include "fraclap/grid.hpp"

namespace fraclap {

enum class Regime { negative, low, high };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::negative: return "negative";
    case Regime::low: return "low";
    case Regime::high: return "high";
  }
  return "?";
}

/*
 * Order s of a fractional power, s in (-1,0) u (0,1) u (1,2).  Implicitly
 * constructible from double so call sites read naturally; use unchecked() for
 * the integer orders needed by consistency checks (s = 1, s = 1/2 powers of
 * s = 1 quantities, ...).
 */
class FracOrder {
 public:
  FracOrder(double s) : s_(s) {  // NOLINT(google-explicit-constructor)
    if (!std::isfinite(s) || !(s > -1.0 && s < 2.0) || s == 0.0 || s == 1.0)
      throw DomainError("order must lie in (-1,0) u (0,1) u (1,2), got " + std::to_string(s));
  }
  static FracOrder unchecked(double s) {
    FracOrder o;
    o.s_ = s;
    return o;
  }

  double value() const { return s_; }
  operator double() const { return s_; }  // NOLINT(google-explicit-constructor)
  Regime regime() const { return s_ < 0.0 ? Regime::negative : (s_ < 1.0 ? Regime::low : Regime::high); }

  /// Spectral Neumann forms of negative order live on zero-mean functions.
  bool neumann_needs_zero_mean() const { return s_ < 0.0; }
  /// Whole-space multiplier |xi|^{2s} is integrable at 0 only for n + 2s > 0 unless (u,1) = 0.
  bool restricted_needs_zero_mean(int dim) const { return s_ < 0.0 && dim + 2.0 * s_ <= 0.0; }

 private:
  FracOrder() = default;
  double s_ = 0.5;
};

/// A scalar result with the discretisation error estimate reported by its producer.
struct FormValue {
  double value = 0.0;
  double error_estimate = 0.0;
};

/// A nodal result with a per-node error estimate.
struct FieldValue {
  GridFunction values;
  GridFunction error;

  double max_error() const { return error.max_abs(); }
};

namespace detail {

/// Throws unless (u, 1) vanishes to rounding level.
inline void require_zero_mean(const GridFunction& u, const char* what) {
  const double mean = integral(u);
  const double scale = std::sqrt(integral(indicator(u.domain_ptr()))) * l2_norm(u);
  if (std::abs(mean) > 1e-10 * std::max(scale, 1e-300))
    throw SideConditionError(std::string(what) + ": requires (u,1) = 0, got " + std::to_string(mean));
}

}  // namespace detail

}  // namespace fraclap

#endif  // FRACLAP_ORDER_HPP
