#ifndef FRACLAP_RESTRICTED_HPP
#define FRACLAP_RESTRICTED_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "fraclap/errors.hpp"
#include "fraclap/grid.hpp"
#include "fraclap/order.hpp"
#include "fraclap/quadrature.hpp"
#include "fraclap/specfun.hpp"

namespace fraclap {

using cplx = std::complex<double>;

// --------------------------------------------------------------------------
// FFT of the zero-padded grid function (continuous-FT approximation).
// --------------------------------------------------------------------------

/*
 * u^(xi) = (2 pi)^{-n/2} h^n sum_j u_j exp(-i xi.x_j) on the lattice
 * xi_k = k * 2 pi / (pad * window), k = -M/2 .. M/2-1 per axis, stored
 * row-major with the x-frequency fastest.
 */
struct FourierData {
  int dim = 1;
  std::size_t pad_factor = 8;
  std::array<double, 2> window{};   // ambient extents
  std::array<double, 2> spacing{};  // frequency spacing per axis
  std::array<std::size_t, 2> bins{1, 1};
  std::vector<cplx> values;

  double xi(int axis, std::size_t k) const {
    return spacing[axis] * (static_cast<double>(k) - static_cast<double>(bins[axis] / 2));
  }
  cplx at(std::size_t kx, std::size_t ky = 0) const { return values[kx + bins[0] * ky]; }
  /// Index of the xi = 0 bin.
  cplx zero_frequency() const { return at(bins[0] / 2, dim == 2 ? bins[1] / 2 : 0); }
  /// Riemann sum of |u^|^2 over the frequency lattice.
  double plancherel_sum() const {
    double acc = 0.0;
    for (const cplx& v : values) acc += std::norm(v);
    return acc * spacing[0] * (dim == 2 ? spacing[1] : 1.0);
  }
};

inline FourierData fourier_transform(const GridFunction& u, std::size_t pad_factor = 8) {
  if (pad_factor < 4 || pad_factor > 64) throw DomainError("fourier_transform: pad_factor must lie in [4, 64]");
  const Domain& d = u.domain();
  FourierData f;
  f.dim = d.dim();
  f.pad_factor = pad_factor;
  const std::size_t ax = d.nx(), ay = d.ny();
  f.window = {d.extent(0), d.dim() == 2 ? d.extent(1) : 0.0};
  f.bins = {pad_factor * (ax - 1), d.dim() == 2 ? pad_factor * (ay - 1) : 1};
  f.spacing = {2.0 * std::numbers::pi / (static_cast<double>(f.bins[0]) * d.h()),
               d.dim() == 2 ? 2.0 * std::numbers::pi / (static_cast<double>(f.bins[1]) * d.h()) : 0.0};
  const std::size_t mx = f.bins[0], my = f.bins[1];
  std::vector<cplx> grid(mx * my, cplx(0.0));
  for (std::size_t j = 0; j < ay; ++j)
    for (std::size_t i = 0; i < ax; ++i) grid[i + mx * j] = u[d.index(i, j)];
  Eigen::FFT<double> fft;
  std::vector<cplx> in, out;
  in.resize(mx);
  for (std::size_t j = 0; j < my; ++j) {
    std::copy(grid.begin() + static_cast<long>(mx * j), grid.begin() + static_cast<long>(mx * (j + 1)), in.begin());
    fft.fwd(out, in);
    std::copy(out.begin(), out.end(), grid.begin() + static_cast<long>(mx * j));
  }
  if (my > 1) {
    in.resize(my);
    for (std::size_t i = 0; i < mx; ++i) {
      for (std::size_t j = 0; j < my; ++j) in[j] = grid[i + mx * j];
      fft.fwd(out, in);
      for (std::size_t j = 0; j < my; ++j) grid[i + mx * j] = out[j];
    }
  }
  const double scale = std::pow(d.h(), d.dim()) / std::pow(2.0 * std::numbers::pi, 0.5 * d.dim());
  f.values.assign(mx * my, cplx(0.0));
  for (std::size_t ky = 0; ky < my; ++ky) {
    const std::size_t sy = (ky + my - my / 2) % my;  // shifted bin -> FFT bin
    const double xy = f.dim == 2 ? f.xi(1, ky) : 0.0;
    for (std::size_t kx = 0; kx < mx; ++kx) {
      const std::size_t sx = (kx + mx - mx / 2) % mx;
      const double xx = f.xi(0, kx);
      const cplx phase = std::polar(1.0, -(xx * d.x0() + xy * d.y0()));
      f.values[kx + mx * ky] = scale * phase * grid[sx + mx * sy];
    }
  }
  return f;
}

/// CSV dump of a transform: "xi,re,im" or "xi_x,xi_y,re,im".
inline void write_fourier_csv(std::ostream& os, const FourierData& f) {
  os << (f.dim == 1 ? "xi,re,im\n" : "xi_x,xi_y,re,im\n") << std::setprecision(17);
  for (std::size_t ky = 0; ky < f.bins[1]; ++ky)
    for (std::size_t kx = 0; kx < f.bins[0]; ++kx) {
      os << f.xi(0, kx) << ',';
      if (f.dim == 2) os << f.xi(1, ky) << ',';
      const cplx v = f.at(kx, ky);
      os << v.real() << ',' << v.imag() << '\n';
    }
}

namespace detail {

// --------------------------------------------------------------------------
// Direct evaluation of the trapezoidal Fourier transform on a radial rule.
// --------------------------------------------------------------------------

/// Dense box around the support of u with the transform evaluated relative to its centre.
struct SupportBox {
  int dim = 1;
  double h = 0.0;
  std::size_t i0 = 0, i1 = 0, j0 = 0, j1 = 0;
  std::array<double, 2> centre{};
  double radius = 0.0;  // max distance from centre to a support node
  std::vector<double> vals;  // (i1-i0+1) x (j1-j0+1), x fastest
  bool empty = true;

  std::size_t width() const { return i1 - i0 + 1; }
  std::size_t height() const { return j1 - j0 + 1; }

  /// (2 pi)^{n/2} u^(xi) e^{i xi.c} / h^n.
  cplx transform(double kx, double ky) const {
    const cplx zx = std::polar(1.0, -kx * h), zy = std::polar(1.0, -ky * h);
    const double ox = (static_cast<double>(i0) * h) - centre[0];
    const double oy = (static_cast<double>(j0) * h) - centre[1];
    cplx row = std::polar(1.0, -(kx * ox + (dim == 2 ? ky * oy : 0.0)));
    cplx acc = 0.0;
    const std::size_t w = width();
    for (std::size_t j = 0; j < height(); ++j) {
      cplx p = row;
      const double* v = vals.data() + w * j;
      for (std::size_t i = 0; i < w; ++i) {
        acc += v[i] * p;
        p *= zx;
      }
      row *= zy;
    }
    return acc;
  }
};

inline SupportBox support_box(const GridFunction& u) {
  const Domain& d = u.domain();
  SupportBox b;
  b.dim = d.dim();
  b.h = d.h();
  std::size_t i0 = d.nx(), i1 = 0, j0 = d.ny(), j1 = 0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (u[k] == 0.0) continue;
    i0 = std::min(i0, d.ix(k));
    i1 = std::max(i1, d.ix(k));
    j0 = std::min(j0, d.iy(k));
    j1 = std::max(j1, d.iy(k));
  }
  if (i0 > i1) return b;
  b.empty = false;
  b.i0 = i0;
  b.i1 = i1;
  b.j0 = j0;
  b.j1 = j1;
  // Coordinates inside the box are measured from the ambient origin (index 0).
  b.centre = {0.5 * static_cast<double>(i0 + i1) * d.h(), 0.5 * static_cast<double>(j0 + j1) * d.h()};
  b.vals.assign(b.width() * b.height(), 0.0);
  for (std::size_t j = j0; j <= j1; ++j)
    for (std::size_t i = i0; i <= i1; ++i) {
      const double v = u[d.index(i, j)];
      b.vals[(i - i0) + b.width() * (j - j0)] = v;
      if (v != 0.0)
        b.radius = std::max(b.radius, std::hypot(static_cast<double>(i) * d.h() - b.centre[0],
                                                 static_cast<double>(j) * d.h() - b.centre[1]));
    }
  return b;
}

/// Radial rule with angular sub-rules; each point carries the full (radial x angular) weight.
struct RadialPoint {
  double rho;
  double w;       // radial weight (angular weight folded into the samples)
  std::size_t first, count;  // range into the angle table
};

struct FrequencyRule {
  int dim = 1;
  std::vector<RadialPoint> radial;
  std::vector<std::array<double, 3>> angles;  // cos, sin, weight over [0, pi)
  double eps = 0.0;                           // leftover [0, eps] of the graded rule
  double upper = 0.0;
};

inline FrequencyRule frequency_rule(int dim, double upper, double panel, int order, double angular_radius) {
  FrequencyRule r;
  r.dim = dim;
  r.upper = upper;
  const quad::GradedRule g = quad::graded_rule(upper, panel, order);
  r.eps = g.eps;
  for (std::size_t k = 0; k < g.points.size(); ++k) {
    RadialPoint p{g.points.x[k], g.points.w[k], r.angles.size(), 1};
    if (dim == 1) {
      r.angles.push_back({1.0, 0.0, 1.0});
    } else {
      const std::size_t nt = 2 * static_cast<std::size_t>(std::ceil(p.rho * angular_radius)) + 24;
      p.count = nt;
      for (std::size_t m = 0; m < nt; ++m) {
        const double th = std::numbers::pi * static_cast<double>(m) / static_cast<double>(nt);
        r.angles.push_back({std::cos(th), std::sin(th), std::numbers::pi / static_cast<double>(nt)});
      }
    }
    r.radial.push_back(p);
  }
  return r;
}

inline double kernel_panel(double length) { return std::numbers::pi / std::max(length, 1e-300); }

}  // namespace detail

/*
 * Samples of G(rho) = int_{|xi| = rho} |u^|^2 on a graded radial rule, cached
 * so that restricted_form can be evaluated for many orders.  Two rules (12 and
 * 8 Gauss points per panel) give the quadrature error estimate.
 */
struct MultiplierSamples {
  int dim = 1;
  double upper = 0.0;
  double g0 = 0.0;  // G at rho = 0, divided by the leading power (|u^(0)|^2 * measure)
  bool zero_mean = false;
  struct Rule {
    std::vector<double> rho, w, g;
    double eps = 0.0;
  };
  Rule fine, coarse;
};

inline MultiplierSamples multiplier_samples(const GridFunction& u) {
  const Domain& d = u.domain();
  MultiplierSamples ms;
  ms.dim = d.dim();
  ms.upper = std::numbers::pi / d.h();
  const detail::SupportBox box = detail::support_box(u);
  if (box.empty) return ms;
  const double scale2 = std::pow(d.h(), 2 * d.dim()) / std::pow(2.0 * std::numbers::pi, d.dim());
  const double ell = std::max(2.0 * box.radius, 4.0 * d.h());
  const double panel = detail::kernel_panel(ell);
  // |u^(0)|^2 times the sphere measure (2 in 1-D, 2 pi in 2-D).
  double mass = 0.0;
  for (double v : box.vals) mass += v;
  ms.g0 = scale2 * mass * mass * (d.dim() == 1 ? 2.0 : 2.0 * std::numbers::pi);
  ms.zero_mean = std::abs(mass) <= 1e-12 * std::accumulate(box.vals.begin(), box.vals.end(), 0.0,
                                                          [](double a, double b) { return a + std::abs(b); });
  auto fill = [&](int order, MultiplierSamples::Rule& out) {
    const detail::FrequencyRule fr = detail::frequency_rule(d.dim(), ms.upper, panel, order, box.radius + d.h());
    out.eps = fr.eps;
    for (const auto& p : fr.radial) {
      double g = 0.0;
      for (std::size_t a = p.first; a < p.first + p.count; ++a) {
        const auto& ang = fr.angles[a];
        g += ang[2] * std::norm(box.transform(p.rho * ang[0], p.rho * ang[1]));
      }
      // Symmetry |u^(-xi)| = |u^(xi)|: factor 2 (two half-lines / two half-circles).
      out.rho.push_back(p.rho);
      out.w.push_back(p.w);
      out.g.push_back(2.0 * scale2 * g);
    }
  };
  fill(12, ms.fine);
  fill(8, ms.coarse);
  return ms;
}

namespace detail {

/// int_0^upper rho^alpha G(rho) d rho on one rule, split into octave pieces for the tail fit.
struct RadialIntegral {
  double total = 0.0, last_octave = 0.0, prev_octave = 0.0;
};

inline RadialIntegral radial_integral(const MultiplierSamples::Rule& r, double alpha, double g0,
                                      double upper) {
  RadialIntegral out;
  for (std::size_t k = 0; k < r.rho.size(); ++k) {
    const double v = r.w[k] * std::pow(r.rho[k], alpha) * r.g[k];
    out.total += v;
    if (r.rho[k] > 0.5 * upper) out.last_octave += v;
    else if (r.rho[k] > 0.25 * upper) out.prev_octave += v;
  }
  if (alpha > -1.0) out.total += g0 * std::pow(r.eps, alpha + 1.0) / (alpha + 1.0);
  return out;
}

/// Geometric continuation of the octave sequence beyond the cutoff.
inline double octave_tail(double last, double prev) {
  if (last == 0.0) return 0.0;
  const double ratio = last / prev;
  if (prev > 0.0 && ratio > 0.0 && ratio < 0.5) return last * ratio / (1.0 - ratio);
  return last;  // no clear decay: report the last octave itself
}

}  // namespace detail

/// int |xi|^{2s} |u^(xi)|^2 d xi from cached samples.
inline FormValue restricted_form(const MultiplierSamples& ms, FracOrder s) {
  if (ms.fine.rho.empty()) return {};
  if (s.restricted_needs_zero_mean(ms.dim) && !ms.zero_mean)
    throw SideConditionError("restricted form of this order requires (u,1) = 0");
  const double alpha = 2.0 * s.value() + (ms.dim == 2 ? 1.0 : 0.0);
  const auto f = detail::radial_integral(ms.fine, alpha, ms.g0, ms.upper);
  const auto c = detail::radial_integral(ms.coarse, alpha, ms.g0, ms.upper);
  const double tail = detail::octave_tail(f.last_octave, f.prev_octave);
  FormValue r;
  r.value = f.total + tail;
  r.error_estimate = std::abs(tail) + std::abs(f.total - c.total) + 1e-13 * std::abs(f.total);
  return r;
}

/// Multiplier form (qqR) of u extended by zero.
inline FormValue restricted_form(const GridFunction& u, FracOrder s) {
  if (s.restricted_needs_zero_mean(u.domain().dim())) detail::require_zero_mean(u, "restricted form");
  return restricted_form(multiplier_samples(u), s);
}

/*
 * (2 pi)^{-n/2} int |xi|^{2s} u^(xi) e^{i xi.x} d xi at the given nodes, i.e.
 * the Fourier-multiplier operator (-Delta)^s for any real s with n + 2s > 0
 * (or zero-mean u).  Used directly for negative orders and as an independent
 * oracle for the principal-value quadrature at positive orders.
 */
inline FieldValue fourier_multiplier_apply(const GridFunction& u, double s, const std::vector<std::size_t>& nodes) {
  const Domain& d = u.domain();
  FieldValue out{GridFunction(u.domain_ptr()), GridFunction(u.domain_ptr())};
  const detail::SupportBox box = detail::support_box(u);
  if (box.empty) return out;
  double mass = 0.0, amass = 0.0;
  for (double v : box.vals) {
    mass += v;
    amass += std::abs(v);
  }
  const bool zero_mean = std::abs(mass) <= 1e-12 * amass;
  const int n = d.dim();
  const double alpha = 2.0 * s + (n == 2 ? 1.0 : 0.0);
  if (alpha <= -1.0 && !zero_mean) throw SideConditionError("multiplier of this order requires (u,1) = 0");
  double reach = box.radius;
  for (std::size_t k : nodes)
    reach = std::max(reach, std::hypot(d.x(k) - d.x0() - box.centre[0], d.y(k) - d.y0() - box.centre[1]));
  const double upper = std::numbers::pi / d.h();
  const double panel = detail::kernel_panel(2.0 * std::max(reach, 2.0 * d.h()));
  const double scale = std::pow(d.h(), n) / std::pow(2.0 * std::numbers::pi, n);
  // 2 Re over half-lines / half-circles.
  const double sym = 2.0;
  const std::size_t ne = nodes.size();
  std::vector<double> rel_x(ne), rel_y(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    rel_x[e] = d.x(nodes[e]) - d.x0() - box.centre[0];
    rel_y[e] = d.y(nodes[e]) - d.y0() - box.centre[1];
  }
  struct Acc {
    std::vector<double> total, last, prev;
  };
  auto run = [&](int order) {
    Acc acc{std::vector<double>(ne, 0.0), std::vector<double>(ne, 0.0), std::vector<double>(ne, 0.0)};
    const detail::FrequencyRule fr = detail::frequency_rule(n, upper, panel, order, reach + d.h());
    for (const auto& p : fr.radial) {
      const double rw = p.w * std::pow(p.rho, alpha) * scale * sym;
      double* bucket = p.rho > 0.5 * upper ? acc.last.data() : (p.rho > 0.25 * upper ? acc.prev.data() : nullptr);
      for (std::size_t a = p.first; a < p.first + p.count; ++a) {
        const auto& ang = fr.angles[a];
        const double kx = p.rho * ang[0], ky = p.rho * ang[1];
        const cplx t = box.transform(kx, ky) * (rw * ang[2]);
        for (std::size_t e = 0; e < ne; ++e) {
          const double ph = kx * rel_x[e] + ky * rel_y[e];
          const double v = t.real() * std::cos(ph) - t.imag() * std::sin(ph);
          acc.total[e] += v;
          if (bucket) bucket[e] += v;
        }
      }
    }
    // Leftover [0, eps]: integrand ~ u^(0) rho^alpha times the sphere measure.
    if (alpha > -1.0) {
      const double g0 = scale * mass * (n == 1 ? 2.0 : 2.0 * std::numbers::pi);
      for (std::size_t e = 0; e < ne; ++e) acc.total[e] += g0 * std::pow(fr.eps, alpha + 1.0) / (alpha + 1.0);
    }
    return acc;
  };
  const Acc fine = run(12), coarse = run(8);
  for (std::size_t e = 0; e < ne; ++e) {
    const double tail = detail::octave_tail(std::abs(fine.last[e]), std::abs(fine.prev[e]));
    out.values[nodes[e]] = fine.total[e];
    out.error[nodes[e]] = tail + std::abs(fine.total[e] - coarse.total[e]) + 1e-13 * std::abs(fine.total[e]);
  }
  out.values.set_label("multiplier s=" + std::to_string(s));
  return out;
}

/// (-Delta)^{-sigma} u by Fourier inversion of |xi|^{-2 sigma} u^, read on the mask nodes.
inline FieldValue negative_restricted_apply(const GridFunction& u, double sigma) {
  if (!(sigma > 0.0 && sigma < 1.0)) throw DomainError("negative_restricted_apply: sigma must lie in (0,1)");
  if (FracOrder(-sigma).restricted_needs_zero_mean(u.domain().dim()))
    detail::require_zero_mean(u, "negative-order restricted operator");
  return fourier_multiplier_apply(u, -sigma, u.domain().mask_nodes());
}

// --------------------------------------------------------------------------
// Singular-integral representations on the infinite lattice hZ^n.
// --------------------------------------------------------------------------

namespace detail {

/// |k|^{-p} for integer offsets; row-major over |dx| <= nx, |dy| <= ny.
struct LatticeKernel {
  int dim;
  std::size_t nx, ny;
  std::vector<double> t;

  LatticeKernel(int dim_, std::size_t nx_, std::size_t ny_, double p) : dim(dim_), nx(nx_ + 1), ny(dim_ == 2 ? ny_ + 1 : 1) {
    t.assign(nx * ny, 0.0);
    for (std::size_t j = 0; j < ny; ++j)
      for (std::size_t i = 0; i < nx; ++i) {
        const double r2 = static_cast<double>(i * i + j * j);
        t[i + nx * j] = r2 == 0.0 ? 0.0 : std::pow(r2, -0.5 * p);
      }
  }
  double operator()(long di, long dj) const {
    return t[static_cast<std::size_t>(std::labs(di)) + nx * static_cast<std::size_t>(std::labs(dj))];
  }
};

/// Values of u on the sublattice of stride `step` (1 = full grid), zero outside the ambient box.
struct Lattice {
  const GridFunction* u;
  long step;
  double at(long i, long j) const {
    const Domain& d = u->domain();
    if (i < 0 || j < 0 || i >= static_cast<long>(d.nx()) || j >= static_cast<long>(d.ny())) return 0.0;
    return (*u)[d.index(static_cast<std::size_t>(i), static_cast<std::size_t>(j))];
  }
  // Derivatives along one axis in lattice units (h' = step * h), 4th-order central.
  double d1(long i, long j, int axis) const {
    const long s = step;
    auto v = [&](long k) { return axis == 0 ? at(i + k * s, j) : at(i, j + k * s); };
    return (v(-2) - 8.0 * v(-1) + 8.0 * v(1) - v(2)) / 12.0;
  }
  double d2(long i, long j, int axis) const {
    const long s = step;
    auto v = [&](long k) { return axis == 0 ? at(i + k * s, j) : at(i, j + k * s); };
    return (-v(-2) + 16.0 * v(-1) - 30.0 * v(0) + 16.0 * v(1) - v(2)) / 12.0;
  }
  double d3(long i, long j, int axis) const {
    const long s = step;
    auto v = [&](long k) { return axis == 0 ? at(i + k * s, j) : at(i, j + k * s); };
    return (v(2) - 2.0 * v(1) + 2.0 * v(-1) - v(-2)) / 2.0;
  }
  double d4(long i, long j, int axis) const {
    const long s = step;
    auto v = [&](long k) { return axis == 0 ? at(i + k * s, j) : at(i, j + k * s); };
    return v(-2) - 4.0 * v(-1) + 6.0 * v(0) - 4.0 * v(1) + v(2);
  }
};

struct LatticeConstants {
  double z0;   // Z_n(n + 2s)
  double z2;   // Z_n(n + 2s - 2)
  double z4;   // 2 zeta(2s - 3), 1-D only
};

inline LatticeConstants lattice_constants(int n, double s) {
  LatticeConstants c{};
  c.z0 = specfun::lattice_zeta(n, n + 2.0 * s);
  c.z2 = specfun::lattice_zeta(n, n + 2.0 * s - 2.0);
  c.z4 = n == 1 ? specfun::lattice_zeta(1, 2.0 * s - 3.0) : 0.0;
  return c;
}

/// Nodes (as lattice indices) where u is nonzero, restricted to a stride sublattice through the origin.
inline std::vector<std::array<long, 2>> lattice_support(const GridFunction& u, long step) {
  const Domain& d = u.domain();
  std::vector<std::array<long, 2>> out;
  for (std::size_t k = 0; k < d.size(); ++k) {
    const long i = static_cast<long>(d.ix(k)), j = static_cast<long>(d.iy(k));
    if (u[k] != 0.0 && i % step == 0 && j % step == 0) out.push_back({i, j});
  }
  return out;
}

/*
 * c h^{-2s} [u_x Z(n+2s) - sum_{k != 0} u_{x+k} |k|^{-n-2s}
 *            + (h^2 Lap u) Z(n+2s-2) / (2n) (+ (h^4 u'''') 2 zeta(2s-3) / 24 in 1-D)]
 * on the stride-`step` sublattice through x.
 */
inline double pv_value(const GridFunction& u, const std::vector<std::array<long, 2>>& supp, long ix, long iy,
                       long step, double s, const LatticeConstants& lc, const LatticeKernel& ker, double cns) {
  const Domain& d = u.domain();
  const int n = d.dim();
  const Lattice L{&u, step};
  double sum = 0.0;
  for (const auto& p : supp) {
    const long di = p[0] - ix, dj = p[1] - iy;
    if (di % step != 0 || dj % step != 0 || (di == 0 && dj == 0)) continue;
    sum += L.at(p[0], p[1]) * ker(di / step, dj / step);
  }
  double lap = 0.0, bih = 0.0;
  for (int a = 0; a < n; ++a) {
    lap += L.d2(ix, iy, a);
    bih += L.d4(ix, iy, a);
  }
  const double hs = std::pow(static_cast<double>(step) * d.h(), -2.0 * s);
  double v = L.at(ix, iy) * lc.z0 - sum + lap * lc.z2 / (2.0 * n);
  if (n == 1) v += bih * lc.z4 / 24.0;
  return cns * hs * v;
}

/// Lattice double-sum form on the stride sublattice (infinite lattice, u zero off the box).
inline double lattice_form(const GridFunction& u, long step, double s, const LatticeConstants& lc,
                           const LatticeKernel& ker, double cns) {
  const Domain& d = u.domain();
  const int n = d.dim();
  const auto supp = lattice_support(u, step);
  const Lattice L{&u, step};
  double diag = 0.0, cross = 0.0, corr = 0.0;
  for (std::size_t a = 0; a < supp.size(); ++a) {
    const double ua = L.at(supp[a][0], supp[a][1]);
    diag += ua * ua;
    for (std::size_t b = a + 1; b < supp.size(); ++b) {
      const long di = supp[b][0] - supp[a][0], dj = supp[b][1] - supp[a][1];
      cross += ua * L.at(supp[b][0], supp[b][1]) * ker(di / step, dj / step);
    }
  }
  // Diagonal (Navot) corrections need derivatives also just outside the support.
  std::vector<std::array<long, 2>> region;
  {
    long i0 = 1L << 40, i1 = -(1L << 40), j0 = 1L << 40, j1 = -(1L << 40);
    for (const auto& p : supp) {
      i0 = std::min(i0, p[0]);
      i1 = std::max(i1, p[0]);
      j0 = std::min(j0, p[1]);
      j1 = std::max(j1, p[1]);
    }
    const long m = 2 * step;
    for (long j = (n == 2 ? j0 - m : 0); j <= (n == 2 ? j1 + m : 0); j += step)
      for (long i = i0 - m; i <= i1 + m; i += step) region.push_back({i, j});
  }
  for (const auto& p : region) {
    double g2 = 0.0;
    for (int a = 0; a < n; ++a) g2 += std::pow(L.d1(p[0], p[1], a), 2);
    double c = g2 * lc.z2 / n;
    if (n == 1) {
      const double u1 = L.d1(p[0], 0, 0), u2 = L.d2(p[0], 0, 0), u3 = L.d3(p[0], 0, 0);
      c += lc.z4 * (0.25 * u2 * u2 + u1 * u3 / 3.0);
    }
    corr += c;
  }
  const double hh = static_cast<double>(step) * d.h();
  const double hn = std::pow(hh, n);
  const double hs = std::pow(hh, -2.0 * s);
  return cns * hn * hs * (lc.z0 * diag - 2.0 * cross) - 0.5 * cns * hn * hs * corr;
}

}  // namespace detail

/*
 * (c_{n,s}/2) iint |u(x)-u(y)|^2 / |x-y|^{n+2s} over R^n x R^n for u extended
 * by zero.  Computed as the trapezoidal double sum over the infinite lattice
 * (far field from the lattice zeta function) with the diagonal corrections of
 * the punctured rule; the error estimate compares with the 2h sublattice.
 */
inline FormValue restricted_form_singular(const GridFunction& u, double s) {
  if (!(s > 0.0 && s < 1.0)) throw DomainError("restricted_form_singular: s must lie in (0,1)");
  const Domain& d = u.domain();
  const int n = d.dim();
  const double cns = specfun::c_ns(n, s).value;
  const auto lc = detail::lattice_constants(n, s);
  const detail::LatticeKernel ker(n, d.nx(), d.ny(), n + 2.0 * s);
  FormValue r;
  r.value = detail::lattice_form(u, 1, s, lc, ker, cns);
  const double coarse = detail::lattice_form(u, 2, s, lc, ker, cns);
  const double p = (n == 1 ? 6.0 : 4.0) - 2.0 * s;
  r.error_estimate = std::abs(r.value - coarse) / (std::pow(2.0, p) - 1.0) + 1e-13 * std::abs(r.value);
  return r;
}

/// Principal-value quadrature of c_{n,s} V.P. int (u(x)-u(y))/|x-y|^{n+2s} dy at the given nodes.
inline FieldValue restricted_apply(const GridFunction& u, double s, const std::vector<std::size_t>& eval_nodes) {
  if (!(s > 0.0 && s < 1.0)) throw DomainError("restricted_apply: s must lie in (0,1)");
  const Domain& d = u.domain();
  for (std::size_t k : eval_nodes)
    if (d.box_distance(k) < 2.0 * d.h() * (1.0 - 1e-12))
      throw GridError("restricted_apply: evaluation node within 2h of the ambient box boundary");
  const int n = d.dim();
  const double cns = specfun::c_ns(n, s).value;
  const auto lc = detail::lattice_constants(n, s);
  const detail::LatticeKernel ker(n, d.nx(), d.ny(), n + 2.0 * s);
  const auto supp = detail::lattice_support(u, 1);
  const double p = (n == 1 ? 6.0 : 4.0) - 2.0 * s;
  FieldValue out{GridFunction(u.domain_ptr()), GridFunction(u.domain_ptr())};
  for (std::size_t k : eval_nodes) {
    const long i = static_cast<long>(d.ix(k)), j = static_cast<long>(d.iy(k));
    const double fine = detail::pv_value(u, supp, i, j, 1, s, lc, ker, cns);
    const double coarse = detail::pv_value(u, supp, i, j, 2, s, lc, ker, cns);
    out.values[k] = fine;
    out.error[k] = std::abs(fine - coarse) / (std::pow(2.0, p) - 1.0) + 1e-13 * std::abs(fine);
  }
  out.values.set_label("restricted pv s=" + std::to_string(s));
  return out;
}

inline FieldValue restricted_apply(const GridFunction& u, double s) {
  std::vector<std::size_t> nodes;
  for (std::size_t k : u.domain().mask_nodes())
    if (u.domain().box_distance(k) >= 2.0 * u.domain().h() * (1.0 - 1e-12)) nodes.push_back(k);
  return restricted_apply(u, s, nodes);
}

// --------------------------------------------------------------------------
// Regional form: double integral over Omega x Omega.
// --------------------------------------------------------------------------

namespace detail {

/// Derivative along an axis using only closure nodes: 4th-order central where possible.
struct ClosureStencil {
  const GridFunction* u;
  const Domain* d;
  long step;
  bool ok(long i, long j) const {
    if (i < 0 || j < 0 || i >= static_cast<long>(d->nx()) || j >= static_cast<long>(d->ny())) return false;
    return d->in_closure(d->index(static_cast<std::size_t>(i), static_cast<std::size_t>(j)));
  }
  double at(long i, long j) const { return (*u)[d->index(static_cast<std::size_t>(i), static_cast<std::size_t>(j))]; }
  double d1(long i, long j, int axis, bool* central4) const {
    auto idx = [&](long k) { return axis == 0 ? std::array<long, 2>{i + k * step, j} : std::array<long, 2>{i, j + k * step}; };
    auto has = [&](long k) { const auto p = idx(k); return ok(p[0], p[1]); };
    auto v = [&](long k) { const auto p = idx(k); return at(p[0], p[1]); };
    *central4 = false;
    if (has(-2) && has(-1) && has(1) && has(2)) {
      *central4 = true;
      return (v(-2) - 8.0 * v(-1) + 8.0 * v(1) - v(2)) / 12.0;
    }
    if (has(-1) && has(1)) return 0.5 * (v(1) - v(-1));
    if (has(1) && has(2)) return 0.5 * (-3.0 * v(0) + 4.0 * v(1) - v(2));
    if (has(-1) && has(-2)) return 0.5 * (3.0 * v(0) - 4.0 * v(-1) + v(-2));
    if (has(1)) return v(1) - v(0);
    if (has(-1)) return v(0) - v(-1);
    return 0.0;
  }
};

inline double regional_sum(const GridFunction& u, const Domain& d, long step, double s, const LatticeConstants& lc,
                           const LatticeKernel& ker, double cns, const std::vector<double>& weights) {
  const int n = d.dim();
  std::vector<std::size_t> nodes;
  for (std::size_t k : d.closure_nodes())
    if (static_cast<long>(d.ix(k)) % step == 0 && static_cast<long>(d.iy(k)) % step == 0) nodes.push_back(k);
  const double hh = static_cast<double>(step) * d.h();
  const double hn = std::pow(hh, n);
  const double hs = std::pow(hh, -2.0 * s);
  double pair = 0.0;
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    const std::size_t ka = nodes[a];
    const double ua = u[ka], wa = weights[ka] / hn;
    const long ia = static_cast<long>(d.ix(ka)), ja = static_cast<long>(d.iy(ka));
    for (std::size_t b = a + 1; b < nodes.size(); ++b) {
      const std::size_t kb = nodes[b];
      const double diff = ua - u[kb];
      if (diff == 0.0) continue;
      const long di = (static_cast<long>(d.ix(kb)) - ia) / step, dj = (static_cast<long>(d.iy(kb)) - ja) / step;
      pair += wa * (weights[kb] / hn) * diff * diff * ker(di, dj);
    }
  }
  // Diagonal corrections weighted by the local cell fraction.
  const ClosureStencil st{&u, &d, step};
  double corr = 0.0;
  for (std::size_t k : nodes) {
    const long i = static_cast<long>(d.ix(k)), j = static_cast<long>(d.iy(k));
    double g2 = 0.0;
    bool all4 = true;
    std::array<double, 2> g{};
    for (int a = 0; a < n; ++a) {
      bool c4 = false;
      g[static_cast<std::size_t>(a)] = st.d1(i, j, a, &c4);
      g2 += g[static_cast<std::size_t>(a)] * g[static_cast<std::size_t>(a)];
      all4 = all4 && c4;
    }
    double c = g2 * lc.z2 / n;
    if (n == 1 && all4) {
      auto v = [&](long o) { return st.at(i + o * step, 0); };
      const double u2 = (-v(-2) + 16.0 * v(-1) - 30.0 * v(0) + 16.0 * v(1) - v(2)) / 12.0;
      const double u3 = (v(2) - 2.0 * v(1) + 2.0 * v(-1) - v(-2)) / 2.0;
      c += lc.z4 * (0.25 * u2 * u2 + g[0] * u3 / 3.0);
    }
    corr += (weights[k] / hn) * c;
  }
  // Both orderings of each pair: cns/2 * 2 * pair.
  return cns * hn * hs * pair - 0.5 * cns * hn * hs * corr;
}

/// The 2h domain built from 2x2 cell blocks; null when Omega is not aligned with the blocks.
inline DomainPtr coarsen(const Domain& d) {
  if ((d.nx() - 1) % 2 != 0 || (d.dim() == 2 && (d.ny() - 1) % 2 != 0)) return nullptr;
  const std::size_t cx = (d.nx() - 1) / 2, cy = d.dim() == 2 ? (d.ny() - 1) / 2 : 1;
  std::vector<std::uint8_t> cells(cx * cy, 0);
  for (std::size_t j = 0; j < cy; ++j)
    for (std::size_t i = 0; i < cx; ++i) {
      int in = 0, tot = 0;
      for (std::size_t b = 0; b < (d.dim() == 2 ? 2u : 1u); ++b)
        for (std::size_t a = 0; a < 2; ++a) {
          ++tot;
          in += d.cell(2 * i + a, d.dim() == 2 ? 2 * j + b : 0) ? 1 : 0;
        }
      if (in != 0 && in != tot) return nullptr;
      cells[i + cx * j] = in ? 1 : 0;
    }
  return std::make_shared<const Domain>(d.dim(), cx + 1, cy + 1, d.x0(), d.y0(), 2.0 * d.h(), std::move(cells),
                                        d.convex());
}

}  // namespace detail

/*
 * (c_{n,s}/2) iint_{Omega x Omega} |u(x)-u(y)|^2 / |x-y|^{n+2s}: the same
 * punctured lattice rule restricted to the closure with its trapezoidal
 * weights.  u is read on the closure only.
 */
inline FormValue regional_form(const GridFunction& u, double s) {
  if (!(s > 0.0 && s < 1.0)) throw DomainError("regional_form: s must lie in (0,1)");
  const Domain& d = u.domain();
  const int n = d.dim();
  const double cns = specfun::c_ns(n, s).value;
  const auto lc = detail::lattice_constants(n, s);
  const detail::LatticeKernel ker(n, d.nx(), d.ny(), n + 2.0 * s);
  FormValue r;
  r.value = detail::regional_sum(u, d, 1, s, lc, ker, cns, d.weights());
  const DomainPtr coarse = detail::coarsen(d);
  if (coarse) {
    // Coarse weights expressed on the fine ambient indexing.
    std::vector<double> w(d.size(), 0.0);
    for (std::size_t k = 0; k < coarse->size(); ++k) w[d.index(2 * coarse->ix(k), 2 * coarse->iy(k))] = coarse->weight(k);
    const double q2 = detail::regional_sum(u, d, 2, s, lc, ker, cns, w);
    r.error_estimate = std::abs(r.value - q2) / 3.0;
  } else {
    r.error_estimate = 0.1 * std::abs(r.value);
  }
  r.error_estimate += 1e-13 * std::abs(r.value);
  return r;
}

/*
 * iint a(x) b(y) / |x-y|^{n+2s} dx dy for functions with disjoint supports
 * (kernel nonsingular).  Error estimate from the 2h sublattice.
 */
inline FormValue interaction_integral(const GridFunction& a, const GridFunction& b, double s) {
  a.check_same(b);
  const Domain& d = a.domain();
  const int n = d.dim();
  const detail::LatticeKernel ker(n, d.nx(), d.ny(), n + 2.0 * s);
  auto sum = [&](long step) {
    const auto sa = detail::lattice_support(a, step), sb = detail::lattice_support(b, step);
    double acc = 0.0;
    for (const auto& p : sa) {
      const double va = a[d.index(static_cast<std::size_t>(p[0]), static_cast<std::size_t>(p[1]))];
      for (const auto& q : sb) {
        if (p == q) throw DomainError("interaction_integral: supports overlap");
        acc += va * b[d.index(static_cast<std::size_t>(q[0]), static_cast<std::size_t>(q[1]))] *
               ker((q[0] - p[0]) / step, (q[1] - p[1]) / step);
      }
    }
    const double hh = static_cast<double>(step) * d.h();
    return acc * std::pow(hh, 2 * n) * std::pow(hh, -(n + 2.0 * s));
  };
  FormValue r;
  r.value = sum(1);
  r.error_estimate = std::abs(r.value - sum(2)) / 3.0 + 1e-13 * std::abs(r.value);
  return r;
}

}  // namespace fraclap

#endif  // FRACLAP_RESTRICTED_HPP
