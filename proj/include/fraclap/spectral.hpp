#ifndef FRACLAP_SPECTRAL_HPP
#define FRACLAP_SPECTRAL_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "fraclap/errors.hpp"
#include "fraclap/grid.hpp"
#include "fraclap/order.hpp"

namespace fraclap {

enum class BasisKind { dirichlet, neumann };
enum class BasisSource { automatic, analytic_interval, analytic_rectangle, numeric_matrix };

inline const char* to_string(BasisKind k) { return k == BasisKind::dirichlet ? "dirichlet" : "neumann"; }

/*
 * Orthonormal eigenpairs of the Dirichlet or Neumann Laplacian on Omega,
 * sorted by eigenvalue.  Entry 0 is the lowest mode: lambda_1 for Dirichlet,
 * mu_0 = 0 with a constant eigenfunction for Neumann.  Eigenfunctions are
 * stored as columns over the ambient grid and are orthonormal for
 * inner_product().
 */
struct EigenBasis {
  BasisKind kind = BasisKind::dirichlet;
  BasisSource source = BasisSource::analytic_interval;
  DomainPtr domain;
  std::vector<double> eigenvalues;
  Eigen::MatrixXd modes;

  std::size_t size() const { return eigenvalues.size(); }

  GridFunction mode(std::size_t j) const {
    std::vector<double> v(domain->size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = modes(static_cast<long>(i), static_cast<long>(j));
    return GridFunction(domain, std::move(v), std::string(to_string(kind)) + " mode " + std::to_string(j));
  }

  /// (u, phi_j) for every stored mode.
  Eigen::VectorXd coefficients(const GridFunction& u) const {
    if (&u.domain() != domain.get() && !u.domain().same_grid(*domain))
      throw GridError("EigenBasis: function lives on a different grid");
    Eigen::VectorXd wu(static_cast<long>(u.size()));
    const auto& w = domain->weights();
    for (std::size_t i = 0; i < u.size(); ++i) wu[static_cast<long>(i)] = w[i] * u[i];
    return modes.transpose() * wu;
  }
};

namespace detail {

inline bool full_rectangle(const Domain& d) {
  if (d.dim() != 2) return false;
  for (std::size_t c = 0; c < d.cell_count(); ++c)
    if (!d.cells()[c]) return false;
  return true;
}

/// Per-axis mode count of the analytic rectangle basis.
inline std::size_t rectangle_axis_modes(std::size_t n_axis) { return n_axis - 2; }

inline std::size_t default_mode_count(const Domain& d, BasisSource src, std::size_t unknowns) {
  if (src == BasisSource::analytic_interval) return std::min<std::size_t>(1024, d.size() / 4);
  if (src == BasisSource::analytic_rectangle) return rectangle_axis_modes(d.nx()) * rectangle_axis_modes(d.ny());
  return unknowns;
}

inline EigenBasis analytic_interval_basis(const DomainPtr& d, BasisKind kind, std::size_t n_modes) {
  double a = 1e300, b = -1e300;
  for (std::size_t i : d->closure_nodes()) {
    a = std::min(a, d->x(i));
    b = std::max(b, d->x(i));
  }
  const double L = b - a;
  EigenBasis e;
  e.kind = kind;
  e.source = BasisSource::analytic_interval;
  e.domain = d;
  e.modes = Eigen::MatrixXd::Zero(static_cast<long>(d->size()), static_cast<long>(n_modes));
  e.eigenvalues.resize(n_modes);
  const auto& w = d->weights();
  for (std::size_t m = 0; m < n_modes; ++m) {
    const double j = kind == BasisKind::dirichlet ? static_cast<double>(m + 1) : static_cast<double>(m);
    const double k = j * std::numbers::pi / L;
    e.eigenvalues[m] = k * k;
    double norm2 = 0.0;
    for (std::size_t i : d->closure_nodes()) {
      const double t = d->x(i) - a;
      const double v = kind == BasisKind::dirichlet ? std::sin(k * t) : (m == 0 ? 1.0 : std::cos(k * t));
      e.modes(static_cast<long>(i), static_cast<long>(m)) = v;
      norm2 += w[i] * v * v;
    }
    // Sampled sines/cosines are exactly orthogonal under the trapezoidal weights
    // (DST-I / DCT-I); only the norm needs fixing.
    e.modes.col(static_cast<long>(m)) /= std::sqrt(norm2);
  }
  return e;
}

/*
 * Products of sampled sines (cosines) on a full rectangle, with the continuum
 * eigenvalues.  The 5-point matrix has exactly these eigenvectors; only the
 * eigenvalues differ, by O(lambda^2 h^2).
 */
inline EigenBasis analytic_rectangle_basis(const DomainPtr& d, BasisKind kind, std::size_t n_modes) {
  const std::size_t mx = rectangle_axis_modes(d->nx()), my = rectangle_axis_modes(d->ny());
  const double Lx = d->h() * static_cast<double>(d->nx() - 1), Ly = d->h() * static_cast<double>(d->ny() - 1);
  const std::size_t off = kind == BasisKind::dirichlet ? 1 : 0;
  struct Pair {
    double lam;
    std::size_t j, k;
  };
  std::vector<Pair> pairs;
  for (std::size_t j = 0; j < mx; ++j)
    for (std::size_t k = 0; k < my; ++k) {
      const double a = static_cast<double>(j + off) * std::numbers::pi / Lx;
      const double b = static_cast<double>(k + off) * std::numbers::pi / Ly;
      pairs.push_back({a * a + b * b, j + off, k + off});
    }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& p, const Pair& q) { return p.lam < q.lam; });
  if (n_modes > pairs.size())
    throw GridError("eigensystem: at most " + std::to_string(pairs.size()) + " analytic rectangle modes");
  EigenBasis e;
  e.kind = kind;
  e.source = BasisSource::analytic_rectangle;
  e.domain = d;
  e.modes = Eigen::MatrixXd::Zero(static_cast<long>(d->size()), static_cast<long>(n_modes));
  e.eigenvalues.resize(n_modes);
  const auto& w = d->weights();
  auto f = [&](std::size_t j, double t, double L) {
    const double k = static_cast<double>(j) * std::numbers::pi / L;
    return kind == BasisKind::dirichlet ? std::sin(k * t) : (j == 0 ? 1.0 : std::cos(k * t));
  };
  for (std::size_t m = 0; m < n_modes; ++m) {
    e.eigenvalues[m] = pairs[m].lam;
    double norm2 = 0.0;
    for (std::size_t i : d->closure_nodes()) {
      const double v = f(pairs[m].j, d->x(i) - d->x0(), Lx) * f(pairs[m].k, d->y(i) - d->y0(), Ly);
      e.modes(static_cast<long>(i), static_cast<long>(m)) = v;
      norm2 += w[i] * v * v;
    }
    e.modes.col(static_cast<long>(m)) /= std::sqrt(norm2);
  }
  return e;
}

inline EigenBasis numeric_basis(const DomainPtr& d, BasisKind kind, std::size_t n_modes) {
  const GraphLaplacian g =
      graph_laplacian(*d, kind == BasisKind::dirichlet ? BoundaryKind::dirichlet : BoundaryKind::neumann);
  const long n = static_cast<long>(g.nodes.size());
  if (n == 0) throw GridError("eigensystem: domain has no unknowns");
  const Eigen::VectorXd isq = g.mass.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd A = Eigen::MatrixXd(g.stiffness);
  A = isq.asDiagonal() * A * isq.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) throw SolverError("eigensystem: dense eigensolver failed", 0.0);
  EigenBasis e;
  e.kind = kind;
  e.source = BasisSource::numeric_matrix;
  e.domain = d;
  e.modes = Eigen::MatrixXd::Zero(static_cast<long>(d->size()), static_cast<long>(n_modes));
  e.eigenvalues.resize(n_modes);
  const double lmax = es.eigenvalues().maxCoeff();
  const double omega = integral(indicator(d));
  for (std::size_t m = 0; m < n_modes; ++m) {
    double lam = es.eigenvalues()[static_cast<long>(m)];
    Eigen::VectorXd v = isq.cwiseProduct(es.eigenvectors().col(static_cast<long>(m)));
    if (lam < 1e-10 * lmax) lam = 0.0;
    if (m == 0 && lam == 0.0 && d->components() == 1) {
      v.setConstant(1.0 / std::sqrt(omega));
    } else {
      // Deterministic sign: first entry of significant size is positive.
      for (long k = 0; k < n; ++k) {
        if (std::abs(v[k]) > 1e-8 * v.cwiseAbs().maxCoeff()) {
          if (v[k] < 0) v = -v;
          break;
        }
      }
    }
    e.eigenvalues[m] = lam;
    for (long k = 0; k < n; ++k) e.modes(static_cast<long>(g.nodes[static_cast<std::size_t>(k)]), static_cast<long>(m)) = v[k];
  }
  return e;
}

}  // namespace detail

/// Eigen decomposition of the Dirichlet/Neumann Laplacian; n_modes = 0 selects the default count.
inline EigenBasis eigensystem(const DomainPtr& d, BasisKind kind, std::size_t n_modes = 0,
                              BasisSource source = BasisSource::automatic) {
  if (source == BasisSource::automatic)
    source = d->dim() == 1 ? BasisSource::analytic_interval
                           : (detail::full_rectangle(*d) ? BasisSource::analytic_rectangle : BasisSource::numeric_matrix);
  if (source == BasisSource::analytic_interval && d->dim() != 1)
    throw GridError("eigensystem: analytic interval eigenpairs need a 1-D grid");
  if (source == BasisSource::analytic_rectangle && !detail::full_rectangle(*d))
    throw GridError("eigensystem: analytic rectangle eigenpairs need a full rectangular mask");
  const std::size_t unknowns = kind == BasisKind::dirichlet ? d->mask_nodes().size() : d->closure_nodes().size();
  if (n_modes == 0) n_modes = detail::default_mode_count(*d, source, unknowns);
  if (n_modes > unknowns)
    throw GridError("eigensystem: " + std::to_string(n_modes) + " modes requested but only " +
                    std::to_string(unknowns) + " unknowns");
  switch (source) {
    case BasisSource::analytic_interval: return detail::analytic_interval_basis(d, kind, n_modes);
    case BasisSource::analytic_rectangle: return detail::analytic_rectangle_basis(d, kind, n_modes);
    default: return detail::numeric_basis(d, kind, n_modes);
  }
}

namespace detail {

struct SpectralWeights {
  std::vector<double> power;   // lambda_j^s, 0 for dropped modes
  std::vector<double> discr;   // lambda~^s - lambda^s for matrix eigenvalues (signed)
  std::size_t tail_begin = 0;  // first mode of the last decade
};

inline SpectralWeights spectral_weights(const EigenBasis& b, double s) {
  SpectralWeights w;
  const std::size_t n = b.size();
  w.power.assign(n, 0.0);
  w.discr.assign(n, 0.0);
  const double h2 = b.domain->h() * b.domain->h();
  for (std::size_t j = 0; j < n; ++j) {
    const double lam = b.eigenvalues[j];
    if (lam <= 0.0) continue;  // mu_0 = 0: 0^s = 0 for s > 0, dropped for s < 0 (zero mean)
    w.power[j] = std::pow(lam, s);
    if (b.source == BasisSource::numeric_matrix)
      w.discr[j] = std::pow(lam * (1.0 + lam * h2 / 12.0), s) - w.power[j];
  }
  const std::size_t decade = std::max<std::size_t>(1, std::min<std::size_t>(10, n / 10));
  w.tail_begin = n - decade;
  return w;
}

inline void check_spectral_side_condition(const GridFunction& u, double s, const EigenBasis& b) {
  if (s < 0.0 && b.kind == BasisKind::neumann) require_zero_mean(u, "negative-order spectral Neumann form");
}

}  // namespace detail

/// sum_j lambda_j^s (u, phi_j)^2 over the stored modes, with a truncation/discretisation estimate.
inline FormValue spectral_form(const GridFunction& u, FracOrder s, const EigenBasis& basis) {
  detail::check_spectral_side_condition(u, s, basis);
  const Eigen::VectorXd c = basis.coefficients(u);
  const auto w = detail::spectral_weights(basis, s);
  FormValue r;
  double tail = 0.0, discr = 0.0;
  for (std::size_t j = 0; j < basis.size(); ++j) {
    const double c2 = c[static_cast<long>(j)] * c[static_cast<long>(j)];
    r.value += w.power[j] * c2;
    discr += std::abs(w.discr[j]) * c2;
    if (j >= w.tail_begin) tail += w.power[j] * c2;
  }
  r.error_estimate = tail + discr + 1e-14 * std::abs(r.value);
  return r;
}

/// sum_j lambda_j^s (u, phi_j) phi_j; negative-order Neumann output has zero mean.
inline FieldValue spectral_apply(const GridFunction& u, FracOrder s, const EigenBasis& basis) {
  detail::check_spectral_side_condition(u, s, basis);
  const Eigen::VectorXd c = basis.coefficients(u);
  const auto w = detail::spectral_weights(basis, s);
  const long n = static_cast<long>(basis.size());
  // Error field: the eigenvalue-correction field plus the last-decade field,
  // each summed with signs, plus a rounding allowance on the absolute sum.
  Eigen::MatrixXd coef(n, 3);
  for (long j = 0; j < n; ++j) {
    const auto k = static_cast<std::size_t>(j);
    coef(j, 0) = w.power[k] * c[j];
    coef(j, 1) = w.discr[k] * c[j];
    coef(j, 2) = k >= w.tail_begin ? coef(j, 0) : 0.0;
  }
  const Eigen::MatrixXd f = basis.modes * coef;
  const Eigen::VectorXd mag = basis.modes.cwiseAbs() * coef.col(0).cwiseAbs();
  FieldValue out{GridFunction(basis.domain), GridFunction(basis.domain)};
  for (std::size_t i = 0; i < basis.domain->size(); ++i) {
    const long r = static_cast<long>(i);
    out.values[i] = f(r, 0);
    out.error[i] = std::abs(f(r, 1)) + std::abs(f(r, 2)) + 1e-14 * mag[r];
  }
  if (s < 0.0 && basis.kind == BasisKind::neumann) {
    const double mean = integral(out.values) / integral(indicator(basis.domain));
    for (std::size_t i : basis.domain->closure_nodes()) out.values[i] -= mean;
  }
  out.values.set_label(std::string("spectral ") + to_string(basis.kind) + " s=" + std::to_string(s.value()));
  return out;
}

/// CSV "mode,eigenvalue".
inline void write_eigenvalues_csv(std::ostream& os, const EigenBasis& b) {
  os << "mode,eigenvalue\n" << std::setprecision(17);
  const std::size_t offset = b.kind == BasisKind::dirichlet && b.source == BasisSource::analytic_interval ? 1 : 0;
  for (std::size_t j = 0; j < b.size(); ++j) os << j + offset << ',' << b.eigenvalues[j] << '\n';
}

}  // namespace fraclap

#endif  // FRACLAP_SPECTRAL_HPP
