#ifndef FRACLAP_EXTENSION_HPP
#define FRACLAP_EXTENSION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <list>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "fraclap/errors.hpp"
#include "fraclap/grid.hpp"
#include "fraclap/order.hpp"
#include "fraclap/quadrature.hpp"
#include "fraclap/spectral.hpp"
#include "fraclap/specfun.hpp"

namespace fraclap {

enum class Geometry { half_space, half_cylinder };
enum class LateralBC { none, dirichlet, neumann };
enum class BottomBC { trace, weighted_neumann };
enum class TopBC { automatic, dirichlet, natural };

inline const char* to_string(Geometry g) { return g == Geometry::half_space ? "half-space" : "half-cylinder"; }
inline const char* to_string(LateralBC b) {
  return b == LateralBC::none ? "none" : (b == LateralBC::dirichlet ? "dirichlet" : "neumann");
}
inline const char* to_string(BottomBC b) { return b == BottomBC::trace ? "trace" : "weighted-neumann"; }

struct ExtensionOptions {
  std::size_t levels = 128;  // graded levels M on [0, Y0]
  double grading = 0.0;      // beta; 0 selects max(2, 1/sigma)
  double top_factor = 4.0;   // Y0 = top_factor * diam(Omega)
  double far_factor = 200.0; // geometric continuation up to far_factor * diam (and laterally for the half-space)
  double ratio = 1.1;        // growth ratio of the geometric continuation
  double tolerance = 1e-10;  // relative residual target
  TopBC top = TopBC::automatic;
  bool estimate_error = true;  // second solve with M/2 levels for the energy estimate
};

namespace detail {

/*
 * y-elements spanned by {1, y^{2 sigma}} on each cell, the exact local
 * solutions of (y^{1-2 sigma} w')' = 0, so the stiffness is
 * 2 sigma / (b^{2 sigma} - a^{2 sigma}) and nodal values reproduce the
 * y^{2 sigma} boundary behaviour.  Mass: lumped P1 weights of y^{1-2 sigma}.
 */
struct YMesh {
  std::vector<double> y;
  std::vector<double> mass;     // lumped int y^alpha phi_k
  std::vector<double> cell_k;   // int_cell y^alpha / dy^2
  double graded_top = 0.0;
};

inline YMesh make_y_mesh(double sigma, double diam, const ExtensionOptions& opt) {
  if (opt.levels < 4) throw GridError("extension: need at least 4 graded levels");
  YMesh m;
  const double beta = opt.grading > 0.0 ? opt.grading : std::max(2.0, 1.0 / sigma);
  const double y0 = opt.top_factor * diam;
  m.graded_top = y0;
  for (std::size_t k = 0; k <= opt.levels; ++k)
    m.y.push_back(y0 * std::pow(static_cast<double>(k) / static_cast<double>(opt.levels), beta));
  double dy = m.y.back() - m.y[m.y.size() - 2];
  const double far = opt.far_factor * diam;
  while (m.y.back() < far) {
    dy *= opt.ratio;
    m.y.push_back(std::min(m.y.back() + dy, far * (1.0 + 1e-15)));
  }
  const double a1 = 2.0 - 2.0 * sigma;  // alpha + 1
  m.mass.assign(m.y.size(), 0.0);
  m.cell_k.assign(m.y.size() - 1, 0.0);
  for (std::size_t k = 0; k + 1 < m.y.size(); ++k) {
    const double a = m.y[k], b = m.y[k + 1], d = b - a;
    const double i0 = (std::pow(b, a1) - std::pow(a, a1)) / a1;
    const double i1 = (std::pow(b, a1 + 1.0) - std::pow(a, a1 + 1.0)) / (a1 + 1.0);
    m.cell_k[k] = 2.0 * sigma / (std::pow(b, 2 * sigma) - std::pow(a, 2 * sigma));
    m.mass[k] += (b * i0 - i1) / d;
    m.mass[k + 1] += (i1 - a * i0) / d;
  }
  return m;
}

/// Geometrically stretched axis: the uniform core nodes plus padding out to distance `reach`.
inline std::vector<double> stretched_axis(double lo, double h, std::size_t core, double reach, double ratio,
                                          std::size_t* first_core) {
  std::vector<double> left, right;
  double d = h, x = lo;
  while (lo - x < reach) {
    d *= ratio;
    x -= d;
    left.push_back(std::max(x, lo - reach));
    x = left.back();
  }
  const double hi = lo + h * static_cast<double>(core - 1);
  d = h;
  x = hi;
  while (x - hi < reach) {
    d *= ratio;
    x += d;
    right.push_back(std::min(x, hi + reach));
    x = right.back();
  }
  std::vector<double> axis(left.rbegin(), left.rend());
  *first_core = axis.size();
  for (std::size_t i = 0; i < core; ++i) axis.push_back(lo + h * static_cast<double>(i));
  axis.insert(axis.end(), right.begin(), right.end());
  return axis;
}

/// 1-D P1 stiffness (tridiagonal, dense-friendly) and lumped mass on an axis.
inline void axis_matrices(const std::vector<double>& x, Eigen::MatrixXd* K, Eigen::VectorXd* m) {
  const long n = static_cast<long>(x.size());
  K->setZero(n, n);
  m->setZero(n);
  for (long k = 0; k + 1 < n; ++k) {
    const double d = x[static_cast<std::size_t>(k + 1)] - x[static_cast<std::size_t>(k)];
    (*K)(k, k) += 1.0 / d;
    (*K)(k + 1, k + 1) += 1.0 / d;
    (*K)(k, k + 1) -= 1.0 / d;
    (*K)(k + 1, k) -= 1.0 / d;
    (*m)[k] += 0.5 * d;
    (*m)[k + 1] += 0.5 * d;
  }
}

/// Generalised eigenpairs of (K, diag(m)) restricted to `free`: V^T K V = Lambda, V^T M V = I.
inline void generalized_eigen(const Eigen::MatrixXd& K, const Eigen::VectorXd& m, const std::vector<long>& free,
                              Eigen::VectorXd* lambda, Eigen::MatrixXd* V) {
  const long n = static_cast<long>(free.size());
  Eigen::MatrixXd A(n, n);
  Eigen::VectorXd isq(n);
  for (long a = 0; a < n; ++a) isq[a] = 1.0 / std::sqrt(m[free[static_cast<std::size_t>(a)]]);
  for (long a = 0; a < n; ++a)
    for (long b = 0; b < n; ++b)
      A(a, b) = K(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]) * isq[a] * isq[b];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) throw SolverError("extension: x-eigensolver failed", 0.0);
  *lambda = es.eigenvalues().cwiseMax(0.0);
  *V = isq.asDiagonal() * es.eigenvectors();
}

/*
 * Spatial discretisation: nodes, stiffness K, lumped mass m, free/constrained
 * nodes and a modal transform diagonalising (K, m) on the free nodes.
 * Either a dense basis (general masks, 1-D) or a separable pair of axis bases
 * (2-D half-space).
 */
struct XSpace {
  int dim = 1;
  std::vector<long> ambient;           // x-node -> ambient node (-1 for padding)
  std::vector<long> node_of_ambient;   // ambient node -> x-node (-1 if absent)
  Eigen::SparseMatrix<double> K;
  Eigen::VectorXd m;
  std::vector<long> free;              // free x-nodes, in modal order
  Eigen::VectorXd lambda;              // modal eigenvalues
  bool separable = false;
  Eigen::MatrixXd V;                   // dense: free x modes
  Eigen::MatrixXd Va, Vb;              // separable: axis bases on free axis nodes
  Eigen::VectorXd la, lb;
  std::size_t na = 0, nb = 0;          // free axis node counts (separable)
  bool has_operator = true;

  std::size_t size() const { return ambient.size(); }

  /// g (force vector on free nodes) -> V^T g.
  Eigen::VectorXd forward(const Eigen::VectorXd& g) const {
    if (!separable) return V.transpose() * g;
    const Eigen::Map<const Eigen::MatrixXd> G(g.data(), static_cast<long>(na), static_cast<long>(nb));
    Eigen::MatrixXd H = Va.transpose() * G * Vb;
    return Eigen::Map<Eigen::VectorXd>(H.data(), H.size());
  }
  /// Modal coefficients -> nodal values on free nodes.
  Eigen::VectorXd backward(const Eigen::VectorXd& c) const {
    if (!separable) return V * c;
    const Eigen::Map<const Eigen::MatrixXd> C(c.data(), static_cast<long>(na), static_cast<long>(nb));
    Eigen::MatrixXd H = Va * C * Vb.transpose();
    return Eigen::Map<Eigen::VectorXd>(H.data(), H.size());
  }
};

inline std::shared_ptr<XSpace> cylinder_space(const Domain& d, LateralBC lateral) {
  auto xs = std::make_shared<XSpace>();
  xs->dim = d.dim();
  const GraphLaplacian g = graph_laplacian(d, BoundaryKind::neumann);
  xs->K = g.stiffness;
  xs->m = g.mass;
  xs->node_of_ambient.assign(d.size(), -1);
  for (std::size_t k = 0; k < g.nodes.size(); ++k) {
    xs->ambient.push_back(static_cast<long>(g.nodes[k]));
    xs->node_of_ambient[g.nodes[k]] = static_cast<long>(k);
    if (lateral == LateralBC::neumann || d.in_mask(g.nodes[k])) xs->free.push_back(static_cast<long>(k));
  }
  bool full_box = d.dim() == 2;
  for (std::size_t c = 0; full_box && c < d.cell_count(); ++c) full_box = d.cells()[c] != 0;
  if (!full_box) {
    generalized_eigen(Eigen::MatrixXd(g.stiffness), g.mass, xs->free, &xs->lambda, &xs->V);
    return xs;
  }
  // Full rectangle: the stiffness is K_a (x) M_b + M_a (x) K_b, diagonalised axis by axis.
  std::vector<double> ax(d.nx()), by(d.ny());
  for (std::size_t i = 0; i < d.nx(); ++i) ax[i] = d.x0() + d.h() * static_cast<double>(i);
  for (std::size_t j = 0; j < d.ny(); ++j) by[j] = d.y0() + d.h() * static_cast<double>(j);
  Eigen::MatrixXd Ka, Kb;
  Eigen::VectorXd ma, mb;
  axis_matrices(ax, &Ka, &ma);
  axis_matrices(by, &Kb, &mb);
  const long skip = lateral == LateralBC::dirichlet ? 1 : 0;
  std::vector<long> fa, fb;
  for (long i = skip; i + skip < static_cast<long>(ax.size()); ++i) fa.push_back(i);
  for (long j = skip; j + skip < static_cast<long>(by.size()); ++j) fb.push_back(j);
  xs->free.clear();
  for (long b : fb)
    for (long a : fa) xs->free.push_back(a + static_cast<long>(d.nx()) * b);
  xs->separable = true;
  xs->na = fa.size();
  xs->nb = fb.size();
  generalized_eigen(Ka, ma, fa, &xs->la, &xs->Va);
  generalized_eigen(Kb, mb, fb, &xs->lb, &xs->Vb);
  xs->lambda.resize(static_cast<long>(xs->na * xs->nb));
  for (std::size_t b = 0; b < xs->nb; ++b)
    for (std::size_t a = 0; a < xs->na; ++a)
      xs->lambda[static_cast<long>(a + xs->na * b)] = xs->la[static_cast<long>(a)] + xs->lb[static_cast<long>(b)];
  return xs;
}

inline std::shared_ptr<XSpace> half_space_space(const Domain& d, double reach, double ratio) {
  auto xs = std::make_shared<XSpace>();
  xs->dim = d.dim();
  xs->node_of_ambient.assign(d.size(), -1);
  std::size_t fa = 0, fb = 0;
  const auto ax = stretched_axis(d.x0(), d.h(), d.nx(), reach, ratio, &fa);
  Eigen::MatrixXd Ka, Kb;
  Eigen::VectorXd ma, mb;
  axis_matrices(ax, &Ka, &ma);
  const long na = static_cast<long>(ax.size());
  std::vector<long> free_a;
  for (long i = 1; i + 1 < na; ++i) free_a.push_back(i);
  if (d.dim() == 1) {
    for (long i = 0; i < na; ++i) {
      const long amb = (i >= static_cast<long>(fa) && i < static_cast<long>(fa + d.nx())) ? i - static_cast<long>(fa) : -1;
      xs->ambient.push_back(amb);
      if (amb >= 0) xs->node_of_ambient[static_cast<std::size_t>(amb)] = i;
    }
    xs->K = Ka.sparseView();
    xs->m = ma;
    xs->free = free_a;
    generalized_eigen(Ka, ma, xs->free, &xs->lambda, &xs->V);
    return xs;
  }
  const auto by = stretched_axis(d.y0(), d.h(), d.ny(), reach, ratio, &fb);
  axis_matrices(by, &Kb, &mb);
  const long nb = static_cast<long>(by.size());
  std::vector<long> free_b;
  for (long j = 1; j + 1 < nb; ++j) free_b.push_back(j);
  // x-node index a + na * b.
  for (long j = 0; j < nb; ++j)
    for (long i = 0; i < na; ++i) {
      long amb = -1;
      if (i >= static_cast<long>(fa) && i < static_cast<long>(fa + d.nx()) && j >= static_cast<long>(fb) &&
          j < static_cast<long>(fb + d.ny()))
        amb = static_cast<long>(d.index(static_cast<std::size_t>(i) - fa, static_cast<std::size_t>(j) - fb));
      xs->ambient.push_back(amb);
      if (amb >= 0) xs->node_of_ambient[static_cast<std::size_t>(amb)] = i + na * j;
    }
  std::vector<Eigen::Triplet<double>> trip;
  for (long j = 0; j < nb; ++j)
    for (long i = 0; i < na; ++i)
      for (long i2 = std::max(0L, i - 1); i2 <= std::min(na - 1, i + 1); ++i2)
        for (long j2 = std::max(0L, j - 1); j2 <= std::min(nb - 1, j + 1); ++j2) {
          double v = 0.0;
          if (j2 == j) v += Ka(i, i2) * mb[j];
          if (i2 == i) v += ma[i] * Kb(j, j2);
          if (v != 0.0) trip.emplace_back(i + na * j, i2 + na * j2, v);
        }
  xs->K.resize(na * nb, na * nb);
  xs->K.setFromTriplets(trip.begin(), trip.end());
  xs->m.resize(na * nb);
  for (long j = 0; j < nb; ++j)
    for (long i = 0; i < na; ++i) xs->m[i + na * j] = ma[i] * mb[j];
  for (long b : free_b)
    for (long a : free_a) xs->free.push_back(a + na * b);
  xs->separable = true;
  xs->na = free_a.size();
  xs->nb = free_b.size();
  generalized_eigen(Ka, ma, free_a, &xs->la, &xs->Va);
  generalized_eigen(Kb, mb, free_b, &xs->lb, &xs->Vb);
  xs->lambda.resize(static_cast<long>(xs->na * xs->nb));
  for (std::size_t b = 0; b < xs->nb; ++b)
    for (std::size_t a = 0; a < xs->na; ++a)
      xs->lambda[static_cast<long>(a + xs->na * b)] = xs->la[static_cast<long>(a)] + xs->lb[static_cast<long>(b)];
  return xs;
}

/// Small cache of spatial discretisations; the modal decomposition dominates the cost of a solve.
inline std::shared_ptr<const XSpace> cached_space(const DomainPtr& d, Geometry g, LateralBC lateral, double reach,
                                                  double ratio) {
  struct Entry {
    DomainPtr domain;
    Geometry g;
    LateralBC lateral;
    double reach, ratio;
    std::shared_ptr<const XSpace> space;
  };
  static std::mutex mu;
  static std::list<Entry> entries;
  {
    std::lock_guard<std::mutex> lock(mu);
    for (auto it = entries.begin(); it != entries.end(); ++it)
      if (it->domain == d && it->g == g && it->lateral == lateral && it->reach == reach && it->ratio == ratio) {
        entries.splice(entries.begin(), entries, it);
        return entries.front().space;
      }
  }
  std::shared_ptr<const XSpace> sp =
      g == Geometry::half_cylinder ? cylinder_space(*d, lateral) : half_space_space(*d, reach, ratio);
  std::lock_guard<std::mutex> lock(mu);
  entries.push_front(Entry{d, g, lateral, reach, ratio, sp});
  if (entries.size() > 8) entries.pop_back();
  return sp;
}

}  // namespace detail

/// Discrete solution w(x, y) of -div(y^{1-2 sigma} grad w) = 0 on a tensor mesh.
struct ExtensionField {
  DomainPtr domain;
  double sigma = 0.5;
  Geometry geometry = Geometry::half_space;
  LateralBC lateral = LateralBC::none;
  BottomBC bottom = BottomBC::trace;
  TopBC top = TopBC::dirichlet;
  std::shared_ptr<const detail::XSpace> xspace;
  std::shared_ptr<const detail::YMesh> ymesh;
  std::vector<double> y;
  Eigen::MatrixXd w;  // x-nodes x levels
  GridFunction data;  // bottom data u
  double residual = 0.0;
  std::optional<double> coarse_energy;

  std::size_t levels() const { return y.size(); }
  /// w(., y_k) on the ambient grid (zero where the mesh has no node).
  GridFunction level(std::size_t k) const {
    GridFunction g(domain);
    for (std::size_t i = 0; i < domain->size(); ++i) {
      const long x = xspace->node_of_ambient[i];
      if (x >= 0) g[i] = w(x, static_cast<long>(k));
    }
    return g;
  }
  double value(std::size_t ambient_node, std::size_t k) const {
    const long x = xspace->node_of_ambient[ambient_node];
    return x >= 0 ? w(x, static_cast<long>(k)) : 0.0;
  }
};

struct EnergyValue {
  double value = 0.0;
  double discretization_estimate = 0.0;
};

namespace detail {

inline double field_energy(const XSpace& xs, const YMesh& ym, const Eigen::MatrixXd& w) {
  double e = 0.0;
  const long nl = w.cols();
  for (long k = 0; k < nl; ++k) {
    const Eigen::VectorXd col = w.col(k);
    e += ym.mass[static_cast<std::size_t>(k)] * col.dot(xs.K * col);
    if (k + 1 < nl) {
      const Eigen::VectorXd d = w.col(k + 1) - col;
      e += ym.cell_k[static_cast<std::size_t>(k)] * d.cwiseProduct(xs.m).dot(d);
    }
  }
  return e;
}

inline Eigen::VectorXd bottom_data(const XSpace& xs, const GridFunction& u) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<long>(xs.size()));
  for (std::size_t x = 0; x < xs.size(); ++x)
    if (xs.ambient[x] >= 0) v[static_cast<long>(x)] = u[static_cast<std::size_t>(xs.ambient[x])];
  return v;
}

struct SolveResult {
  Eigen::MatrixXd w;
  double residual = 0.0;
};

/*
 * Fast diagonalisation: in the modal x-basis each mode lambda_i decouples into
 * the tridiagonal system (lambda_i M_y + K_y) c_i = r_i over the free levels.
 */
inline SolveResult solve_tensor(const XSpace& xs, const YMesh& ym, const Eigen::VectorXd& data, BottomBC bottom,
                                bool natural_top) {
  const long nx = static_cast<long>(xs.size());
  const long nl = static_cast<long>(ym.y.size());
  const long k0 = bottom == BottomBC::trace ? 1 : 0;
  const long k1 = natural_top ? nl - 1 : nl - 2;
  const long nu = k1 - k0 + 1;
  const long nf = static_cast<long>(xs.free.size());
  // Force vector M_x u on the free nodes.
  Eigen::VectorXd g(nf);
  for (long a = 0; a < nf; ++a) g[a] = xs.m[xs.free[static_cast<std::size_t>(a)]] * data[xs.free[static_cast<std::size_t>(a)]];
  const Eigen::VectorXd ghat = xs.forward(g);
  // Right-hand side per level in modal space is rhs_scale * ghat at one level.
  const double rhs_scale = bottom == BottomBC::trace ? ym.cell_k[0] : 1.0;  // -K_y(1,0) = cell_k[0]
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(nf, nu);
  std::vector<double> diag(static_cast<std::size_t>(nu)), off(static_cast<std::size_t>(nu)), cp(static_cast<std::size_t>(nu)), dp(static_cast<std::size_t>(nu));
  for (long i = 0; i < nf; ++i) {
    const double lam = xs.lambda[i];
    for (long r = 0; r < nu; ++r) {
      const long k = k0 + r;
      double kd = 0.0;
      if (k > 0) kd += ym.cell_k[static_cast<std::size_t>(k - 1)];
      if (k + 1 < nl) kd += ym.cell_k[static_cast<std::size_t>(k)];
      diag[static_cast<std::size_t>(r)] = lam * ym.mass[static_cast<std::size_t>(k)] + kd;
      off[static_cast<std::size_t>(r)] = r + 1 < nu ? -ym.cell_k[static_cast<std::size_t>(k)] : 0.0;
    }
    // Thomas algorithm; the only nonzero right-hand side entry is the first free level.
    const double rhs0 = rhs_scale * ghat[i];
    cp[0] = off[0] / diag[0];
    dp[0] = rhs0 / diag[0];
    for (long r = 1; r < nu; ++r) {
      const double den = diag[static_cast<std::size_t>(r)] - off[static_cast<std::size_t>(r - 1)] * cp[static_cast<std::size_t>(r - 1)];
      cp[static_cast<std::size_t>(r)] = off[static_cast<std::size_t>(r)] / den;
      dp[static_cast<std::size_t>(r)] = (0.0 - off[static_cast<std::size_t>(r - 1)] * dp[static_cast<std::size_t>(r - 1)]) / den;
    }
    C(i, nu - 1) = dp[static_cast<std::size_t>(nu - 1)];
    for (long r = nu - 2; r >= 0; --r) C(i, r) = dp[static_cast<std::size_t>(r)] - cp[static_cast<std::size_t>(r)] * C(i, r + 1);
  }
  SolveResult out;
  out.w = Eigen::MatrixXd::Zero(nx, nl);
  if (bottom == BottomBC::trace) out.w.col(0) = data;
  for (long r = 0; r < nu; ++r) {
    const Eigen::VectorXd vals = xs.backward(C.col(r));
    for (long a = 0; a < nf; ++a) out.w(xs.free[static_cast<std::size_t>(a)], k0 + r) = vals[a];
  }
  // Matrix-free residual of the assembled equations on the free unknowns.
  // Normalised by |f| + |D w| (D the diagonal of the operator), a backward-error measure.
  double rn = 0.0, fn = 0.0, an = 0.0;
  std::vector<Eigen::VectorXd> kw(static_cast<std::size_t>(nl));
  for (long k = 0; k < nl; ++k) kw[static_cast<std::size_t>(k)] = xs.K * out.w.col(k);
  for (long k = k0; k <= k1; ++k) {
    Eigen::VectorXd r = ym.mass[static_cast<std::size_t>(k)] * kw[static_cast<std::size_t>(k)];
    Eigen::VectorXd t = Eigen::VectorXd::Zero(nx);
    if (k > 0) t += ym.cell_k[static_cast<std::size_t>(k - 1)] * (out.w.col(k) - out.w.col(k - 1));
    if (k + 1 < nl) t += ym.cell_k[static_cast<std::size_t>(k)] * (out.w.col(k) - out.w.col(k + 1));
    r += xs.m.cwiseProduct(t);
    if (bottom == BottomBC::weighted_neumann && k == 0) r -= xs.m.cwiseProduct(data);
    for (long a : xs.free) {
      rn += r[a] * r[a];
      double kd = 0.0;
      if (k > 0) kd += ym.cell_k[static_cast<std::size_t>(k - 1)];
      if (k + 1 < nl) kd += ym.cell_k[static_cast<std::size_t>(k)];
      const double diag = ym.mass[static_cast<std::size_t>(k)] * xs.K.coeff(a, a) + kd * xs.m[a];
      an += std::pow(diag * out.w(a, k), 2);
    }
  }
  if (bottom == BottomBC::trace) {
    for (long a : xs.free) fn += std::pow(ym.cell_k[0] * xs.m[a] * data[a], 2);
  } else {
    for (long a : xs.free) fn += std::pow(xs.m[a] * data[a], 2);
  }
  const double scale = std::sqrt(fn) + std::sqrt(an);
  out.residual = scale > 0.0 ? std::sqrt(rn) / scale : 0.0;
  return out;
}

}  // namespace detail

/*
 * Solves the extension problem for data u:
 *   bottom = trace:             w(., 0) = u, minimise the weighted energy;
 *   bottom = weighted_neumann:  minimise E(w) - 2 (u, w(., 0)).
 * half_space uses a laterally stretched mesh with w = 0 far away; the
 * half-cylinder Omega x R+ carries the lateral condition.  The top of the
 * truncated y-range is Dirichlet except for the Neumann-lateral trace
 * problem, whose solution tends to a nonzero constant.
 */
inline ExtensionField solve_extension(const GridFunction& u, double sigma, Geometry geometry, LateralBC lateral,
                                      BottomBC bottom, const ExtensionOptions& opt = {}) {
  if (!(sigma > 0.0 && sigma < 1.0)) throw DomainError("solve_extension: sigma must lie in (0,1)");
  if (geometry == Geometry::half_space && lateral != LateralBC::none)
    throw DomainError("solve_extension: the half-space has no lateral boundary");
  if (geometry == Geometry::half_cylinder && lateral == LateralBC::none)
    throw DomainError("solve_extension: the half-cylinder needs a lateral condition");
  const DomainPtr& d = u.domain_ptr();
  if (bottom == BottomBC::weighted_neumann) {
    if (lateral == LateralBC::neumann) detail::require_zero_mean(u, "Neumann-lateral dual extension");
    if (geometry == Geometry::half_space && d->dim() <= 2.0 * sigma)
      detail::require_zero_mean(u, "half-space dual extension");
  }
  if (lateral == LateralBC::dirichlet || geometry == Geometry::half_space) {
    const double tiny = 1e-12 * u.max_abs();
    for (std::size_t i = 0; i < d->size(); ++i)
      if (std::abs(u[i]) > tiny && !d->in_mask(i))
        throw SideConditionError("solve_extension: data must vanish outside Omega");
  }
  ExtensionField f;
  f.domain = d;
  f.sigma = sigma;
  f.geometry = geometry;
  f.lateral = lateral;
  f.bottom = bottom;
  f.data = u;
  const bool natural = opt.top == TopBC::natural ||
                       (opt.top == TopBC::automatic && lateral == LateralBC::neumann && bottom == BottomBC::trace);
  f.top = natural ? TopBC::natural : TopBC::dirichlet;
  const double diam = std::max(d->diameter(), d->h());
  const auto xs = detail::cached_space(d, geometry, lateral, opt.far_factor * diam, opt.ratio);
  auto ym = std::make_shared<detail::YMesh>(detail::make_y_mesh(sigma, diam, opt));
  const Eigen::VectorXd data = detail::bottom_data(*xs, u);
  auto sol = detail::solve_tensor(*xs, *ym, data, bottom, natural);
  if (!(sol.residual <= opt.tolerance))
    {
    std::ostringstream msg;
    msg << "solve_extension: relative residual " << std::scientific << sol.residual << " above tolerance";
    throw SolverError(msg.str(), sol.residual);
  }
  f.residual = sol.residual;
  f.w = std::move(sol.w);
  f.y = ym->y;
  if (opt.estimate_error) {
    ExtensionOptions half = opt;
    half.levels = std::max<std::size_t>(4, opt.levels / 2);
    const detail::YMesh yc = detail::make_y_mesh(sigma, diam, half);
    const auto coarse = detail::solve_tensor(*xs, yc, data, bottom, natural);
    double e = detail::field_energy(*xs, yc, coarse.w);
    if (bottom == BottomBC::weighted_neumann) e -= 2.0 * coarse.w.col(0).cwiseProduct(xs->m).dot(data);
    f.coarse_energy = e;
  }
  f.xspace = xs;
  f.ymesh = ym;
  return f;
}

/// Weighted Dirichlet energy iint y^{1-2 sigma} |grad w|^2 of the discrete field.
inline EnergyValue energy(const ExtensionField& w) {
  if (!w.xspace || !w.xspace->has_operator) throw DomainError("energy: field carries no discretisation");
  EnergyValue e;
  e.value = detail::field_energy(*w.xspace, *w.ymesh, w.w);
  if (w.coarse_energy && w.bottom == BottomBC::trace) e.discretization_estimate = std::abs(e.value - *w.coarse_energy) / 3.0;
  return e;
}

/// Energy of arbitrary values on the field's mesh (for minimality checks).
inline double energy_of(const ExtensionField& w, const Eigen::MatrixXd& values) {
  if (values.rows() != w.w.rows() || values.cols() != w.w.cols()) throw GridError("energy_of: shape mismatch");
  return detail::field_energy(*w.xspace, *w.ymesh, values);
}

/// E(w) - 2 (u, w(., 0)), the functional minimised by the dual (weighted-Neumann) problems.
inline EnergyValue dual_functional(const ExtensionField& w) {
  EnergyValue e;
  const Eigen::VectorXd data = detail::bottom_data(*w.xspace, w.data);
  e.value = detail::field_energy(*w.xspace, *w.ymesh, w.w) - 2.0 * w.w.col(0).cwiseProduct(w.xspace->m).dot(data);
  if (w.coarse_energy) e.discretization_estimate = std::abs(e.value - *w.coarse_energy) / 3.0;
  return e;
}

/*
 * Generalised Dirichlet-to-Neumann map.  Near y = 0 the field behaves like
 * u + a y^{2 sigma} + b y^2; both coefficients are fitted on the first two
 * levels and (-Delta)^sigma u = -(C_sigma / 2 sigma) lim y^{1-2 sigma} d_y w
 * = -C_sigma a.
 */
inline GridFunction dtn_trace(const ExtensionField& w) {
  if (w.bottom != BottomBC::trace) throw DomainError("dtn_trace: field was not solved with trace data");
  const double s = w.sigma;
  std::size_t below = 0;
  for (double yy : w.y)
    if (yy > 0.0 && yy < 0.01 * w.ymesh->graded_top) ++below;
  if (below < 3) throw GridError("dtn_trace: y-mesh too coarse near y = 0");
  const double y1 = w.y[1], y2 = w.y[2];
  const double p1 = std::pow(y1, 2 * s), p2 = std::pow(y2, 2 * s), q1 = y1 * y1, q2 = y2 * y2;
  const double det = p1 * q2 - p2 * q1;
  const double cs = specfun::c_sigma(s).value;
  GridFunction out(w.domain);
  for (std::size_t i : w.domain->closure_nodes()) {
    const long x = w.xspace->node_of_ambient[i];
    if (x < 0) continue;
    if (w.lateral == LateralBC::dirichlet && !w.domain->in_mask(i)) continue;
    const double u0 = w.w(x, 0);
    const double r1 = w.w(x, 1) - u0, r2 = w.w(x, 2) - u0;
    const double a = (r1 * q2 - r2 * q1) / det;
    out[i] = -cs * a;
  }
  out.set_label("dtn sigma=" + std::to_string(s));
  return out;
}

/// Galerkin flux (C_sigma / 2 sigma) (A w)_{y=0} / m_x: the DtN map consistent with the discrete energy.
inline GridFunction dtn_flux(const ExtensionField& w) {
  if (w.bottom != BottomBC::trace) throw DomainError("dtn_flux: field was not solved with trace data");
  const auto& xs = *w.xspace;
  const auto& ym = *w.ymesh;
  const Eigen::VectorXd c0 = w.w.col(0), c1 = w.w.col(1);
  const Eigen::VectorXd r = ym.mass[0] * (xs.K * c0) + ym.cell_k[0] * xs.m.cwiseProduct(c0 - c1);
  const double f = specfun::c_sigma(w.sigma).value / (2.0 * w.sigma);
  GridFunction out(w.domain);
  for (std::size_t i : w.domain->closure_nodes()) {
    const long x = xs.node_of_ambient[i];
    if (x < 0) continue;
    if (w.lateral == LateralBC::dirichlet && !w.domain->in_mask(i)) continue;
    out[i] = f * r[x] / xs.m[x];
  }
  return out;
}

/// Neumann-to-Dirichlet map (-Delta)^{-sigma} u = (2 sigma / C_sigma) w(., 0).
inline GridFunction ntd_trace(const ExtensionField& w) {
  if (w.bottom != BottomBC::weighted_neumann) throw DomainError("ntd_trace: field was not solved with Neumann data");
  const double f = 2.0 * w.sigma / specfun::c_sigma(w.sigma).value;
  GridFunction out(w.domain);
  for (std::size_t i : w.domain->closure_nodes()) {
    if (w.lateral == LateralBC::dirichlet && !w.domain->in_mask(i)) continue;
    out[i] = f * w.value(i, 0);
  }
  if (w.lateral == LateralBC::neumann) {
    const double mean = integral(out) / integral(indicator(w.domain));
    for (std::size_t i : w.domain->closure_nodes()) out[i] -= mean;
  }
  out.set_label("ntd sigma=" + std::to_string(w.sigma));
  return out;
}

/*
 * Reference value of the form for the field's spatial discretisation with an
 * exact (untruncated) y-direction: sum_i lambda_i^{+-sigma} |(u, v_i)|^2 over
 * the x-modes.  Isolates the y-discretisation error of the energy identities.
 */
inline double semidiscrete_form(const ExtensionField& w) {
  const auto& xs = *w.xspace;
  const Eigen::VectorXd data = detail::bottom_data(xs, w.data);
  Eigen::VectorXd g(static_cast<long>(xs.free.size()));
  for (std::size_t a = 0; a < xs.free.size(); ++a) g[static_cast<long>(a)] = xs.m[xs.free[a]] * data[xs.free[a]];
  const Eigen::VectorXd c = xs.forward(g);
  const double e = w.bottom == BottomBC::trace ? w.sigma : -w.sigma;
  const double lmax = xs.lambda.maxCoeff();
  double q = 0.0;
  for (long i = 0; i < c.size(); ++i)
    if (xs.lambda[i] > 1e-12 * lmax) q += std::pow(xs.lambda[i], e) * c[i] * c[i];
  return q;
}

/// Unit-mass normalisation of y^{2s} / (|x|^2 + y^2)^{(n+2s)/2}, by numerical quadrature.
inline double poisson_normalization(int n, double s) {
  if (!(s > 0.0 && s < 1.0)) throw DomainError("poisson_normalization: s must lie in (0,1)");
  // x = y tan(theta), phi = pi/2 - theta.
  double mass;
  if (n == 1) {
    mass = 2.0 * quad::tanh_sinh([s](double phi) { return std::pow(std::sin(phi), 2 * s - 1); }, 0.0, 0.5 * std::numbers::pi);
  } else if (n == 2) {
    mass = 2.0 * std::numbers::pi *
           quad::tanh_sinh([s](double phi) { return std::cos(phi) * std::pow(std::sin(phi), 2 * s - 1); }, 0.0,
                           0.5 * std::numbers::pi);
  } else {
    throw DomainError("poisson_normalization: only n = 1, 2 supported");
  }
  return 1.0 / mass;
}

/// Direct quadrature of the whole-space Poisson-kernel representation at points (x[, y_space], y).
inline std::vector<double> poisson_extension(const GridFunction& u, double s,
                                             const std::vector<std::array<double, 3>>& points) {
  if (!(s > 0.0 && s < 1.0)) throw DomainError("poisson_extension: s must lie in (0,1)");
  const Domain& d = u.domain();
  const int n = d.dim();
  const double c = poisson_normalization(n, s);
  const double hn = std::pow(d.h(), n);
  std::vector<std::size_t> supp;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (u[i] != 0.0) supp.push_back(i);
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const double yy = p[2];
    if (!(yy > 0.0)) throw DomainError("poisson_extension: y must be positive");
    double acc = 0.0;
    for (std::size_t i : supp) {
      const double dx = p[0] - d.x(i), dz = n == 2 ? p[1] - d.y(i) : 0.0;
      acc += u[i] * std::pow(dx * dx + dz * dz + yy * yy, -0.5 * (n + 2.0 * s));
    }
    out.push_back(c * std::pow(yy, 2 * s) * hn * acc);
  }
  return out;
}

/// sum_j (u, psi_j) Q_s(y sqrt(mu_j)) psi_j at the given y-levels (Neumann eigenbasis).
inline ExtensionField bessel_series_extension(const GridFunction& u, double s, const EigenBasis& basis,
                                              const std::vector<double>& y_levels) {
  if (basis.kind != BasisKind::neumann) throw DomainError("bessel_series_extension: basis must be Neumann");
  if (!(s > 0.0 && s < 1.0)) throw DomainError("bessel_series_extension: s must lie in (0,1)");
  const Eigen::VectorXd c = basis.coefficients(u);
  auto xs = std::make_shared<detail::XSpace>();
  xs->has_operator = false;
  const Domain& d = *basis.domain;
  xs->node_of_ambient.assign(d.size(), -1);
  for (std::size_t i : d.closure_nodes()) {
    xs->node_of_ambient[i] = static_cast<long>(xs->ambient.size());
    xs->ambient.push_back(static_cast<long>(i));
  }
  ExtensionField f;
  f.domain = basis.domain;
  f.sigma = s;
  f.geometry = Geometry::half_cylinder;
  f.lateral = LateralBC::neumann;
  f.bottom = BottomBC::trace;
  f.top = TopBC::natural;
  f.data = u;
  f.y = y_levels;
  f.w = Eigen::MatrixXd::Zero(static_cast<long>(xs->ambient.size()), static_cast<long>(y_levels.size()));
  for (std::size_t k = 0; k < y_levels.size(); ++k) {
    Eigen::VectorXd a(static_cast<long>(basis.size()));
    for (std::size_t j = 0; j < basis.size(); ++j)
      a[static_cast<long>(j)] = c[static_cast<long>(j)] * specfun::q_profile(s, y_levels[k] * std::sqrt(basis.eigenvalues[j])).value;
    const Eigen::VectorXd vals = basis.modes * a;
    for (std::size_t x = 0; x < xs->ambient.size(); ++x) f.w(static_cast<long>(x), static_cast<long>(k)) = vals[xs->ambient[x]];
  }
  f.xspace = xs;
  return f;
}

/// Values of `from` placed on the mesh of `to` (identical y-meshes; missing nodes are zero).
inline Eigen::MatrixXd transfer_field(const ExtensionField& from, const ExtensionField& to) {
  if (from.y != to.y) throw GridError("transfer_field: y-meshes differ");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(to.w.rows(), to.w.cols());
  for (std::size_t x = 0; x < to.xspace->size(); ++x) {
    const long amb = to.xspace->ambient[x];
    if (amb < 0) continue;
    const long sx = from.xspace->node_of_ambient[static_cast<std::size_t>(amb)];
    if (sx >= 0) out.row(static_cast<long>(x)) = from.w.row(sx);
  }
  return out;
}

// --------------------------------------------------------------------------
// Export.
// --------------------------------------------------------------------------

/// CSV slices "x[,y_space],y,value" of the ambient grid nodes at the requested level indices.
inline void write_slices_csv(std::ostream& os, const ExtensionField& f, const std::vector<std::size_t>& levels) {
  const Domain& d = *f.domain;
  os << (d.dim() == 1 ? "x,y,value\n" : "x,y_space,y,value\n") << std::setprecision(17);
  for (std::size_t k : levels) {
    if (k >= f.levels()) throw GridError("write_slices_csv: level out of range");
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (f.xspace->node_of_ambient[i] < 0) continue;
      os << d.x(i) << ',';
      if (d.dim() == 2) os << d.y(i) << ',';
      os << f.y[k] << ',' << f.value(i, k) << '\n';
    }
  }
}

/*
 * Binary dump: the GridFunction header of the spatial grid (see write_binary),
 * then u64 level count L, L x f64 y-levels, and L blocks of nx*ny f64 values
 * on the ambient grid (zero where the mesh has no node).
 */
inline void write_binary(std::ostream& os, const ExtensionField& f) {
  detail::write_domain_header(os, *f.domain);
  detail::put<std::uint64_t>(os, f.domain->size());
  for (double v : f.data.values()) detail::put<double>(os, v);
  detail::put<std::uint64_t>(os, f.levels());
  for (double y : f.y) detail::put<double>(os, y);
  for (std::size_t k = 0; k < f.levels(); ++k)
    for (std::size_t i = 0; i < f.domain->size(); ++i) detail::put<double>(os, f.value(i, k));
}

}  // namespace fraclap

#endif  // FRACLAP_EXTENSION_HPP
