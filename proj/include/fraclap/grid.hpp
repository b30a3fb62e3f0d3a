#ifndef FRACLAP_GRID_HPP
#define FRACLAP_GRID_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <iomanip>
#include <istream>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <queue>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "fraclap/errors.hpp"

namespace fraclap {

/// Labels for the parts of a dumbbell; plain domains use `body`.
enum class Region : std::uint8_t { outside = 0, body = 1, lobe1 = 2, lobe2 = 3, channel = 4 };

/*
 * A uniform axis-aligned grid (1-D or 2-D) together with a domain Omega given
 * as a union of grid cells.  Nodes whose adjacent cells all belong to Omega
 * form the mask (interior nodes); nodes touching at least one Omega cell form
 * the closure.  Quadrature weights are the lumped (trapezoidal) cell weights
 * of the closure.  Instances are immutable after construction.
 */
class Domain {
 public:
  Domain(int dim, std::size_t nx, std::size_t ny, double x0, double y0, double h,
         std::vector<std::uint8_t> cells, bool convex, std::vector<Region> cell_regions = {})
      : dim_(dim), nx_(nx), ny_(dim == 1 ? 1 : ny), x0_(x0), y0_(y0), h_(h),
        cells_(std::move(cells)), convex_(convex) {
    if (dim_ != 1 && dim_ != 2) throw GridError("Domain: dim must be 1 or 2");
    if (!(h_ > 0.0)) throw GridError("Domain: spacing must be positive");
    if (nx_ < 2 || (dim_ == 2 && ny_ < 2)) throw GridError("Domain: need at least two nodes per axis");
    if (cells_.size() != cell_count()) throw GridError("Domain: cell mask has wrong size");
    if (cell_regions.empty()) {
      cell_regions.assign(cells_.size(), Region::outside);
      for (std::size_t c = 0; c < cells_.size(); ++c)
        if (cells_[c]) cell_regions[c] = Region::body;
    }
    if (cell_regions.size() != cells_.size()) throw GridError("Domain: region labels have wrong size");
    build(cell_regions);
  }

  int dim() const { return dim_; }
  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t size() const { return nx_ * ny_; }
  double h() const { return h_; }
  double x0() const { return x0_; }
  double y0() const { return y0_; }
  bool convex() const { return convex_; }
  /// Number of connected components of Omega (cells joined through shared faces).
  int components() const { return components_; }

  std::size_t index(std::size_t i, std::size_t j = 0) const { return i + nx_ * j; }
  std::size_t ix(std::size_t idx) const { return idx % nx_; }
  std::size_t iy(std::size_t idx) const { return idx / nx_; }
  double x(std::size_t idx) const { return x0_ + h_ * static_cast<double>(ix(idx)); }
  double y(std::size_t idx) const { return dim_ == 1 ? 0.0 : y0_ + h_ * static_cast<double>(iy(idx)); }
  std::array<double, 2> point(std::size_t idx) const { return {x(idx), y(idx)}; }

  /// Ambient box extent along an axis.
  double extent(int axis) const {
    return h_ * static_cast<double>((axis == 0 ? nx_ : ny_) - 1);
  }
  /// Diameter of the bounding box of Omega.
  double diameter() const { return diameter_; }

  std::size_t cell_count() const { return (nx_ - 1) * (dim_ == 1 ? 1 : ny_ - 1); }
  bool cell(std::size_t ci, std::size_t cj = 0) const { return cells_[ci + (nx_ - 1) * cj] != 0; }
  const std::vector<std::uint8_t>& cells() const { return cells_; }

  bool in_mask(std::size_t idx) const { return mask_[idx] != 0; }
  bool in_closure(std::size_t idx) const { return closure_[idx] != 0; }
  double weight(std::size_t idx) const { return weights_[idx]; }
  const std::vector<double>& weights() const { return weights_; }
  Region region(std::size_t idx) const { return regions_[idx]; }
  /// Euclidean distance from a mask node to the nearest node outside the mask (0 outside).
  double boundary_distance(std::size_t idx) const { return bdist_[idx]; }
  /// Distance from a node to the ambient box boundary.
  double box_distance(std::size_t idx) const {
    double d = h_ * static_cast<double>(std::min(ix(idx), nx_ - 1 - ix(idx)));
    if (dim_ == 2) d = std::min(d, h_ * static_cast<double>(std::min(iy(idx), ny_ - 1 - iy(idx))));
    return d;
  }

  const std::vector<std::size_t>& mask_nodes() const { return mask_nodes_; }
  const std::vector<std::size_t>& closure_nodes() const { return closure_nodes_; }
  std::vector<std::size_t> region_nodes(Region r) const {
    std::vector<std::size_t> out;
    for (std::size_t i : mask_nodes_)
      if (regions_[i] == r) out.push_back(i);
    return out;
  }
  /// Mask nodes at distance >= margin from the complement of the mask.
  std::vector<std::size_t> interior_nodes(double margin) const {
    std::vector<std::size_t> out;
    for (std::size_t i : mask_nodes_)
      if (bdist_[i] >= margin - 1e-12 * h_) out.push_back(i);
    return out;
  }

  bool same_grid(const Domain& o) const {
    return dim_ == o.dim_ && nx_ == o.nx_ && ny_ == o.ny_ && x0_ == o.x0_ && y0_ == o.y0_ &&
           h_ == o.h_ && cells_ == o.cells_;
  }

 private:
  void build(const std::vector<Region>& cell_regions) {
    const std::size_t n = size();
    mask_.assign(n, 0);
    closure_.assign(n, 0);
    weights_.assign(n, 0.0);
    regions_.assign(n, Region::outside);
    const double cell_share = dim_ == 1 ? 0.5 * h_ : 0.25 * h_ * h_;
    const std::size_t cx = nx_ - 1;
    const std::size_t cy = dim_ == 1 ? 1 : ny_ - 1;
    double bx0 = 1e300, bx1 = -1e300, by0 = 1e300, by1 = -1e300;
    for (std::size_t j = 0; j < ny_; ++j) {
      for (std::size_t i = 0; i < nx_; ++i) {
        const std::size_t idx = index(i, j);
        int touching = 0, possible = 0;
        Region reg = Region::outside;
        for (int dj = (dim_ == 1 ? 0 : -1); dj <= 0; ++dj) {
          for (int di = -1; di <= 0; ++di) {
            const long ci = static_cast<long>(i) + di, cj = static_cast<long>(j) + dj;
            if (ci < 0 || cj < 0 || ci >= static_cast<long>(cx) || cj >= static_cast<long>(cy)) continue;
            ++possible;
            const std::size_t c = static_cast<std::size_t>(ci) + cx * static_cast<std::size_t>(cj);
            if (cells_[c]) {
              ++touching;
              if (reg == Region::outside || cell_regions[c] == Region::channel) reg = cell_regions[c];
            }
          }
        }
        const int full = dim_ == 1 ? 2 : 4;
        if (touching > 0) {
          closure_[idx] = 1;
          weights_[idx] = cell_share * touching;
          regions_[idx] = reg;
          bx0 = std::min(bx0, x(idx));
          bx1 = std::max(bx1, x(idx));
          by0 = std::min(by0, y(idx));
          by1 = std::max(by1, y(idx));
        }
        if (touching == full && possible == full) mask_[idx] = 1;
      }
    }
    diameter_ = std::hypot(bx1 - bx0, dim_ == 1 ? 0.0 : by1 - by0);
    for (std::size_t i = 0; i < n; ++i) {
      if (mask_[i]) mask_nodes_.push_back(i);
      if (closure_[i]) closure_nodes_.push_back(i);
    }
    // Region of interior nodes: a node on a lobe/channel interface belongs to the channel.
    // Distance to complement of the mask.
    std::vector<std::size_t> outside_nodes;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask_[i]) continue;
      bool adjacent = false;
      const std::size_t ii = ix(i), jj = iy(i);
      auto check = [&](long a, long b) {
        if (a < 0 || b < 0 || a >= static_cast<long>(nx_) || b >= static_cast<long>(ny_)) return;
        if (mask_[index(static_cast<std::size_t>(a), static_cast<std::size_t>(b))]) adjacent = true;
      };
      for (long db = -1; db <= 1; ++db)
        for (long da = -1; da <= 1; ++da) check(static_cast<long>(ii) + da, static_cast<long>(jj) + db);
      if (adjacent) outside_nodes.push_back(i);
    }
    bdist_.assign(n, 0.0);
    for (std::size_t i : mask_nodes_) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t o : outside_nodes)
        best = std::min(best, std::hypot(x(i) - x(o), y(i) - y(o)));
      bdist_[i] = best;
    }
    // Components of Omega through shared cell faces.
    std::vector<int> label(cells_.size(), -1);
    components_ = 0;
    for (std::size_t c0 = 0; c0 < cells_.size(); ++c0) {
      if (!cells_[c0] || label[c0] >= 0) continue;
      std::queue<std::size_t> q;
      q.push(c0);
      label[c0] = components_;
      while (!q.empty()) {
        const std::size_t c = q.front();
        q.pop();
        const long ci = static_cast<long>(c % cx), cj = static_cast<long>(c / cx);
        const long nb[4][2] = {{ci - 1, cj}, {ci + 1, cj}, {ci, cj - 1}, {ci, cj + 1}};
        for (const auto& p : nb) {
          if (p[0] < 0 || p[1] < 0 || p[0] >= static_cast<long>(cx) || p[1] >= static_cast<long>(cy)) continue;
          const std::size_t d = static_cast<std::size_t>(p[0]) + cx * static_cast<std::size_t>(p[1]);
          if (cells_[d] && label[d] < 0) {
            label[d] = components_;
            q.push(d);
          }
        }
      }
      ++components_;
    }
  }

  int dim_;
  std::size_t nx_, ny_;
  double x0_, y0_, h_;
  std::vector<std::uint8_t> cells_;
  bool convex_;
  int components_ = 0;
  double diameter_ = 0.0;
  std::vector<std::uint8_t> mask_, closure_;
  std::vector<double> weights_;
  std::vector<Region> regions_;
  std::vector<double> bdist_;
  std::vector<std::size_t> mask_nodes_, closure_nodes_;
};

using DomainPtr = std::shared_ptr<const Domain>;

/// Uniform grid on [a, b] with n_nodes nodes; Omega = (a, b).
inline DomainPtr make_interval(double a, double b, std::size_t n_nodes) {
  if (!(a < b)) throw GridError("make_interval: need a < b");
  if (n_nodes < 16) throw GridError("make_interval: need at least 16 nodes");
  const double h = (b - a) / static_cast<double>(n_nodes - 1);
  return std::make_shared<const Domain>(1, n_nodes, 1, a, 0.0, h,
                                        std::vector<std::uint8_t>(n_nodes - 1, 1), true);
}

/// Uniform grid on [x0,x1] x [y0,y1] with nx x ny nodes; Omega is the open rectangle.
inline DomainPtr make_rectangle(double x0, double x1, double y0, double y1, std::size_t nx,
                                std::size_t ny) {
  if (!(x0 < x1 && y0 < y1)) throw GridError("make_rectangle: degenerate rectangle");
  if (nx < 5 || ny < 5) throw GridError("make_rectangle: need at least 5 nodes per axis");
  const double hx = (x1 - x0) / static_cast<double>(nx - 1);
  const double hy = (y1 - y0) / static_cast<double>(ny - 1);
  if (std::abs(hx - hy) > 1e-12 * hx) throw GridError("make_rectangle: spacing must be equal on both axes");
  return std::make_shared<const Domain>(2, nx, ny, x0, y0, hx,
                                        std::vector<std::uint8_t>((nx - 1) * (ny - 1), 1), true);
}

/*
 * Two congruent rectangular lobes [0,W]x[0,H] and [W+L, 2W+L]x[0,H] joined by a
 * horizontal channel of length L and the given width, centred at height H/2.
 * A cell belongs to the channel when its centre lies inside the channel strip.
 */
struct DumbbellSpec {
  double lobe_width = 1.0;
  double lobe_height = 1.0;
  double channel_width = 0.1;
  double channel_length = 0.5;
  std::size_t nx = 81;
  std::size_t ny = 33;
};

namespace detail {
inline DomainPtr build_dumbbell(const DumbbellSpec& spec, bool with_channel) {
  if (!(spec.lobe_width > 0 && spec.lobe_height > 0)) throw GridError("make_dumbbell: lobes must have positive extent");
  if (!(spec.channel_length > 0)) throw GridError("make_dumbbell: lobes overlap or touch (channel_length <= 0)");
  if (spec.nx < 5 || spec.ny < 5) throw GridError("make_dumbbell: grid too coarse");
  const double lx = 2.0 * spec.lobe_width + spec.channel_length;
  const double h = lx / static_cast<double>(spec.nx - 1);
  const double hy = spec.lobe_height / static_cast<double>(spec.ny - 1);
  if (std::abs(h - hy) > 1e-9 * h) throw GridError("make_dumbbell: node counts give unequal spacing");
  if (with_channel && spec.channel_width < h * (1.0 - 1e-9))
    throw GridError("make_dumbbell: channel narrower than one cell");
  if (with_channel && spec.channel_width > spec.lobe_height * (1.0 + 1e-12))
    throw GridError("make_dumbbell: channel wider than the lobes");
  const std::size_t cx = spec.nx - 1, cy = spec.ny - 1;
  std::vector<std::uint8_t> cells(cx * cy, 0);
  std::vector<Region> reg(cx * cy, Region::outside);
  const double ymid = 0.5 * spec.lobe_height;
  for (std::size_t j = 0; j < cy; ++j) {
    for (std::size_t i = 0; i < cx; ++i) {
      const double xc = (static_cast<double>(i) + 0.5) * h, yc = (static_cast<double>(j) + 0.5) * h;
      Region r = Region::outside;
      if (xc < spec.lobe_width) r = Region::lobe1;
      else if (xc > spec.lobe_width + spec.channel_length) r = Region::lobe2;
      else if (with_channel && std::abs(yc - ymid) <= 0.5 * spec.channel_width + 1e-12) r = Region::channel;
      if (r != Region::outside) {
        cells[i + cx * j] = 1;
        reg[i + cx * j] = r;
      }
    }
  }
  return std::make_shared<const Domain>(2, spec.nx, spec.ny, 0.0, 0.0, h, std::move(cells), false,
                                        std::move(reg));
}
}  // namespace detail

/// Dumbbell: two lobes joined by a thin channel (non-convex, connected).
inline DomainPtr make_dumbbell(const DumbbellSpec& spec) {
  if (!(spec.channel_width > 0.0)) throw GridError("make_dumbbell: channel width must be positive");
  return detail::build_dumbbell(spec, true);
}

/// The two dumbbell lobes without the channel (two separate components).
inline DomainPtr make_split_lobes(const DumbbellSpec& spec) { return detail::build_dumbbell(spec, false); }

/// Real values on all nodes of a domain's ambient grid.
class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(DomainPtr d) : domain_(std::move(d)), values_(domain_->size(), 0.0) {}
  GridFunction(DomainPtr d, std::vector<double> v, std::string label = {})
      : domain_(std::move(d)), values_(std::move(v)), label_(std::move(label)) {
    if (values_.size() != domain_->size()) throw GridError("GridFunction: value count does not match grid");
    for (double x : values_)
      if (!std::isfinite(x)) throw GridError("GridFunction: non-finite value");
  }

  const Domain& domain() const { return *domain_; }
  const DomainPtr& domain_ptr() const { return domain_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::vector<double>& data() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  const std::string& label() const { return label_; }
  void set_label(std::string l) { label_ = std::move(l); }

  /// True when the function vanishes outside the mask and within `margin` of its complement.
  bool supported_in_mask(double margin = 0.0) const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (values_[i] == 0.0) continue;
      if (!domain_->in_mask(i)) return false;
      if (domain_->boundary_distance(i) < margin - 1e-12) return false;
    }
    return true;
  }
  double max() const { return *std::max_element(values_.begin(), values_.end()); }
  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  double max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }
  bool is_zero() const { return max_abs() == 0.0; }

  GridFunction abs() const {
    GridFunction r(*this);
    for (double& v : r.values_) v = std::abs(v);
    return r;
  }
  GridFunction& operator+=(const GridFunction& o) {
    check_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
  }
  GridFunction& operator-=(const GridFunction& o) {
    check_same(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
  }
  GridFunction& operator*=(double a) {
    for (double& v : values_) v *= a;
    return *this;
  }
  friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
  friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
  friend GridFunction operator*(double s, GridFunction a) { return a *= s; }

  void check_same(const GridFunction& o) const {
    if (domain_ != o.domain_ && !domain_->same_grid(*o.domain_))
      throw GridError("GridFunction: functions live on different grids");
  }

 private:
  DomainPtr domain_;
  std::vector<double> values_;
  std::string label_;
};

/// Builds a grid function from a callable f(x) (1-D) or f(x, y) (2-D).
template <class F>
GridFunction sample(const DomainPtr& d, F&& f, std::string label = {}) {
  std::vector<double> v(d->size());
  for (std::size_t i = 0; i < d->size(); ++i) {
    if constexpr (std::is_invocable_v<F, double, double>) v[i] = f(d->x(i), d->y(i));
    else v[i] = f(d->x(i));
  }
  return GridFunction(d, std::move(v), std::move(label));
}

/// Trapezoidal (lumped cell) quadrature of u v over the closure of Omega.
inline double inner_product(const GridFunction& u, const GridFunction& v) {
  u.check_same(v);
  const auto& w = u.domain().weights();
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += w[i] * u[i] * v[i];
  return acc;
}

/// (u, 1) over Omega.
inline double integral(const GridFunction& u) {
  const auto& w = u.domain().weights();
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += w[i] * u[i];
  return acc;
}

inline double l2_norm(const GridFunction& u) { return std::sqrt(inner_product(u, u)); }

/// Constant function 1 on the closure of Omega, 0 elsewhere.
inline GridFunction indicator(const DomainPtr& d) {
  GridFunction one(d);
  for (std::size_t i : d->closure_nodes()) one[i] = 1.0;
  return one;
}

// --------------------------------------------------------------------------
// Discrete Laplacian on the cell complex of Omega.
// --------------------------------------------------------------------------

enum class BoundaryKind { dirichlet, neumann };

/*
 * Energy sum_e c_e (v_a - v_b)^2 over grid edges of Omega's cells (weight 1/h
 * per cell in 1-D, 1/2 per adjacent cell in 2-D) and the lumped mass of the
 * closure.  Dirichlet keeps only mask nodes as unknowns (others fixed at 0);
 * Neumann keeps all closure nodes.  K v = lambda M v is the standard
 * 3-/5-point discretisation of -Delta.
 */
struct GraphLaplacian {
  std::vector<std::size_t> nodes;       // ambient indices of the unknowns
  std::vector<long> position;           // ambient index -> unknown index (-1 if fixed)
  Eigen::SparseMatrix<double> stiffness;
  Eigen::VectorXd mass;
};

inline GraphLaplacian graph_laplacian(const Domain& d, BoundaryKind kind) {
  GraphLaplacian g;
  g.nodes = kind == BoundaryKind::dirichlet ? d.mask_nodes() : d.closure_nodes();
  g.position.assign(d.size(), -1);
  for (std::size_t k = 0; k < g.nodes.size(); ++k) g.position[g.nodes[k]] = static_cast<long>(k);
  const std::size_t n = g.nodes.size();
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<double> diag(n, 0.0);
  auto add_edge = [&](std::size_t a, std::size_t b, double c) {
    const long pa = g.position[a], pb = g.position[b];
    if (pa >= 0) diag[pa] += c;
    if (pb >= 0) diag[pb] += c;
    if (pa >= 0 && pb >= 0) {
      trip.emplace_back(pa, pb, -c);
      trip.emplace_back(pb, pa, -c);
    }
  };
  const std::size_t cx = d.nx() - 1;
  if (d.dim() == 1) {
    for (std::size_t c = 0; c < cx; ++c)
      if (d.cell(c)) add_edge(c, c + 1, 1.0 / d.h());
  } else {
    const std::size_t cy = d.ny() - 1;
    for (std::size_t j = 0; j < cy; ++j) {
      for (std::size_t i = 0; i < cx; ++i) {
        if (!d.cell(i, j)) continue;
        add_edge(d.index(i, j), d.index(i + 1, j), 0.5);
        add_edge(d.index(i, j + 1), d.index(i + 1, j + 1), 0.5);
        add_edge(d.index(i, j), d.index(i, j + 1), 0.5);
        add_edge(d.index(i + 1, j), d.index(i + 1, j + 1), 0.5);
      }
    }
  }
  for (std::size_t k = 0; k < n; ++k) trip.emplace_back(k, k, diag[k]);
  g.stiffness.resize(static_cast<long>(n), static_cast<long>(n));
  g.stiffness.setFromTriplets(trip.begin(), trip.end());
  g.mass.resize(static_cast<long>(n));
  for (std::size_t k = 0; k < n; ++k) g.mass[static_cast<long>(k)] = d.weight(g.nodes[k]);
  return g;
}

/// Nodal -Delta u by second differences with u = 0 outside the ambient grid.
inline GridFunction negative_laplacian(const GridFunction& u) {
  const Domain& d = u.domain();
  GridFunction r(u.domain_ptr());
  const double ih2 = 1.0 / (d.h() * d.h());
  auto val = [&](long i, long j) {
    if (i < 0 || j < 0 || i >= static_cast<long>(d.nx()) || j >= static_cast<long>(d.ny())) return 0.0;
    return u[d.index(static_cast<std::size_t>(i), static_cast<std::size_t>(j))];
  };
  for (std::size_t idx = 0; idx < d.size(); ++idx) {
    const long i = static_cast<long>(d.ix(idx)), j = static_cast<long>(d.iy(idx));
    double lap = val(i - 1, j) + val(i + 1, j) - 2.0 * val(i, j);
    if (d.dim() == 2) lap += val(i, j - 1) + val(i, j + 1) - 2.0 * val(i, j);
    r[idx] = -lap * ih2;
  }
  r.set_label("-lap(" + u.label() + ")");
  return r;
}

// --------------------------------------------------------------------------
// Test-function generation.
// --------------------------------------------------------------------------

enum class SignConstraint { none, nonnegative, sign_changing, zero_mean };

inline const char* to_string(SignConstraint s) {
  switch (s) {
    case SignConstraint::none: return "none";
    case SignConstraint::nonnegative: return "nonnegative";
    case SignConstraint::sign_changing: return "sign-changing";
    case SignConstraint::zero_mean: return "zero-mean";
  }
  return "?";
}

struct TestSuiteSpec {
  std::size_t count = 20;
  int smoothness = 8;        // bump exponent k in (1 - r^2/R^2)_+^k
  SignConstraint sign = SignConstraint::none;
  std::uint64_t seed = 7;
  Region region = Region::outside;  // outside = anywhere in Omega
  double min_radius = 0.12;  // bump radii as fractions of the region's smaller extent
  double max_radius = 0.30;
};

struct Bump {
  std::array<double, 2> center{};
  double radius = 0.0;
  double amplitude = 0.0;
  int exponent = 8;

  double operator()(double x, double y) const {
    const double r2 = ((x - center[0]) * (x - center[0]) + (y - center[1]) * (y - center[1])) /
                      (radius * radius);
    return r2 < 1.0 ? amplitude * std::pow(1.0 - r2, exponent) : 0.0;
  }
};

inline GridFunction bump_function(const DomainPtr& d, const std::vector<Bump>& bumps, std::string label = {}) {
  std::vector<double> v(d->size(), 0.0);
  for (std::size_t i = 0; i < d->size(); ++i)
    for (const Bump& b : bumps) v[i] += b(d->x(i), d->y(i));
  return GridFunction(d, std::move(v), std::move(label));
}

namespace detail {

struct RegionGeometry {
  std::vector<std::size_t> nodes;  // admissible centre nodes (mask nodes of the region)
  double min_extent = 0.0;
  std::vector<double> dist;        // distance to the complement of (mask ∩ region)
  std::size_t deepest = 0;
};

inline RegionGeometry region_geometry(const Domain& d, Region region) {
  RegionGeometry g;
  std::vector<std::uint8_t> inside(d.size(), 0);
  for (std::size_t i : d.mask_nodes())
    if (region == Region::outside || d.region(i) == region) inside[i] = 1;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  std::vector<std::size_t> rim;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (inside[i]) {
      g.nodes.push_back(i);
      x0 = std::min(x0, d.x(i));
      x1 = std::max(x1, d.x(i));
      y0 = std::min(y0, d.y(i));
      y1 = std::max(y1, d.y(i));
    } else {
      rim.push_back(i);
    }
  }
  if (g.nodes.empty()) throw GridError("generate_test_functions: the requested region has no interior nodes");
  g.min_extent = (x1 - x0) + 2.0 * d.h();
  if (d.dim() == 2) g.min_extent = std::min(g.min_extent, (y1 - y0) + 2.0 * d.h());
  g.dist.assign(d.size(), 0.0);
  double best = -1.0;
  for (std::size_t i : g.nodes) {
    double m = std::numeric_limits<double>::infinity();
    if (d.dim() == 1) {
      // The complement is everything left/right of the contiguous interval.
      for (std::size_t o : rim) m = std::min(m, std::abs(d.x(i) - d.x(o)));
    } else {
      for (std::size_t o : rim) m = std::min(m, std::hypot(d.x(i) - d.x(o), d.y(i) - d.y(o)));
    }
    g.dist[i] = m;
    if (m > best) {
      best = m;
      g.deepest = i;
    }
  }
  return g;
}

inline std::string describe(const std::vector<Bump>& bumps, int dim) {
  std::ostringstream os;
  os << std::setprecision(6) << "bumps[";
  for (std::size_t k = 0; k < bumps.size(); ++k) {
    const Bump& b = bumps[k];
    if (k) os << ';';
    os << "c=" << b.center[0];
    if (dim == 2) os << ',' << b.center[1];
    os << " r=" << b.radius << " a=" << b.amplitude;
  }
  os << ']';
  return os.str();
}

}  // namespace detail

/*
 * Deterministic suite of smooth functions supported at least two cells inside
 * Omega (or inside the requested region).  Each function is a sum of
 * polynomial bumps a (1 - |x-c|^2/r^2)_+^k.  Zero mean is enforced by
 * subtracting a multiple of a broad compensating bump, which keeps the
 * function smooth and compactly supported.
 */
inline std::vector<GridFunction> generate_test_functions(const TestSuiteSpec& spec, const DomainPtr& d) {
  if (spec.count < 1) throw GridError("generate_test_functions: count must be >= 1");
  if (spec.smoothness < 3) throw GridError("generate_test_functions: bump exponent must be >= 3");
  const detail::RegionGeometry geo = detail::region_geometry(*d, spec.region);
  const double h = d->h();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw_bump = [&](double sign) {
    // Radii below ~8h leave the bump under-resolved on the grid.
    double r = std::max(geo.min_extent * (spec.min_radius + (spec.max_radius - spec.min_radius) * unit(rng)),
                        8.0 * h);
    for (int attempt = 0; attempt < 60; ++attempt) {
      std::vector<std::size_t> ok;
      for (std::size_t i : geo.nodes)
        if (geo.dist[i] >= r + 2.5 * h) ok.push_back(i);
      if (!ok.empty()) {
        const std::size_t c = ok[static_cast<std::size_t>(unit(rng) * static_cast<double>(ok.size())) % ok.size()];
        Bump b;
        b.center = {d->x(c) + (unit(rng) - 0.5) * h, d->y(c) + (d->dim() == 2 ? (unit(rng) - 0.5) * h : 0.0)};
        b.radius = r;
        b.amplitude = sign * (0.5 + unit(rng));
        b.exponent = spec.smoothness;
        return b;
      }
      r *= 0.9;
      if (r < 5.0 * h) break;
    }
    throw GridError("generate_test_functions: region too small for a bump at this resolution");
  };

  std::vector<GridFunction> out;
  out.reserve(spec.count);
  for (std::size_t n = 0; n < spec.count; ++n) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 200) throw GridError("generate_test_functions: could not satisfy the sign constraint");
      std::vector<Bump> bumps;
      const int nb = 1 + static_cast<int>(unit(rng) * 3.0) % 3;
      switch (spec.sign) {
        case SignConstraint::nonnegative:
          for (int k = 0; k < nb; ++k) bumps.push_back(draw_bump(1.0));
          break;
        case SignConstraint::sign_changing:
          bumps.push_back(draw_bump(1.0));
          bumps.push_back(draw_bump(-1.0));
          if (nb == 3) bumps.push_back(draw_bump(unit(rng) < 0.5 ? 1.0 : -1.0));
          break;
        case SignConstraint::none:
        case SignConstraint::zero_mean:
          for (int k = 0; k < nb; ++k) bumps.push_back(draw_bump(unit(rng) < 0.5 ? 1.0 : -1.0));
          break;
      }
      GridFunction u = bump_function(d, bumps);
      std::string label = detail::describe(bumps, d->dim());
      if (spec.sign == SignConstraint::zero_mean) {
        Bump comp;
        comp.center = {d->x(geo.deepest), d->y(geo.deepest)};
        comp.radius = std::max(geo.dist[geo.deepest] - 2.5 * h, 3.0 * h);
        comp.amplitude = 1.0;
        comp.exponent = spec.smoothness;
        const GridFunction b = bump_function(d, {comp});
        const double bm = integral(b);
        for (int it = 0; it < 3; ++it) {
          const double mean = integral(u);
          if (std::abs(mean) <= 1e-15 * std::max(1.0, u.max_abs())) break;
          u -= (mean / bm) * b;
        }
        label += " - compensator";
      }
      const double amp = u.max_abs();
      if (amp == 0.0) continue;
      if (spec.sign == SignConstraint::sign_changing && (u.max() < 0.05 * amp || u.min() > -0.05 * amp))
        continue;
      if (spec.sign == SignConstraint::zero_mean && (u.max() <= 0.0 || u.min() >= 0.0)) continue;
      u.set_label("suite:" + std::string(to_string(spec.sign)) + "#" + std::to_string(n) +
                  ":seed=" + std::to_string(spec.seed) + " " + label);
      out.push_back(std::move(u));
      break;
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// Import / export.
// --------------------------------------------------------------------------

/// CSV with header "x,value" (1-D) or "x,y,value" (2-D), one row per ambient node.
inline void write_csv(std::ostream& os, const GridFunction& u) {
  const Domain& d = u.domain();
  os << (d.dim() == 1 ? "x,value\n" : "x,y,value\n");
  os << std::setprecision(17);
  for (std::size_t i = 0; i < d.size(); ++i) {
    os << d.x(i) << ',';
    if (d.dim() == 2) os << d.y(i) << ',';
    os << u[i] << '\n';
  }
}

inline GridFunction read_csv(std::istream& is, const DomainPtr& d) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("read_csv: empty input");
  std::vector<double> v(d->size(), 0.0);
  std::vector<std::uint8_t> seen(d->size(), 0);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double x = 0, y = 0, val = 0;
    if (!(ls >> x)) throw FormatError("read_csv: bad row '" + line + "'");
    if (d->dim() == 2 && !(ls >> y)) throw FormatError("read_csv: bad row '" + line + "'");
    if (!(ls >> val)) throw FormatError("read_csv: bad row '" + line + "'");
    const double fi = (x - d->x0()) / d->h(), fj = d->dim() == 2 ? (y - d->y0()) / d->h() : 0.0;
    const long i = std::lround(fi), j = std::lround(fj);
    if (std::abs(fi - i) > 1e-6 || std::abs(fj - j) > 1e-6 || i < 0 || j < 0 ||
        i >= static_cast<long>(d->nx()) || j >= static_cast<long>(d->ny()))
      throw FormatError("read_csv: coordinate does not match a grid node");
    const std::size_t idx = d->index(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    v[idx] = val;
    seen[idx] = 1;
  }
  return GridFunction(d, std::move(v));
}

/*
 * Binary dump, little-endian:
 *   char[8]  magic "FRLGRID1"
 *   u32      version (1), u32 dim
 *   u64      nx, u64 ny
 *   f64      x0, y0, h
 *   u8       convex
 *   u64      run count R, then R x u32 run lengths of the cell mask
 *            (alternating, starting with cells outside Omega)
 *   u64      run count, runs of the node mask (same convention)
 *   u64      value count N (= nx*ny), then N x f64 values
 */
namespace detail {

inline bool host_little_endian() {
  const std::uint16_t probe = 1;
  unsigned char b;
  std::memcpy(&b, &probe, 1);
  return b == 1;
}

template <class T>
void put(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if (!host_little_endian()) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw FormatError("binary dump truncated");
  if (!host_little_endian()) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

inline std::vector<std::uint32_t> run_lengths(const std::vector<std::uint8_t>& bits) {
  std::vector<std::uint32_t> runs;
  std::uint8_t cur = 0;
  std::uint32_t len = 0;
  for (std::uint8_t b : bits) {
    const std::uint8_t v = b ? 1 : 0;
    if (v == cur) {
      ++len;
    } else {
      runs.push_back(len);
      cur = v;
      len = 1;
    }
  }
  runs.push_back(len);
  return runs;
}

inline std::vector<std::uint8_t> expand_runs(const std::vector<std::uint32_t>& runs, std::size_t n) {
  std::vector<std::uint8_t> bits;
  bits.reserve(n);
  std::uint8_t cur = 0;
  for (std::uint32_t r : runs) {
    bits.insert(bits.end(), r, cur);
    cur ^= 1;
  }
  if (bits.size() != n) throw FormatError("binary dump: mask runs do not cover the grid");
  return bits;
}

inline void put_runs(std::ostream& os, const std::vector<std::uint8_t>& bits) {
  const auto runs = run_lengths(bits);
  put<std::uint64_t>(os, runs.size());
  for (std::uint32_t r : runs) put<std::uint32_t>(os, r);
}

inline std::vector<std::uint32_t> get_runs(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  if (n > (1ull << 32)) throw FormatError("binary dump: implausible run count");
  std::vector<std::uint32_t> runs(n);
  for (auto& r : runs) r = get<std::uint32_t>(is);
  return runs;
}

inline void write_domain_header(std::ostream& os, const Domain& d) {
  os.write("FRLGRID1", 8);
  put<std::uint32_t>(os, 1);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(d.dim()));
  put<std::uint64_t>(os, d.nx());
  put<std::uint64_t>(os, d.ny());
  put<double>(os, d.x0());
  put<double>(os, d.y0());
  put<double>(os, d.h());
  put<std::uint8_t>(os, d.convex() ? 1 : 0);
  put_runs(os, d.cells());
  std::vector<std::uint8_t> mask(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) mask[i] = d.in_mask(i) ? 1 : 0;
  put_runs(os, mask);
}

inline DomainPtr read_domain_header(std::istream& is) {
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, "FRLGRID1", 8) != 0) throw FormatError("binary dump: bad magic");
  if (get<std::uint32_t>(is) != 1) throw FormatError("binary dump: unsupported version");
  const auto dim = get<std::uint32_t>(is);
  const auto nx = get<std::uint64_t>(is);
  const auto ny = get<std::uint64_t>(is);
  const double x0 = get<double>(is), y0 = get<double>(is), h = get<double>(is);
  const bool convex = get<std::uint8_t>(is) != 0;
  if (dim != 1 && dim != 2) throw FormatError("binary dump: bad dimension");
  const std::size_t ncell = (nx - 1) * (dim == 1 ? 1 : ny - 1);
  auto cells = expand_runs(get_runs(is), ncell);
  auto d = std::make_shared<const Domain>(static_cast<int>(dim), nx, ny, x0, y0, h, std::move(cells), convex);
  const auto mask = expand_runs(get_runs(is), d->size());
  for (std::size_t i = 0; i < d->size(); ++i)
    if ((mask[i] != 0) != d->in_mask(i)) throw FormatError("binary dump: node mask inconsistent with cells");
  return d;
}

}  // namespace detail

inline void write_binary(std::ostream& os, const GridFunction& u) {
  detail::write_domain_header(os, u.domain());
  detail::put<std::uint64_t>(os, u.size());
  for (double v : u.values()) detail::put<double>(os, v);
}

inline GridFunction read_binary(std::istream& is) {
  DomainPtr d = detail::read_domain_header(is);
  const auto n = detail::get<std::uint64_t>(is);
  if (n != d->size()) throw FormatError("binary dump: value count mismatch");
  std::vector<double> v(n);
  for (auto& x : v) x = detail::get<double>(is);
  return GridFunction(d, std::move(v));
}

}  // namespace fraclap

#endif  // FRACLAP_GRID_HPP
