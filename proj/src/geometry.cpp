#include "sdot/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

#include "sdot/errors.hpp"

namespace sdot {

// ---------------------------------------------------------------- domain

DomainSpec DomainSpec::interval(double lo, double hi, int resolution) {
  DomainSpec d;
  d.dim = 1;
  d.bounds = {Interval{lo, hi}, Interval{0.0, 1.0}};
  d.resolution = {resolution, 1};
  d.validate();
  return d;
}

DomainSpec DomainSpec::box(Interval x, Interval y, int nx, int ny) {
  DomainSpec d;
  d.dim = 2;
  d.bounds = {x, y};
  d.resolution = {nx, ny};
  d.validate();
  return d;
}

void DomainSpec::validate() const {
  if (dim != 1 && dim != 2) throw InvalidArgument("domain: dim must be 1 or 2");
  for (int a = 0; a < dim; ++a) {
    if (!std::isfinite(bounds[a].lo) || !std::isfinite(bounds[a].hi) || !(bounds[a].hi > bounds[a].lo))
      throw InvalidArgument("domain: bounds must have positive length on every axis");
    if (resolution[a] < 2) throw InvalidArgument("domain: resolution must be at least 2");
  }
}

double DomainSpec::min_spacing() const {
  double h = spacing(0);
  if (dim == 2) h = std::min(h, spacing(1));
  return h;
}

double DomainSpec::cell_volume() const {
  double v = spacing(0);
  if (dim == 2) v *= spacing(1);
  return v;
}

double DomainSpec::volume() const {
  double v = bounds[0].length();
  if (dim == 2) v *= bounds[1].length();
  return v;
}

std::size_t DomainSpec::node_count() const {
  std::size_t n = static_cast<std::size_t>(resolution[0]);
  if (dim == 2) n *= static_cast<std::size_t>(resolution[1]);
  return n;
}

Point2 DomainSpec::node(std::size_t k) const {
  const auto nx = static_cast<std::size_t>(resolution[0]);
  const std::size_t ix = k % nx;
  Point2 p{bounds[0].lo + (static_cast<double>(ix) + 0.5) * spacing(0), 0.0};
  if (dim == 2) {
    const std::size_t iy = k / nx;
    p[1] = bounds[1].lo + (static_cast<double>(iy) + 0.5) * spacing(1);
  }
  return p;
}

// ---------------------------------------------------------------- density

DensityField DensityField::uniform(const DomainSpec& domain, double holder_alpha) {
  domain.validate();
  DensityField f;
  f.kind_ = DensityKind::uniform;
  f.values_.assign(domain.node_count(), 1.0 / domain.volume());
  f.holder_alpha_ = holder_alpha;
  return f;
}

DensityField DensityField::tabulated(const DomainSpec& domain, std::vector<double> values,
                                     double holder_alpha) {
  domain.validate();
  if (values.size() != domain.node_count()) {
    std::ostringstream os;
    os << "density: expected " << domain.node_count() << " values, got " << values.size();
    throw InvalidArgument(os.str());
  }
  if (!(holder_alpha > 0.0 && holder_alpha <= 1.0))
    throw InvalidArgument("density: holder_alpha must lie in (0, 1]");
  double total = 0.0;
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("density: values must be finite and nonnegative");
    total += v;
  }
  total *= domain.cell_volume();
  if (!(total > 0.0)) throw InvalidArgument("density: total mass must be positive");
  for (double& v : values) v /= total;
  DensityField f;
  f.kind_ = DensityKind::tabulated;
  f.values_ = std::move(values);
  f.holder_alpha_ = holder_alpha;
  return f;
}

double DensityField::max_value() const {
  return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end());
}

bool DensityField::strictly_positive() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return v > 0.0; });
}

// ---------------------------------------------------------------- problem

TransportProblem::TransportProblem(DomainSpec domain, DensityField density, SiteSet sites,
                                   QuadraticCost cost)
    : domain_(domain), density_(std::move(density)), sites_(std::move(sites)), cost_(cost) {
  domain_.validate();
  if (density_.values().size() != domain_.node_count())
    throw InvalidArgument("problem: density does not match the domain grid");
  if (sites_.size() == 0) throw InvalidArgument("problem: at least one site is required");
  if (!(cost_.coefficient > 0.0) || !std::isfinite(cost_.coefficient))
    throw InvalidArgument("problem: cost coefficient must be positive");
  const int d = domain_.dim;
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    for (int a = 0; a < d; ++a) {
      const double v = sites_.points[i][a];
      if (!std::isfinite(v) || !domain_.bounds[a].contains(v)) {
        std::ostringstream os;
        os << "problem: site " << i << " lies outside the domain";
        throw InvalidArgument(os.str());
      }
    }
    if (d == 1) sites_.points[i][1] = 0.0;
    for (std::size_t j = 0; j < i; ++j) {
      bool same = true;
      for (int a = 0; a < d; ++a) same = same && sites_.points[i][a] == sites_.points[j][a];
      if (same) {
        std::ostringstream os;
        os << "problem: sites " << j << " and " << i << " coincide";
        throw InvalidArgument(os.str());
      }
    }
  }
  if (d == 1) {
    const auto n = static_cast<std::size_t>(domain_.resolution[0]);
    const double h = domain_.spacing(0);
    cdf_.assign(n + 1, 0.0);
    for (std::size_t k = 0; k < n; ++k) cdf_[k + 1] = cdf_[k] + density_.at(k) * h;
  }
}

double TransportProblem::cdf_at(double x) const {
  const Interval& b = domain_.bounds[0];
  if (x <= b.lo) return 0.0;
  if (x >= b.hi) return cdf_.back();
  const int n = domain_.resolution[0];
  const double h = domain_.spacing(0);
  int k = static_cast<int>(std::floor((x - b.lo) / h));
  k = std::clamp(k, 0, n - 1);
  return cdf_[k] + density_.at(k) * (x - (b.lo + k * h));
}

double TransportProblem::quantile(double q) const {
  const Interval& b = domain_.bounds[0];
  if (q <= 0.0) return b.lo;
  if (q >= cdf_.back()) return b.hi;
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), q);
  const auto k = static_cast<std::size_t>(std::distance(cdf_.begin(), it)) - 1;
  const double h = domain_.spacing(0);
  const double rho = density_.at(k);
  const double x0 = b.lo + static_cast<double>(k) * h;
  if (rho <= 0.0) return x0;
  return std::min(b.hi, x0 + (q - cdf_[k]) / rho);
}

// ---------------------------------------------------------------- helpers

namespace {

void check_psi(const TransportProblem& problem, const DualVector& psi) {
  if (static_cast<std::size_t>(psi.size()) != problem.size()) {
    std::ostringstream os;
    os << "psi has length " << psi.size() << " but the problem has " << problem.size() << " sites";
    throw InvalidArgument(os.str());
  }
  if (!psi.allFinite()) throw InvalidArgument("psi has non-finite entries");
}

// Boundary between cells i and j (y_i < y_j) in 1-D.
double breakpoint_1d(double yi, double yj, double pi, double pj, double s) {
  return 0.5 * (yi + yj) + (pj - pi) / (2.0 * s * (yj - yi));
}

// Lower envelope of the 1-D cell functions; returns site indices left to right.
std::vector<int> envelope_1d(const TransportProblem& problem, const DualVector& psi) {
  const auto& pts = problem.sites().points;
  const double s = problem.cost().coefficient;
  std::vector<int> order(problem.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return pts[a][0] < pts[b][0]; });
  auto cross = [&](int a, int b) { return breakpoint_1d(pts[a][0], pts[b][0], psi[a], psi[b], s); };
  std::vector<int> st;
  for (int j : order) {
    while (st.size() >= 2 && cross(st[st.size() - 2], j) <= cross(st[st.size() - 2], st.back())) st.pop_back();
    st.push_back(j);
  }
  return st;
}

std::vector<Interval> cells_1d(const TransportProblem& problem, const DualVector& psi) {
  const auto& pts = problem.sites().points;
  const double s = problem.cost().coefficient;
  const Interval box = problem.domain().bounds[0];
  std::vector<Interval> cells(problem.size(), Interval{box.lo, box.lo});
  const std::vector<int> env = envelope_1d(problem, psi);
  double left = box.lo;
  for (std::size_t k = 0; k < env.size(); ++k) {
    double right = box.hi;
    if (k + 1 < env.size()) {
      const int a = env[k], b = env[k + 1];
      right = std::clamp(breakpoint_1d(pts[a][0], pts[b][0], psi[a], psi[b], s), box.lo, box.hi);
    }
    if (right < left) right = left;
    cells[env[k]] = Interval{left, right};
    left = right;
  }
  return cells;
}

// Integral of coefficient * (x - y)^2 * rho over [u, v] for the 1-D piecewise-constant density.
double cost_integral_1d(const TransportProblem& problem, double u, double v, double y) {
  if (!(v > u)) return 0.0;
  const Interval box = problem.domain().bounds[0];
  const int n = problem.domain().resolution[0];
  const double h = problem.domain().spacing(0);
  const double s = problem.cost().coefficient;
  auto cube = [](double t) { return t * t * t; };
  int k0 = std::clamp(static_cast<int>(std::floor((u - box.lo) / h)), 0, n - 1);
  int k1 = std::clamp(static_cast<int>(std::floor((v - box.lo) / h)), 0, n - 1);
  double total = 0.0;
  for (int k = k0; k <= k1; ++k) {
    const double a = std::max(u, box.lo + k * h);
    const double b = std::min(v, box.lo + (k + 1) * h);
    if (b > a) total += problem.density().at(k) * (cube(b - y) - cube(a - y)) / 3.0;
  }
  return s * total;
}

Polygon laguerre_cell_2d(const TransportProblem& problem, const DualVector& psi, int i) {
  const auto& b = problem.domain().bounds;
  const auto& pts = problem.sites().points;
  const double s = problem.cost().coefficient;
  Polygon poly = rectangle(b[0].lo, b[0].hi, b[1].lo, b[1].hi);
  const Point2& yi = pts[i];
  for (std::size_t j = 0; j < problem.size() && !poly.empty(); ++j) {
    if (static_cast<int>(j) == i) continue;
    const Point2& yj = pts[j];
    const Point2 n{yj[0] - yi[0], yj[1] - yi[1]};
    const double offset = n[0] * 0.5 * (yi[0] + yj[0]) + n[1] * 0.5 * (yi[1] + yj[1]) +
                          (psi[static_cast<Eigen::Index>(j)] - psi[i]) / (2.0 * s);
    poly = clip_halfplane(poly, n, offset);
  }
  return poly;
}

// Density-weighted moments of a convex polygon for a tabulated density.
Moments tabulated_moments(const TransportProblem& problem, const Polygon& poly) {
  Moments total;
  if (poly.empty()) return total;
  const DomainSpec& d = problem.domain();
  const int nx = d.resolution[0], ny = d.resolution[1];
  const double hx = d.spacing(0), hy = d.spacing(1);
  const double x0 = d.bounds[0].lo, y0 = d.bounds[1].lo;
  double pymin = poly[0][1], pymax = poly[0][1];
  for (const auto& p : poly) {
    pymin = std::min(pymin, p[1]);
    pymax = std::max(pymax, p[1]);
  }
  const int r0 = std::clamp(static_cast<int>(std::floor((pymin - y0) / hy)), 0, ny - 1);
  const int r1 = std::clamp(static_cast<int>(std::floor((pymax - y0) / hy)), 0, ny - 1);
  const auto& rho = problem.density().values();
  for (int r = r0; r <= r1; ++r) {
    const double yb = y0 + r * hy;
    const double yt = (r + 1 == ny) ? d.bounds[1].hi : y0 + (r + 1) * hy;
    const Polygon band = clip_slab(poly, 1, yb, yt);
    if (band.empty()) continue;
    double bxmin = band[0][0], bxmax = band[0][0];
    // x-range on the bottom and top edges of the band.
    double lb = INFINITY, rb = -INFINITY, lt = INFINITY, rt = -INFINITY;
    for (const auto& p : band) {
      bxmin = std::min(bxmin, p[0]);
      bxmax = std::max(bxmax, p[0]);
      if (p[1] == yb) {
        lb = std::min(lb, p[0]);
        rb = std::max(rb, p[0]);
      }
      if (p[1] == yt) {
        lt = std::min(lt, p[0]);
        rt = std::max(rt, p[0]);
      }
    }
    const double full_lo = std::max(lb, lt);
    const double full_hi = std::min(rb, rt);
    const int c0 = std::clamp(static_cast<int>(std::floor((bxmin - x0) / hx)), 0, nx - 1);
    const int c1 = std::clamp(static_cast<int>(std::floor((bxmax - x0) / hx)), 0, nx - 1);
    for (int c = c0; c <= c1; ++c) {
      const double xl = x0 + c * hx;
      const double xr = (c + 1 == nx) ? d.bounds[0].hi : x0 + (c + 1) * hx;
      const double w = rho[static_cast<std::size_t>(r) * nx + c];
      if (w == 0.0) continue;
      if (xl >= full_lo && xr <= full_hi) {
        total += rectangle_moments(xl, xr, yb, yt).scaled(w);
      } else {
        const Polygon piece = clip_slab(band, 0, xl, xr);
        if (!piece.empty()) total += polygon_moments(piece).scaled(w);
      }
    }
  }
  return total;
}

Moments cell_moments(const TransportProblem& problem, const Polygon& poly) {
  if (poly.empty()) return {};
  if (problem.density().kind() == DensityKind::uniform)
    return polygon_moments(poly).scaled(problem.density().at(0));
  return tabulated_moments(problem, poly);
}

double cell_cost_2d(const TransportProblem& problem, const Moments& m, const Point2& y) {
  const double s = problem.cost().coefficient;
  return s * (m.mxx + m.myy - 2.0 * (y[0] * m.mx + y[1] * m.my) + (y[0] * y[0] + y[1] * y[1]) * m.area);
}

}  // namespace

// ---------------------------------------------------------------- masses

double interval_cost_1d(const TransportProblem& problem, double u, double v, double y) {
  return cost_integral_1d(problem, u, v, y);
}

int cheapest_site(const TransportProblem& problem, const DualVector& psi, const Point2& x) {
  const auto& pts = problem.sites().points;
  int best = 0;
  double best_val = problem.cost()(x, pts[0], problem.dim()) + psi[0];
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double v = problem.cost()(x, pts[i], problem.dim()) + psi[static_cast<Eigen::Index>(i)];
    if (v < best_val) {
      best_val = v;
      best = static_cast<int>(i);
    }
  }
  return best;
}

LaguerreDiagram laguerre_masses(const TransportProblem& problem, const DualVector& psi,
                                const MassOptions& options) {
  check_psi(problem, psi);
  const auto n = static_cast<Eigen::Index>(problem.size());
  LaguerreDiagram diag;
  diag.psi = psi;
  diag.masses = WeightVector::Zero(n);
  const auto& pts = problem.sites().points;

  if (options.backend == MassBackend::grid || options.with_assignment) {
    const std::size_t nodes = problem.domain().node_count();
    const double vol = problem.domain().cell_volume();
    const bool grid = options.backend == MassBackend::grid;
    if (options.with_assignment) diag.assignment.resize(nodes);
    for (std::size_t k = 0; k < nodes; ++k) {
      const Point2 x = problem.domain().node(k);
      const int i = cheapest_site(problem, psi, x);
      if (options.with_assignment) diag.assignment[k] = i;
      if (grid) {
        const double m = problem.density().at(k) * vol;
        diag.masses[i] += m;
        diag.transport_cost += problem.cost()(x, pts[i], problem.dim()) * m;
      }
    }
    if (grid) return diag;
  }

  if (problem.dim() == 1) {
    diag.intervals = cells_1d(problem, psi);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Interval c = diag.intervals[static_cast<std::size_t>(i)];
      diag.masses[i] = problem.cdf_at(c.hi) - problem.cdf_at(c.lo);
      diag.transport_cost += cost_integral_1d(problem, c.lo, c.hi, pts[static_cast<std::size_t>(i)][0]);
    }
  } else {
    diag.cells.resize(problem.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      diag.cells[static_cast<std::size_t>(i)] = laguerre_cell_2d(problem, psi, static_cast<int>(i));
      const Moments m = cell_moments(problem, diag.cells[static_cast<std::size_t>(i)]);
      diag.masses[i] = m.area;
      diag.transport_cost += cell_cost_2d(problem, m, pts[static_cast<std::size_t>(i)]);
    }
  }
  return diag;
}

// ---------------------------------------------------------------- Jacobian

double default_jacobian_step(const TransportProblem& problem, MassBackend backend) {
  const double h = problem.domain().min_spacing();
  if (backend == MassBackend::grid) return std::max(1e-6, h);
  return std::max(1e-6, h * h);
}

namespace {

Eigen::MatrixXd jacobian_exact_1d(const TransportProblem& problem, const LaguerreDiagram& diag) {
  const auto n = static_cast<Eigen::Index>(problem.size());
  Eigen::MatrixXd dg = Eigen::MatrixXd::Zero(n, n);
  const auto& pts = problem.sites().points;
  const double s = problem.cost().coefficient;
  const Interval box = problem.domain().bounds[0];
  const int res = problem.domain().resolution[0];
  const double h = problem.domain().spacing(0);
  const std::vector<int> env = envelope_1d(problem, diag.psi);
  auto density_at = [&](double x) {
    const double t = (x - box.lo) / h;
    const double k = std::floor(t);
    const int ki = std::clamp(static_cast<int>(k), 0, res - 1);
    if (t == k && ki > 0) return 0.5 * (problem.density().at(ki - 1) + problem.density().at(ki));
    return problem.density().at(ki);
  };
  for (std::size_t k = 0; k + 1 < env.size(); ++k) {
    const int a = env[k], b = env[k + 1];
    const double x = breakpoint_1d(pts[a][0], pts[b][0], diag.psi[a], diag.psi[b], s);
    if (!(x > box.lo && x < box.hi)) continue;
    const double v = density_at(x) / (2.0 * s * std::abs(pts[b][0] - pts[a][0]));
    dg(a, b) += v;
    dg(b, a) += v;
    dg(a, a) -= v;
    dg(b, b) -= v;
  }
  return dg;
}

}  // namespace

Eigen::MatrixXd laguerre_jacobian(const TransportProblem& problem, const DualVector& psi,
                                  const JacobianOptions& options) {
  check_psi(problem, psi);
  MassOptions mopt = options.mass;
  mopt.with_assignment = false;
  const LaguerreDiagram base = laguerre_masses(problem, psi, mopt);
  if (base.masses.minCoeff() <= options.mass_floor) {
    std::ostringstream os;
    os << "laguerre_jacobian: smallest cell mass " << base.masses.minCoeff() << " is at or below the floor "
       << options.mass_floor;
    throw ConditioningError(os.str());
  }
  if (options.method == JacobianMethod::exact_1d) {
    if (problem.dim() != 1) throw InvalidArgument("laguerre_jacobian: exact-1d method requires a 1-D problem");
    if (mopt.backend != MassBackend::exact)
      throw InvalidArgument("laguerre_jacobian: exact-1d method requires the exact mass backend");
    return jacobian_exact_1d(problem, base);
  }

  const auto n = static_cast<Eigen::Index>(problem.size());
  const double step = options.step > 0.0 ? options.step : default_jacobian_step(problem, mopt.backend);
  Eigen::MatrixXd dg(n, n);
  auto column = [&](Eigen::Index j) {
    DualVector plus = psi, minus = psi;
    plus[j] += step;
    minus[j] -= step;
    const double actual = plus[j] - minus[j];
    dg.col(j) = (laguerre_masses(problem, plus, mopt).masses - laguerre_masses(problem, minus, mopt).masses) / actual;
  };
  unsigned threads = mopt.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : mopt.threads;
  threads = std::min<unsigned>(threads, static_cast<unsigned>(n));
  if (threads <= 1) {
    for (Eigen::Index j = 0; j < n; ++j) column(j);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (Eigen::Index j = t; j < n; j += threads) column(j);
      });
    }
  }
  return dg;
}

// ---------------------------------------------------------------- summaries

TransportSummary transport_summary(const TransportProblem& problem, const DualVector& psi,
                                   const MassOptions& options) {
  MassOptions mopt = options;
  mopt.with_assignment = true;
  LaguerreDiagram diag = laguerre_masses(problem, psi, mopt);
  return {std::move(diag.assignment), diag.masses, diag.transport_cost};
}

double cost_sup_norm(const TransportProblem& problem) {
  const auto& b = problem.domain().bounds;
  std::vector<Point2> corners;
  if (problem.dim() == 1) {
    corners = {{b[0].lo, 0.0}, {b[0].hi, 0.0}};
  } else {
    corners = {{b[0].lo, b[1].lo}, {b[0].hi, b[1].lo}, {b[0].lo, b[1].hi}, {b[0].hi, b[1].hi}};
  }
  double best = 0.0;
  for (const auto& y : problem.sites().points)
    for (const auto& x : corners) best = std::max(best, std::abs(problem.cost()(x, y, problem.dim())));
  return best;
}

double psi_bound_excess(const DualVector& psi, const WeightVector& masses, double cost_sup) {
  const double lo = psi.minCoeff();
  double worst = -INFINITY;
  for (Eigen::Index j = 0; j < psi.size(); ++j)
    if (masses[j] > 0.0) worst = std::max(worst, psi[j] - lo - 2.0 * cost_sup);
  return worst;
}

}  // namespace sdot
