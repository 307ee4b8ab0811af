#pragma once

// Laguerre diagrams for the quadratic cost on box domains in one or two
// dimensions: cell masses, their Jacobian, transport maps and cost bounds.

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "sdot/polygon.hpp"

namespace sdot {

using DualVector = Eigen::VectorXd;
using WeightVector = Eigen::VectorXd;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  bool contains(double x) const { return lo <= x && x <= hi; }
  bool degenerate() const { return !(hi > lo); }
};

/// Box domain with a regular grid of quadrature cells.
struct DomainSpec {
  int dim = 1;
  std::array<Interval, 2> bounds{};
  std::array<int, 2> resolution{2, 1};

  static DomainSpec interval(double lo, double hi, int resolution);
  static DomainSpec box(Interval x, Interval y, int nx, int ny);

  /// Throws InvalidArgument unless dim is 1 or 2, every axis has positive
  /// length and at least two cells.
  void validate() const;

  double spacing(int axis) const { return bounds[axis].length() / resolution[axis]; }
  /// Smallest grid spacing over the active axes.
  double min_spacing() const;
  double cell_volume() const;
  double volume() const;
  std::size_t node_count() const;
  /// Midpoint of quadrature cell `k` (row-major, x fastest).
  Point2 node(std::size_t k) const;
};

enum class DensityKind { uniform, tabulated };

/// Piecewise-constant probability density on the quadrature cells of a domain.
class DensityField {
 public:
  static DensityField uniform(const DomainSpec& domain, double holder_alpha = 1.0);
  /// `values` are per quadrature cell, row-major with x fastest. They are
  /// renormalized so the density integrates to one.
  static DensityField tabulated(const DomainSpec& domain, std::vector<double> values,
                                double holder_alpha = 1.0);

  DensityKind kind() const { return kind_; }
  double holder_alpha() const { return holder_alpha_; }
  const std::vector<double>& values() const { return values_; }
  double at(std::size_t cell) const { return values_[cell]; }
  double max_value() const;
  bool strictly_positive() const;

 private:
  DensityKind kind_ = DensityKind::uniform;
  std::vector<double> values_;
  double holder_alpha_ = 1.0;
};

/// Distinct sites y_1..y_N; in 1-D only the first coordinate is used.
struct SiteSet {
  std::vector<Point2> points;

  std::size_t size() const { return points.size(); }
};

/// c(x, y) = coefficient * |x - y|^2.
struct QuadraticCost {
  double coefficient = 1.0;

  double operator()(const Point2& x, const Point2& y, int dim) const {
    double s = 0.0;
    for (int a = 0; a < dim; ++a) s += (x[a] - y[a]) * (x[a] - y[a]);
    return coefficient * s;
  }
};

/// Immutable semi-discrete transport instance (source measure, sites, cost).
class TransportProblem {
 public:
  TransportProblem(DomainSpec domain, DensityField density, SiteSet sites,
                   QuadraticCost cost = {});

  const DomainSpec& domain() const { return domain_; }
  const DensityField& density() const { return density_; }
  const SiteSet& sites() const { return sites_; }
  const QuadraticCost& cost() const { return cost_; }
  int dim() const { return domain_.dim; }
  std::size_t size() const { return sites_.size(); }

  /// Cumulative mass at the left edge of every 1-D quadrature cell (size n+1).
  const std::vector<double>& cdf() const { return cdf_; }
  /// Integral of the density over [domain.lo, x] (1-D only).
  double cdf_at(double x) const;
  /// Smallest x with cdf_at(x) >= q (1-D only).
  double quantile(double q) const;

 private:
  DomainSpec domain_;
  DensityField density_;
  SiteSet sites_;
  QuadraticCost cost_;
  std::vector<double> cdf_;
};

enum class MassBackend {
  exact,  ///< exact integration of the piecewise-constant density over the cells
  grid,   ///< midpoint rule: each quadrature node goes to its cheapest site
};

enum class JacobianMethod { finite_diff, exact_1d };

struct MassOptions {
  MassBackend backend = MassBackend::exact;
  bool with_assignment = false;
  /// Worker threads for Jacobian columns; 0 means hardware concurrency.
  unsigned threads = 1;
};

struct LaguerreDiagram {
  WeightVector masses;
  DualVector psi;
  /// Site index per quadrature node (only when requested).
  std::vector<int> assignment;
  /// 1-D exact backend: cell of each site as an interval (possibly empty).
  std::vector<Interval> intervals;
  /// 2-D exact backend: cell of each site clipped to the domain.
  std::vector<Polygon> cells;
  /// Integral of c(x, y_T(x)) rho(x) over the domain.
  double transport_cost = 0.0;
};

/// Index of the cheapest site at `x`, lowest index on ties.
int cheapest_site(const TransportProblem& problem, const DualVector& psi, const Point2& x);

LaguerreDiagram laguerre_masses(const TransportProblem& problem, const DualVector& psi,
                                const MassOptions& options = {});

struct JacobianOptions {
  JacobianMethod method = JacobianMethod::finite_diff;
  /// Cells at or below this mass make the Jacobian ill-conditioned.
  double mass_floor = 0.0;
  /// Central-difference step; <= 0 selects the default.
  double step = 0.0;
  MassOptions mass{};
};

/// DG(psi) with dG^i/dpsi^j >= 0 off the diagonal and zero row sums.
Eigen::MatrixXd laguerre_jacobian(const TransportProblem& problem, const DualVector& psi,
                                  const JacobianOptions& options = {});

/// Default central-difference step for the given backend.
double default_jacobian_step(const TransportProblem& problem, MassBackend backend);

struct TransportSummary {
  std::vector<int> map;
  WeightVector weights;
  double cost = 0.0;
};

TransportSummary transport_summary(const TransportProblem& problem, const DualVector& psi,
                                   const MassOptions& options = {});

/// sup over X and the sites of |c(x, y_i)|; attained at a box corner.
double cost_sup_norm(const TransportProblem& problem);

/// Integral of c(x, y) rho(x) over [u, v] for a 1-D problem.
double interval_cost_1d(const TransportProblem& problem, double u, double v, double y);

/// Largest psi^j - min_k psi^k - 2 ||c||_inf over cells with positive mass.
/// Non-positive whenever the a priori bound on dual coordinates holds.
double psi_bound_excess(const DualVector& psi, const WeightVector& masses, double cost_sup);

}  // namespace sdot
