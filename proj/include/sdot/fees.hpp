#pragma once

// Splitting storage fees F(w) = sum_i f_i(w^i) + indicator of the simplex,
// and their Legendre-Fenchel conjugate with its gradient and Hessian.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdot/geometry.hpp"
#include "sdot/scalar_fn.hpp"

namespace sdot {

/// Real number or +infinity. Comparisons are total; arithmetic requires a
/// finite value.
class ExtendedReal {
 public:
  static ExtendedReal infinity() { return ExtendedReal(); }
  /// Non-finite doubles map to +inf.
  ExtendedReal(double v) : value_(v), finite_(std::isfinite(v)) {}  // NOLINT(google-explicit-constructor)

  bool is_finite() const { return finite_; }
  /// Throws InvalidArgument when infinite.
  double value() const;

  friend bool operator==(const ExtendedReal& a, const ExtendedReal& b) {
    return a.finite_ == b.finite_ && (!a.finite_ || a.value_ == b.value_);
  }
  friend bool operator<(const ExtendedReal& a, const ExtendedReal& b) {
    if (!a.finite_) return false;
    if (!b.finite_) return true;
    return a.value_ < b.value_;
  }
  friend bool operator<=(const ExtendedReal& a, const ExtendedReal& b) { return !(b < a); }
  friend bool operator>(const ExtendedReal& a, const ExtendedReal& b) { return b < a; }

 private:
  ExtendedReal() = default;
  double value_ = 0.0;
  bool finite_ = false;
};

class SplittingFee {
 public:
  SplittingFee() = default;
  explicit SplittingFee(std::vector<ScalarConvexFn> parts);

  std::size_t size() const { return parts_.size(); }
  const ScalarConvexFn& part(std::size_t i) const { return parts_[i]; }
  const std::vector<ScalarConvexFn>& parts() const { return parts_; }

  /// min_i a_i
  double eps_floor() const;
  double sum_lower() const;
  double sum_upper() const;
  /// sum a_i <= 1 <= sum b_i
  bool feasible() const;

  /// Same fee with every part replaced by lambda * f_i + offset_i.
  SplittingFee transformed(double lambda, double offset_per_part = 0.0) const;

 private:
  std::vector<ScalarConvexFn> parts_;
};

/// Indicator of the single weight vector `w`.
SplittingFee point_indicator_fee(const WeightVector& w);

struct ConjugateResult {
  WeightVector w;  ///< grad F*(psi), or a subgradient selection
  double r = 0.0;  ///< multiplier of the simplex constraint
  double fstar = 0.0;
  /// Coordinate sits on an endpoint of its domain (or the domain is a point).
  std::vector<bool> at_boundary;
};

/// Solves psi^i in df_i(w^i) + r, sum_i w^i = 1 by bisection on r.
ConjugateResult conjugate_solve(const SplittingFee& fee, const DualVector& psi);

enum class BoundaryPolicy {
  error,       ///< boundary coordinates make the Hessian unavailable
  active_set,  ///< boundary coordinates are frozen (zero curvature contribution)
};

/// D^2 F*(psi) = S - Q l l^T with l^i = 1 / f_i''(w^i), Q = 1 / sum l.
Eigen::MatrixXd fstar_hessian(const SplittingFee& fee, const DualVector& psi,
                              BoundaryPolicy policy = BoundaryPolicy::error);
/// Same, reusing a conjugate already computed at psi.
Eigen::MatrixXd fstar_hessian(const SplittingFee& fee, const ConjugateResult& conj,
                              BoundaryPolicy policy = BoundaryPolicy::error);

/// F(w), or +inf when w leaves the domains or the simplex (tolerance 1e-9).
ExtendedReal fee_value(const SplittingFee& fee, const WeightVector& w);

struct AssumptionReport {
  double eps_max = 0.0;  ///< min_i a_i
  double sum_lower = 0.0;
  double sum_upper = 0.0;
  bool strict_interior = false;       ///< sum a_i < 1 < sum b_i
  double strong_convexity_lb = 0.0;   ///< sampled min of f_i'' over the interiors
  bool essential_smoothness = false;  ///< |f_i'| > 1e3 within 1e-6 of every endpoint
  std::vector<bool> part_essentially_smooth;
  /// Enough for the damped Newton iteration: positive floor, strict interior
  /// and positive curvature.
  bool newton_ready = false;
  /// Every hypothesis needed for global convergence, including essential smoothness.
  bool overall = false;
  std::vector<std::string> failures;
};

AssumptionReport check_assumptions(const SplittingFee& fee);

}  // namespace sdot
