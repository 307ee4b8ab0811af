#pragma once

// One warehouse's storage fee: a closed proper convex function on an
// interval [a, b] contained in [0, 1].

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdot/geometry.hpp"

namespace sdot {

enum class FnKind { quadratic, log_barrier, entropy, indicator, tabulated, tabulated_smoothed, convexified };

std::string to_string(FnKind kind);

namespace detail {

class ScalarFnImpl {
 public:
  explicit ScalarFnImpl(Interval domain) : domain_(domain) {}
  virtual ~ScalarFnImpl() = default;

  const Interval& domain() const { return domain_; }
  virtual FnKind kind() const = 0;
  // Callers guarantee x lies in the domain.
  virtual double value(double x) const = 0;
  virtual double deriv(double x) const = 0;
  virtual double deriv2(double x) const = 0;
  /// argmax over the domain of s*x - f(x).
  virtual double argmax_affine(double s) const;
  virtual nlohmann::json params() const = 0;

 protected:
  Interval domain_;
};

}  // namespace detail

/// Value-semantic handle to an immutable scalar convex function.
///
/// value() is +inf outside the domain. deriv() and deriv2() are meaningful on
/// the interior; at an endpoint they report the one-sided limit, which may be
/// infinite for essentially smooth functions.
class ScalarConvexFn {
 public:
  /// 0.5 * scale * (x - center)^2
  static ScalarConvexFn quadratic(Interval domain, double center, double scale);
  /// -scale * (log(x - a) + log(b - x)); infinite at both endpoints.
  static ScalarConvexFn log_barrier(Interval domain, double scale);
  /// scale * x log x
  static ScalarConvexFn entropy(Interval domain, double scale);
  /// Constant `value` on the domain (a point when a == b).
  static ScalarConvexFn indicator(Interval domain, double value = 0.0);
  /// Piecewise-linear interpolant through (knots, values); must be convex.
  static ScalarConvexFn tabulated(std::vector<double> knots, std::vector<double> values);
  static ScalarConvexFn tabulated(Interval domain, std::vector<double> knots, std::vector<double> values);

  Interval domain() const { return impl_->domain(); }
  FnKind kind() const { return impl_->kind(); }

  double value(double x) const;
  double deriv(double x) const;
  double deriv2(double x) const;
  /// Maximizer of s*x - f(x) over the domain; the clamped inverse of deriv.
  double argmax_affine(double s) const;
  /// Minimizer of f over its domain.
  double argmin() const { return argmax_affine(0.0); }
  double min_value() const { return value(argmin()); }

  /// lambda * f + offset (lambda > 0), same domain.
  ScalarConvexFn transformed(double lambda, double offset) const;
  /// f restricted to `sub`, which must lie inside the current domain.
  ScalarConvexFn restricted(Interval sub) const;

  /// Samples deriv at `samples` interior points and checks it never decreases.
  bool sampled_convexity(int samples = 1000) const;

  /// {kind, params, domain[, multiplier, offset]}
  nlohmann::json to_json() const;

  const detail::ScalarFnImpl& impl() const { return *impl_; }
  explicit ScalarConvexFn(std::shared_ptr<const detail::ScalarFnImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<const detail::ScalarFnImpl> impl_;
};

}  // namespace sdot
