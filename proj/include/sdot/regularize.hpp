#pragma once

// Turns an arbitrary splitting fee into one the damped Newton method can
// solve: truncation to a level set, widening of point domains, a positive
// floor on the domains, smoothing and strong convexification.

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdot/fees.hpp"
#include "sdot/scalar_fn.hpp"

namespace sdot {

/// Smooth convex function on [c, d] built from a piecewise-linear
/// interpolant whose derivative is mollified by a quadratic B-spline.
ScalarConvexFn make_smoothed(Interval domain, std::vector<double> knot_values, double width);

/// f(x) - eta * sqrt((d - x)(x - c)) on dom f = [c, d].
ScalarConvexFn make_convexified(ScalarConvexFn inner, double eta);

/// Smooth convex approximation with sup-distance below eta on the domain.
/// Affine inputs are returned unchanged.
ScalarConvexFn smooth_scalar(const ScalarConvexFn& f, double eta);

/// f - eta * sqrt((d - x)(x - c)): strongly convex with parameter 2 eta / (d - c)
/// and essentially smooth.
ScalarConvexFn convexify_scalar(const ScalarConvexFn& f, double eta);

/// Sup of |f - g| on 8193 evenly spaced points of the common domain.
double sampled_sup_distance(const ScalarConvexFn& f, const ScalarConvexFn& g, int samples = 8193);

enum class FloorCase { interior, degenerate };

struct FloorResult {
  FloorCase which = FloorCase::interior;
  double eps = 0.0;  ///< floor used in the interior case
  std::vector<Interval> domains;
};

/// Domains [c_i, d_i] produced from [a_i, b_i] by the floor stage.
FloorResult floor_domains(const std::vector<Interval>& domains, double eta);

struct RegularizeOptions {
  bool truncate = true;
  std::optional<double> eta_widen;
  std::optional<double> eta_floor;
  std::optional<double> eta_smooth;
  std::optional<double> eta_convexify;
};

struct RegularizationReport {
  double eta = 0.0;
  double cost_sup = 0.0;
  double min_fee = 0.0;  ///< min over the simplex of the input fee
  std::vector<double> truncation_levels;
  /// Domains after stages 1 (input) through 6.
  std::vector<std::vector<Interval>> stage_domains;
  /// Stages that changed each part.
  std::vector<std::vector<int>> stages_applied;
  FloorCase floor_case = FloorCase::interior;
  double floor_eps = 0.0;
  std::vector<double> smoothing_error;
  std::vector<double> strong_convexity;
  double eps_for_solver = 0.0;

  const std::vector<Interval>& final_domains() const { return stage_domains.back(); }
};

nlohmann::json to_json(const RegularizationReport& report);

struct RegularizedFee {
  SplittingFee fee;
  RegularizationReport report;
};

RegularizedFee regularize(const SplittingFee& fee, double eta, double cost_sup, const RegularizeOptions& options = {});

/// Stage 2 alone: each f_i restricted to {f_i <= L_i}; returns the levels too.
SplittingFee truncate_to_level_sets(const SplittingFee& fee, double cost_sup, std::vector<double>* levels = nullptr);

}  // namespace sdot
