#pragma once

// Ground truth independent of the dual solver: the Kantorovich cost C(w),
// brute-force minimization of C + F over a simplex grid, stability
// experiments and Hausdorff distances between box-simplex intersections.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdot/fees.hpp"
#include "sdot/geometry.hpp"
#include "sdot/solver.hpp"

namespace sdot {

enum class CostRoute { automatic, rearrangement, indicator_newton };

struct OracleOptions {
  CostRoute route = CostRoute::automatic;
  double zeta = 1e-12;  ///< tolerance of the indicator-fee solve
  MassOptions mass{};
};

/// Minimal transport cost of moving mu onto sum_i w^i delta_{y_i}.
double kantorovich_cost(const TransportProblem& problem, const WeightVector& w, const OracleOptions& options = {});

/// C(w) + F(w); +inf when F is.
ExtendedReal primal_objective(const TransportProblem& problem, const SplittingFee& fee, const WeightVector& w,
                              const OracleOptions& options = {});

/// Argmin of C + F over {w in the simplex : w^i in grid_step * Z}, ties to the
/// lexicographically smallest w. 1-D problems only, N <= 4.
WeightVector brute_force_minimize(const TransportProblem& problem, const SplittingFee& fee, double grid_step);

/// Minimizer of C + F: damped Newton when the fee is Newton-ready, brute force
/// otherwise.
struct WeightSolve {
  WeightVector w;
  std::string method;  ///< "newton" or "brute_force"
};
WeightSolve solve_weights(const TransportProblem& problem, const SplittingFee& fee, double grid_step = 1e-3,
                          const SolverConfig* config = nullptr);

enum class BoundForm { sup_norm, hausdorff };

struct StabilityReport {
  std::string description;
  BoundForm form = BoundForm::sup_norm;
  double perturbation = 0.0;  ///< ||F1 - F2||_inf or d_H(dom F1, dom F2)
  double distance = 0.0;      ///< ||w1 - w2||_2
  /// distance / sqrt(perturbation), the constant of a square-root law.
  double sqrt_law_constant = 0.0;
  /// Constant C_L for which the bound is tight on this run.
  double fitted_constant = 0.0;
  WeightVector w1, w2;
  std::string method1, method2;
};

struct StabilityOptions {
  double grid_step = 1e-3;  ///< brute force fallback
  int samples = 40000;      ///< sup-norm sampling beyond N = 4
  unsigned seed = 7;
  const SolverConfig* config = nullptr;
};

/// sup over the simplex of |F1 - F2| where both are finite.
double sampled_fee_distance(const SplittingFee& f1, const SplittingFee& f2, int samples = 40000, unsigned seed = 7);

StabilityReport stability_experiment(const TransportProblem& problem, const SplittingFee& fee1,
                                     const SplittingFee& fee2, const StabilityOptions& options = {});

struct LadderReport {
  std::vector<double> scales;
  std::vector<StabilityReport> rungs;
  /// sqrt_law_constant of rung k+1 over rung k.
  std::vector<double> ratios;
  /// Every ratio is at most 2: the distance never shrinks slower than a
  /// square root of the perturbation by more than a factor of 2.
  bool consistent = false;
  double fitted_constant = 0.0;  ///< max over the rungs
};

/// fee2 = (1 + s) fee1 for each s in `scales`.
LadderReport stability_ladder(const TransportProblem& problem, const SplittingFee& fee1,
                              const std::vector<double>& scales = {0.04, 0.01, 0.0025},
                              const StabilityOptions& options = {});

nlohmann::json to_json(const StabilityReport& report);
nlohmann::json to_json(const LadderReport& report);

/// Euclidean projection onto {w : lo <= w <= hi, sum w = 1}.
WeightVector project_box_simplex(const WeightVector& x, const std::vector<Interval>& box);

/// Hausdorff distance between the sets {w in box : sum w = 1}; both must be
/// nonempty. Exact up to the projection bisection.
double hausdorff_box_simplex(const std::vector<Interval>& box1, const std::vector<Interval>& box2);

/// 4 sum_i max(|a_i - c_i|, |b_i - d_i|)
double hypercube_hausdorff_bound(const std::vector<Interval>& box1, const std::vector<Interval>& box2);

}  // namespace sdot
