#pragma once

// Dual objective Phi(psi) = int min_i (c(x, y_i) + psi^i) dmu - F*(psi), the
// parameter shuffling routine and the damped Newton iteration that maximizes
// Phi.

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdot/fees.hpp"
#include "sdot/geometry.hpp"

namespace sdot {

struct SolverConfig {
  double zeta = 1e-8;  ///< stop once ||grad Phi||_2 < zeta
  double eps = 0.02;   ///< lower bound on grad F* (mass units)
  /// Cell-mass floor of the line search; defaults to eps / 6.
  std::optional<double> eps0;
  int max_newton_iters = 100;
  int max_backtrack = 40;
  /// Relative width at which the shuffle bisection gives up.
  double shuffle_bisect_tol = 1e-15;
  int shuffle_max_loops = 100000;
  JacobianOptions jacobian{};

  double effective_eps0() const { return eps0 ? *eps0 : eps / 6.0; }
  /// Throws InvalidArgument unless 0 < eps0 < eps, 2 eps0 < 1/(3N), zeta > 0.
  void validate(std::size_t n_sites) const;
};

/// Default eps for a fee: min(min_i a_i, 0.99 / N), or min(0.02, 0.5 / N)
/// when some domain reaches 0.
double solver_eps_for(const SplittingFee& fee);

struct PhiEval {
  Eigen::VectorXd grad;  ///< G(psi) - grad F*(psi)
  double value = 0.0;
  LaguerreDiagram diagram;
  ConjugateResult conj;

  double l1() const { return grad.lpNorm<1>(); }
  double l2() const { return grad.norm(); }
};

PhiEval phi_gradient(const TransportProblem& problem, const SplittingFee& fee, const DualVector& psi,
                     const MassOptions& mass = {});

struct ShuffleResult {
  DualVector psi;
  int steps = 0;  ///< coordinate updates performed
  double err_in = 0.0;   ///< ||grad Phi||_1 at entry
  double err_out = 0.0;  ///< ||grad Phi||_1 at exit
  WeightVector masses;
};

struct ShuffleOptions {
  MassOptions mass{};
  double bisect_tol = 1e-15;
  int max_loops = 100000;
};

/// Lowers coordinates of psi until every cell carries mass above `tolerance`;
/// each under-massed cell is inflated into [2 tol, 3 tol].
ShuffleResult parameter_shuffle(const TransportProblem& problem, const SplittingFee& fee, const DualVector& psi,
                                double tolerance, const ShuffleOptions& options = {});

struct IterationRecord {
  int k = 0;
  double err_l1 = 0.0;  ///< ||grad Phi(psi_k)||_1 at the iterate
  double err_l2 = 0.0;
  double min_mass = 0.0;
  int shuffle_steps = 0;
  double base_l1 = 0.0;      ///< after the shuffle; the Newton step starts here
  int ell = -1;              ///< accepted backtracking exponent, -1 on the last row
  double accepted_l1 = 0.0;  ///< error at the accepted candidate
  double psi_bound_excess = 0.0;
  double elapsed_ms = 0.0;
  DualVector psi;
  WeightVector masses;
};

enum class SolveStatus { converged, iteration_cap, backtrack_failed, singular_hessian };

std::string to_string(SolveStatus status);

struct SolveTrace {
  std::vector<IterationRecord> records;
  SolveStatus status = SolveStatus::converged;
  std::string message;
};

struct NewtonResult {
  DualVector psi;
  WeightVector w;
  SolveTrace trace;
  PhiEval final_eval;

  bool converged() const { return trace.status == SolveStatus::converged; }
};

NewtonResult damped_newton(const TransportProblem& problem, const SplittingFee& fee, const DualVector& psi0,
                           const SolverConfig& config);

/// D^2 Phi = DG - D^2 F*.
Eigen::MatrixXd phi_hessian(const TransportProblem& problem, const SplittingFee& fee, const DualVector& psi,
                            const JacobianOptions& jac = {}, const ConjugateResult* conj = nullptr);

/// Least-norm d in the complement of span(1) with H d = rhs (rhs orthogonal to 1).
/// Throws ConditioningError when H is singular there.
Eigen::VectorXd solve_on_mean_zero(const Eigen::MatrixXd& h, const Eigen::VectorXd& rhs);

/// Smallest eigenvalue of -(DG - D^2 F*) on the complement of span(1).
double estimate_kappa(const TransportProblem& problem, const SplittingFee& fee, const DualVector& psi,
                      const JacobianOptions& jac = {});

/// Eigenvalues of a symmetric matrix restricted to the complement of span(1).
Eigen::VectorXd mean_zero_eigenvalues(const Eigen::MatrixXd& m);

}  // namespace sdot
