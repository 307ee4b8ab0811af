#include "sdot/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

#include "sdot/errors.hpp"

namespace sdot {

void SolverConfig::validate(std::size_t n_sites) const {
  const double e0 = effective_eps0();
  std::ostringstream os;
  if (!(zeta > 0.0)) os << "zeta must be positive; ";
  if (!(e0 > 0.0 && e0 < eps)) os << "need 0 < eps0 < eps (eps = " << eps << ", eps0 = " << e0 << "); ";
  if (!(2.0 * e0 < 1.0 / (3.0 * static_cast<double>(n_sites))))
    os << "need 2 eps0 < 1/(3N) (eps0 = " << e0 << ", N = " << n_sites << "); ";
  if (max_newton_iters < 0) os << "max_newton_iters must be nonnegative; ";
  if (max_backtrack < 0) os << "max_backtrack must be nonnegative; ";
  const std::string msg = os.str();
  if (!msg.empty()) throw InvalidArgument("solver config: " + msg);
}

double solver_eps_for(const SplittingFee& fee) {
  const double n = static_cast<double>(fee.size());
  const double floor = fee.eps_floor();
  return floor > 0.0 ? std::min(floor, 0.99 / n) : std::min(0.02, 0.5 / n);
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::iteration_cap: return "iteration_cap";
    case SolveStatus::backtrack_failed: return "backtrack_failed";
    case SolveStatus::singular_hessian: return "singular_hessian";
  }
  return "unknown";
}

PhiEval phi_gradient(const TransportProblem& problem, const SplittingFee& fee, const DualVector& psi,
                     const MassOptions& mass) {
  if (fee.size() != problem.size()) throw InvalidArgument("phi_gradient: fee and problem sizes differ");
  PhiEval e;
  MassOptions m = mass;
  m.with_assignment = false;
  e.diagram = laguerre_masses(problem, psi, m);
  e.conj = conjugate_solve(fee, psi);
  e.grad = e.diagram.masses - e.conj.w;
  e.value = e.diagram.transport_cost + psi.dot(e.diagram.masses) - e.conj.fstar;
  return e;
}

// ---------------------------------------------------------------- shuffle

ShuffleResult parameter_shuffle(const TransportProblem& problem, const SplittingFee& fee, const DualVector& psi,
                                double tolerance, const ShuffleOptions& options) {
  const auto n = static_cast<Eigen::Index>(problem.size());
  if (!(tolerance > 0.0 && tolerance < 1.0 / (3.0 * static_cast<double>(n)))) {
    std::ostringstream os;
    os << "parameter_shuffle: tolerance " << tolerance << " must lie in (0, 1/(3N))";
    throw InvalidArgument(os.str());
  }
  MassOptions mopt = options.mass;
  mopt.with_assignment = false;

  ShuffleResult res;
  res.psi = psi;
  res.err_in = phi_gradient(problem, fee, psi, mopt).l1();
  WeightVector g = laguerre_masses(problem, res.psi, mopt).masses;
  double lip = 1.0;  // running secant estimate of the Lipschitz constant of G
  int loops = 0;
  const double lo_target = 2.0 * tolerance, hi_target = 3.0 * tolerance;

  while (g.minCoeff() <= tolerance) {
    if (++loops > options.max_loops) throw ShuffleError("parameter_shuffle: loop cap exceeded");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (g[i] > tolerance) continue;
      const double g0 = g[i];
      auto mass_after = [&](double r, WeightVector& out) {
        DualVector trial = res.psi;
        trial[i] -= r;
        out = laguerre_masses(problem, trial, mopt).masses;
        if (r > 0.0) lip = std::max(lip, (out[i] - g0) / r);
        return out[i];
      };
      WeightVector trial_masses;
      double r_lo = 0.0, r_hi = -1.0, r = tolerance / lip, accepted = -1.0;
      for (int it = 0; it < 2000; ++it) {
        const double gi = mass_after(r, trial_masses);
        if (gi >= lo_target && gi <= hi_target) {
          accepted = r;
          break;
        }
        if (gi < lo_target) {
          r_lo = r;
          r *= 2.0;
          if (!std::isfinite(r)) break;
        } else {
          r_hi = r;
          break;
        }
      }
      if (accepted < 0.0 && r_hi > 0.0) {
        for (int it = 0; it < 400; ++it) {
          const double mid = 0.5 * (r_lo + r_hi);
          if (mid - r_lo <= options.bisect_tol * std::max(1.0, mid) || mid <= r_lo || mid >= r_hi) break;
          const double gi = mass_after(mid, trial_masses);
          if (gi >= lo_target && gi <= hi_target) {
            accepted = mid;
            break;
          }
          if (gi < lo_target) r_lo = mid;
          else r_hi = mid;
        }
      }
      if (accepted < 0.0) {
        std::ostringstream os;
        os << "parameter_shuffle: no step puts cell " << i << " into [" << lo_target << ", " << hi_target
           << "]; the density may vanish on an open set";
        throw ShuffleError(os.str());
      }
      res.psi[i] -= accepted;
      g = trial_masses;
      ++res.steps;
    }
  }
  res.masses = g;
  res.err_out = res.steps == 0 ? res.err_in : phi_gradient(problem, fee, res.psi, mopt).l1();
  return res;
}

// ---------------------------------------------------------------- linear algebra

namespace {

// Orthonormal basis of the complement of span(1), as columns.
Eigen::MatrixXd mean_zero_basis(Eigen::Index n) {
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(n, 1);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(ones);
  const Eigen::MatrixXd q = qr.householderQ();
  return q.rightCols(n - 1);
}

}  // namespace

Eigen::VectorXd mean_zero_eigenvalues(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  if (n < 2) return Eigen::VectorXd();
  const Eigen::MatrixXd u = mean_zero_basis(n);
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  const Eigen::MatrixXd reduced = u.transpose() * sym * u;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reduced, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

Eigen::VectorXd solve_on_mean_zero(const Eigen::MatrixXd& h, const Eigen::VectorXd& rhs) {
  const Eigen::Index n = h.rows();
  if (n < 2) return Eigen::VectorXd::Zero(n);
  const Eigen::MatrixXd u = mean_zero_basis(n);
  const Eigen::MatrixXd sym = 0.5 * (h + h.transpose());
  const Eigen::MatrixXd reduced = u.transpose() * sym * u;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reduced);
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double scale = lam.cwiseAbs().maxCoeff();
  if (!(scale > 0.0) || lam.cwiseAbs().minCoeff() <= 1e-13 * scale) {
    throw ConditioningError("solve_on_mean_zero: Hessian is singular on the mean-zero subspace");
  }
  const Eigen::VectorXd coeffs = es.eigenvectors().transpose() * (u.transpose() * rhs);
  const Eigen::VectorXd z = es.eigenvectors() * coeffs.cwiseQuotient(lam);
  return u * z;
}

Eigen::MatrixXd phi_hessian(const TransportProblem& problem, const SplittingFee& fee, const DualVector& psi,
                            const JacobianOptions& jac, const ConjugateResult* conj) {
  const Eigen::MatrixXd dg = laguerre_jacobian(problem, psi, jac);
  const Eigen::MatrixXd d2 = conj ? fstar_hessian(fee, *conj, BoundaryPolicy::active_set)
                                  : fstar_hessian(fee, psi, BoundaryPolicy::active_set);
  return dg - d2;
}

double estimate_kappa(const TransportProblem& problem, const SplittingFee& fee, const DualVector& psi,
                      const JacobianOptions& jac) {
  const Eigen::MatrixXd h = phi_hessian(problem, fee, psi, jac);
  const Eigen::VectorXd lam = mean_zero_eigenvalues(-h);
  if (lam.size() == 0) return INFINITY;
  return lam.minCoeff();
}

// ---------------------------------------------------------------- Newton

NewtonResult damped_newton(const TransportProblem& problem, const SplittingFee& fee, const DualVector& psi0,
                           const SolverConfig& config) {
  config.validate(problem.size());
  if (fee.size() != problem.size()) throw InvalidArgument("damped_newton: fee and problem sizes differ");
  const double eps0 = config.effective_eps0();
  const double csup = cost_sup_norm(problem);
  const MassOptions& mopt = config.jacobian.mass;
  ShuffleOptions sopt;
  sopt.mass = mopt;
  sopt.bisect_tol = config.shuffle_bisect_tol;
  sopt.max_loops = config.shuffle_max_loops;
  JacobianOptions jopt = config.jacobian;

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };

  NewtonResult out;
  DualVector psi = psi0;
  PhiEval eval = phi_gradient(problem, fee, psi, mopt);
  int shuffle_steps = 0;
  for (int k = 0;; ++k) {
    IterationRecord rec;
    rec.k = k;
    rec.err_l1 = eval.l1();
    rec.err_l2 = eval.l2();
    rec.min_mass = eval.diagram.masses.minCoeff();
    rec.shuffle_steps = shuffle_steps;
    rec.psi = psi;
    rec.masses = eval.diagram.masses;
    rec.psi_bound_excess = psi_bound_excess(psi, eval.diagram.masses, csup);
    rec.elapsed_ms = elapsed();

    auto finish = [&](SolveStatus st, std::string msg) {
      out.trace.records.push_back(rec);
      out.trace.status = st;
      out.trace.message = std::move(msg);
    };
    if (rec.err_l2 < config.zeta) {
      finish(SolveStatus::converged, "");
      break;
    }
    if (k >= config.max_newton_iters) {
      finish(SolveStatus::iteration_cap, "maximum number of Newton iterations reached");
      break;
    }

    // Step 1: shuffle with tolerance 2 eps0.
    const ShuffleResult sh = parameter_shuffle(problem, fee, psi, 2.0 * eps0, sopt);
    if (sh.steps > 0) {
      psi = sh.psi;
      eval = phi_gradient(problem, fee, psi, mopt);
    }
    rec.base_l1 = eval.l1();
    shuffle_steps = 0;
    const int steps_here = sh.steps;

    // Step 2: Newton direction on the mean-zero subspace.
    Eigen::VectorXd dir;
    try {
      const Eigen::MatrixXd h = phi_hessian(problem, fee, psi, jopt, &eval.conj);
      dir = solve_on_mean_zero(h, -eval.grad);
    } catch (const Error& e) {
      rec.shuffle_steps += steps_here;
      finish(SolveStatus::singular_hessian, e.what());
      break;
    }

    // Step 3: smallest ell meeting the mass floor and the l1 decrease.
    const double base = rec.base_l1;
    int accepted = -1;
    PhiEval cand_eval;
    DualVector cand;
    for (int ell = 0; ell <= config.max_backtrack; ++ell) {
      cand = psi + std::ldexp(1.0, -ell) * dir;
      if (!cand.allFinite()) continue;
      const LaguerreDiagram diag = laguerre_masses(problem, cand, mopt);
      if (diag.masses.minCoeff() < eps0) continue;
      cand_eval = phi_gradient(problem, fee, cand, mopt);
      if (cand_eval.l1() <= (1.0 - std::ldexp(1.0, -(ell + 1))) * base) {
        accepted = ell;
        break;
      }
    }
    if (accepted < 0) {
      std::ostringstream os;
      os << "backtracking exhausted ell_max = " << config.max_backtrack << " at iteration " << k
         << " (||grad||_1 = " << base << ", min mass = " << eval.diagram.masses.minCoeff() << ")";
      rec.shuffle_steps += steps_here;
      finish(SolveStatus::backtrack_failed, os.str());
      break;
    }
    rec.ell = accepted;
    rec.accepted_l1 = cand_eval.l1();
    rec.shuffle_steps = steps_here;
    out.trace.records.push_back(rec);

    // Step 4.
    psi = cand;
    eval = std::move(cand_eval);
  }
  out.psi = psi;
  out.w = eval.conj.w;
  out.final_eval = std::move(eval);
  return out;
}

}  // namespace sdot
