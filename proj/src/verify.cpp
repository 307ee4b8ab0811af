#include "sdot/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sdot/errors.hpp"
#include "sdot/oracle.hpp"
#include "sdot/regularize.hpp"
#include "sdot/solver.hpp"

namespace sdot {

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

DualVector random_psi(std::mt19937_64& rng, int n, double spread) {
  DualVector psi(n);
  for (int i = 0; i < n; ++i) psi[i] = uniform(rng, -spread, spread);
  return psi;
}

// Distinct sites spread over the box.
std::vector<Point2> random_sites(std::mt19937_64& rng, int n, int dim) {
  std::vector<Point2> pts;
  while (static_cast<int>(pts.size()) < n) {
    Point2 p{uniform(rng, 0.05, 0.95), dim == 2 ? uniform(rng, 0.05, 0.95) : 0.0};
    bool far = true;
    for (const auto& q : pts) far = far && std::hypot(p[0] - q[0], p[1] - q[1]) > 0.5 / n;
    if (far) pts.push_back(p);
  }
  return pts;
}

class Collector {
 public:
  Collector(std::string suite, VerifyReport& report) : suite_(std::move(suite)), report_(report) {}

  // Records the maximum of `measured` over instances against `tol`.
  void add(const std::string& name, double measured, double tol, int instances, std::string detail = "") {
    PropertyResult r;
    r.suite = suite_;
    r.name = name;
    r.measured = measured;
    r.tolerance = tol;
    r.pass = measured <= tol;
    r.instances = instances;
    r.detail = std::move(detail);
    report_.results.push_back(std::move(r));
  }

 private:
  std::string suite_;
  VerifyReport& report_;
};

// ---------------------------------------------------------------- gradient

void gradient_suite(const VerifyOptions& opt, VerifyReport& report) {
  Collector col("gradient", report);
  std::mt19937_64 rng(opt.seed * 7919 + 1);
  double e_grad = 0.0, e_hess = 0.0, e_kernel = 0.0, e_dd = 0.0, e_fy = 0.0, e_sum = 0.0, e_shift = 0.0, e_mono = 0.0;
  int done = 0;
  while (done < opt.instances) {
    const int n = 2 + static_cast<int>(rng() % 5);
    const SplittingFee fee = random_smooth_fee(rng, n);
    const DualVector psi = random_psi(rng, n, 0.5);
    const ConjugateResult c = conjugate_solve(fee, psi);
    if (std::any_of(c.at_boundary.begin(), c.at_boundary.end(), [](bool b) { return b; })) continue;
    ++done;
    e_sum = std::max(e_sum, std::abs(c.w.sum() - 1.0));
    e_fy = std::max(e_fy, std::abs(psi.dot(c.w) - fee_value(fee, c.w).value() - c.fstar));
    const Eigen::MatrixXd h = fstar_hessian(fee, c);
    const double hg = 1e-6, hh = 1e-5;
    for (int j = 0; j < n; ++j) {
      DualVector p = psi, m = psi;
      p[j] += hg;
      m[j] -= hg;
      const double fd = (conjugate_solve(fee, p).fstar - conjugate_solve(fee, m).fstar) / (2.0 * hg);
      e_grad = std::max(e_grad, std::abs(fd - c.w[j]));
      p = psi;
      m = psi;
      p[j] += hh;
      m[j] -= hh;
      const Eigen::VectorXd col = (conjugate_solve(fee, p).w - conjugate_solve(fee, m).w) / (2.0 * hh);
      e_hess = std::max(e_hess, (col - h.col(j)).cwiseAbs().maxCoeff());
      double off = 0.0;
      for (int k = 0; k < n; ++k)
        if (k != j) off += std::abs(h(j, k));
      e_dd = std::max(e_dd, std::abs(h(j, j) - off));
      // Raising psi^j never raises another coordinate of w.
      DualVector up = psi;
      up[j] += 0.05;
      const WeightVector wu = conjugate_solve(fee, up).w;
      for (int k = 0; k < n; ++k)
        if (k != j) e_mono = std::max(e_mono, wu[k] - c.w[k]);
    }
    e_kernel = std::max(e_kernel, (h * Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff());
    const ConjugateResult cs = conjugate_solve(fee, psi + 0.37 * DualVector::Ones(n));
    e_shift = std::max(e_shift, std::max((cs.w - c.w).cwiseAbs().maxCoeff(), std::abs(cs.fstar - c.fstar - 0.37)));
  }
  col.add("grad_fstar_matches_finite_differences", e_grad, 1e-6, done);
  col.add("hessian_matches_finite_differences", e_hess, 1e-5, done);
  col.add("hessian_annihilates_ones", e_kernel, 1e-10, done);
  col.add("hessian_diagonal_dominance_equality", e_dd, 1e-9, done);
  col.add("fenchel_young_equality", e_fy, 1e-9, done);
  col.add("weights_sum_to_one", e_sum, 1e-10, done);
  col.add("conjugate_shift_invariance", e_shift, 1e-9, done);
  col.add("monotone_coupling", e_mono, 1e-10, done);
}

// ---------------------------------------------------------------- geometry

void geometry_suite(const VerifyOptions& opt, VerifyReport& report) {
  Collector col("geometry", report);
  std::mt19937_64 rng(opt.seed * 104729 + 3);
  const int count = std::max(1, opt.instances / 5);
  double e_sum = 0.0, e_rows = 0.0, e_sym = 0.0, e_exact = 0.0, e_shift = 0.0, e_psi = -INFINITY, e_mono = 0.0;
  for (int t = 0; t < count; ++t) {
    const int n = 2 + static_cast<int>(rng() % 4);
    const TransportProblem prob = random_problem_1d(rng, n, 500, t % 2 == 1);
    DualVector psi = random_psi(rng, n, 0.02);
    WeightVector g = laguerre_masses(prob, psi).masses;
    e_sum = std::max(e_sum, std::abs(g.sum() - 1.0));
    const WeightVector gs = laguerre_masses(prob, psi + 3.0 * DualVector::Ones(n)).masses;
    e_shift = std::max(e_shift, (gs - g).cwiseAbs().maxCoeff());
    e_psi = std::max(e_psi, psi_bound_excess(psi, g, cost_sup_norm(prob)));
    for (int i = 0; i < n; ++i) {
      DualVector up = psi;
      up[i] += 0.01;
      e_mono = std::max(e_mono, laguerre_masses(prob, up).masses[i] - g[i]);
    }
    if (g.minCoeff() <= 1e-3) continue;
    JacobianOptions fd;
    const Eigen::MatrixXd dg = laguerre_jacobian(prob, psi, fd);
    JacobianOptions ex;
    ex.method = JacobianMethod::exact_1d;
    const Eigen::MatrixXd dx = laguerre_jacobian(prob, psi, ex);
    e_rows = std::max(e_rows, (dg * Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff());
    e_sym = std::max(e_sym, (dg - dg.transpose()).norm() / std::max(1e-300, dg.norm()));
    e_exact = std::max(e_exact, (dg - dx).cwiseAbs().maxCoeff() / std::max(1.0, dx.cwiseAbs().maxCoeff()));
  }
  col.add("masses_sum_to_one", e_sum, 1e-12, count);
  col.add("masses_shift_invariant", e_shift, 1e-12, count);
  col.add("mass_monotone_in_own_psi", e_mono, 0.0, count);
  col.add("psi_bound_invariant", std::max(0.0, e_psi), 1e-9, count);
  col.add("jacobian_rows_sum_to_zero", e_rows, 1e-8, count);
  col.add("jacobian_symmetric", e_sym, 1e-6, count);
  col.add("jacobian_fd_matches_exact_1d", e_exact, 1e-4, count);
}

// ---------------------------------------------------------------- shuffle

void shuffle_suite(const VerifyOptions& opt, VerifyReport& report) {
  Collector col("shuffle", report);
  std::mt19937_64 rng(opt.seed * 15485863 + 5);
  int ok_terminate = 0, ok_mass = 0, ok_error = 0;
  double worst_increase = -INFINITY, worst_mass_gap = INFINITY;
  for (int t = 0; t < opt.instances; ++t) {
    const int n = 2 + static_cast<int>(rng() % 5);
    const bool two_d = t % 4 == 3;
    const TransportProblem prob = two_d ? random_problem_2d(rng, n, 24) : random_problem_1d(rng, n, 400, t % 2 == 1);
    const double floor = 0.05;
    const SplittingFee fee = random_quadratic_fee(rng, n, floor);
    const double tol = floor / 3.0;
    const DualVector psi = random_psi(rng, n, 0.6);
    try {
      const ShuffleResult r = parameter_shuffle(prob, fee, psi, tol);
      ++ok_terminate;
      worst_mass_gap = std::min(worst_mass_gap, r.masses.minCoeff() - tol);
      if (r.masses.minCoeff() > tol) ++ok_mass;
      worst_increase = std::max(worst_increase, r.err_out - r.err_in);
      if (r.err_out <= r.err_in + 1e-12) ++ok_error;
    } catch (const Error&) {
    }
  }
  const int n = opt.instances;
  col.add("terminates", n - ok_terminate, 0.0, n);
  col.add("min_mass_above_tolerance", n - ok_mass, 0.0, n, "smallest margin " + std::to_string(worst_mass_gap));
  col.add("error_non_increase", n - ok_error, 0.0, n, "largest increase " + std::to_string(worst_increase));
}

// ---------------------------------------------------------------- oracle

void oracle_suite(const VerifyOptions& opt, VerifyReport& report) {
  Collector col("oracle", report);
  std::mt19937_64 rng(opt.seed * 32452843 + 7);
  double worst = 0.0, worst_cost = 0.0;
  const int n = opt.oracle_sites;
  if (n < 2 || n > 4) throw InvalidArgument("verify: oracle suite needs 2 <= N <= 4");
  for (int t = 0; t < opt.oracle_instances; ++t) {
    const TransportProblem prob = random_problem_1d(rng, n, 1000, t % 2 == 1);
    const SplittingFee fee = random_quadratic_fee(rng, n, 0.02);
    SolverConfig cfg;
    cfg.eps = solver_eps_for(fee);
    cfg.zeta = 1e-11;
    const NewtonResult nr = damped_newton(prob, fee, DualVector::Zero(n), cfg);
    const WeightVector bf = brute_force_minimize(prob, fee, opt.grid_step);
    worst = std::max(worst, nr.converged() ? (nr.w - bf).cwiseAbs().maxCoeff() : INFINITY);
    // Laguerre maps are optimal in 1-D: C(G(psi)) equals the cost of the map.
    const LaguerreDiagram d = laguerre_masses(prob, nr.psi);
    worst_cost = std::max(worst_cost, std::abs(kantorovich_cost(prob, d.masses) - d.transport_cost));
  }
  col.add("newton_matches_brute_force", worst, 2.0 * opt.grid_step, opt.oracle_instances);
  col.add("rearrangement_cost_matches_laguerre_cost", worst_cost, 1e-8, opt.oracle_instances);
}

// ---------------------------------------------------------------- regularize

void regularize_suite(const VerifyOptions& opt, VerifyReport& report) {
  Collector col("regularize", report);
  std::mt19937_64 rng(opt.seed * 49979687 + 11);
  const int count = std::max(1, opt.instances / 10);
  int failures = 0;
  std::string first_failure;
  for (int t = 0; t < count; ++t) {
    const int n = 2 + static_cast<int>(rng() % 3);
    std::vector<ScalarConvexFn> parts;
    WeightVector point = WeightVector::Zero(n);
    double rem = 1.0;
    for (int i = 0; i < n; ++i) {
      point[i] = i + 1 == n ? rem : uniform(rng, 0.1, 1.0 / n);
      rem -= point[i];
    }
    for (int i = 0; i < n; ++i) {
      switch (t % 3) {
        case 0: parts.push_back(ScalarConvexFn::indicator({point[i], point[i]})); break;
        case 1: parts.push_back(ScalarConvexFn::quadratic({0.0, 1.0}, uniform(rng, 0.0, 0.5), uniform(rng, 0.5, 3.0))); break;
        default: {
          const double kink = uniform(rng, 0.2, 0.8);
          parts.push_back(ScalarConvexFn::tabulated({0.0, kink, 1.0}, {uniform(rng, 0.0, 0.3), 0.0, uniform(rng, 0.0, 0.3)}));
        }
      }
    }
    const RegularizedFee r = regularize(SplittingFee(parts), 0.05, 0.5);
    const AssumptionReport a = check_assumptions(r.fee);
    if (!a.overall) {
      ++failures;
      if (first_failure.empty() && !a.failures.empty()) first_failure = a.failures.front();
    }
  }
  col.add("pipeline_output_meets_assumptions", failures, 0.0, count, first_failure);
}

}  // namespace

bool VerifyReport::all_pass() const {
  return std::all_of(results.begin(), results.end(), [](const PropertyResult& r) { return r.pass; });
}

nlohmann::json VerifyReport::to_json() const {
  nlohmann::json props = nlohmann::json::array();
  for (const auto& r : results) {
    props.push_back({{"suite", r.suite},
                     {"name", r.name},
                     {"pass", r.pass},
                     {"measured", r.measured},
                     {"tolerance", r.tolerance},
                     {"instances", r.instances},
                     {"detail", r.detail}});
  }
  return {{"all_pass", all_pass()}, {"properties", props}};
}

VerifyReport run_verify_suites(const VerifyOptions& options) {
  VerifyReport report;
  const std::string& s = options.suite;
  const bool all = s == "all" || s == "default";
  bool known = all;
  if (all || s == "gradient") {
    gradient_suite(options, report);
    known = true;
  }
  if (all || s == "geometry") {
    geometry_suite(options, report);
    known = true;
  }
  if (all || s == "shuffle") {
    shuffle_suite(options, report);
    known = true;
  }
  if (all || s == "oracle") {
    oracle_suite(options, report);
    known = true;
  }
  if (all || s == "regularize") {
    regularize_suite(options, report);
    known = true;
  }
  if (!known) throw InvalidArgument("verify: unknown suite '" + s + "'");
  return report;
}

// ---------------------------------------------------------------- generators

TransportProblem random_problem_1d(std::mt19937_64& rng, int n_sites, int resolution, bool tabulated) {
  const DomainSpec dom = DomainSpec::interval(0.0, 1.0, resolution);
  DensityField rho = DensityField::uniform(dom);
  if (tabulated) {
    // Lipschitz bump profile, bounded away from zero.
    const double c = uniform(rng, 0.2, 0.8), amp = uniform(rng, 0.2, 0.8);
    std::vector<double> v(static_cast<std::size_t>(resolution));
    for (int k = 0; k < resolution; ++k) v[k] = 1.0 + amp * std::cos(3.0 * (dom.node(k)[0] - c));
    rho = DensityField::tabulated(dom, v);
  }
  SiteSet sites{random_sites(rng, n_sites, 1)};
  return TransportProblem(dom, rho, sites);
}

TransportProblem random_problem_2d(std::mt19937_64& rng, int n_sites, int resolution) {
  const DomainSpec dom = DomainSpec::box({0.0, 1.0}, {0.0, 1.0}, resolution, resolution);
  SiteSet sites{random_sites(rng, n_sites, 2)};
  return TransportProblem(dom, DensityField::uniform(dom), sites);
}

SplittingFee random_quadratic_fee(std::mt19937_64& rng, int n_sites, double floor) {
  std::vector<ScalarConvexFn> parts;
  for (int i = 0; i < n_sites; ++i)
    parts.push_back(ScalarConvexFn::quadratic({floor, 1.0}, uniform(rng, 0.0, 0.6), uniform(rng, 0.5, 3.0)));
  return SplittingFee(std::move(parts));
}

SplittingFee random_smooth_fee(std::mt19937_64& rng, int n_sites) {
  std::vector<ScalarConvexFn> parts;
  const double n = n_sites;
  for (int i = 0; i < n_sites; ++i) {
    const double a = uniform(rng, 0.0, 0.5 / n);
    const double b = std::min(1.0, a + uniform(rng, 1.5 / n, 3.0 / n));
    switch (rng() % 3) {
      case 0: parts.push_back(ScalarConvexFn::log_barrier({a, b}, uniform(rng, 0.05, 0.5))); break;
      case 1: parts.push_back(ScalarConvexFn::entropy({0.0, 1.0}, uniform(rng, 0.5, 2.0))); break;
      default:
        parts.push_back(
            make_convexified(ScalarConvexFn::quadratic({a, b}, uniform(rng, a, b), uniform(rng, 1.0, 4.0)), uniform(rng, 0.05, 0.3)));
    }
  }
  return SplittingFee(std::move(parts));
}

}  // namespace sdot
