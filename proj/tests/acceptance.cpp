// Acceptance runs. One PASS/FAIL line per criterion; non-zero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sdot/fees.hpp"
#include "sdot/geometry.hpp"
#include "sdot/oracle.hpp"
#include "sdot/regularize.hpp"
#include "sdot/solver.hpp"

using namespace sdot;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Every Newton trace produced below, for the dual bound check.
struct TracedRun {
  std::string name;
  double cost_sup;
  SolveTrace trace;
};
std::vector<TracedRun> g_runs;

NewtonResult traced_newton(const std::string& name, const TransportProblem& p, const SplittingFee& fee,
                           const SolverConfig& cfg) {
  auto res = damped_newton(p, fee, DualVector::Zero(static_cast<Eigen::Index>(p.size())), cfg);
  g_runs.push_back({name, cost_sup_norm(p), res.trace});
  return res;
}

TransportProblem line(std::vector<double> ys, int resolution = 1000) {
  const auto dom = DomainSpec::interval(0.0, 1.0, resolution);
  SiteSet s;
  for (double y : ys) s.points.push_back({y, 0.0});
  return TransportProblem(dom, DensityField::uniform(dom), s);
}

SiteSet ten_sites() {
  SiteSet s;
  for (int i = 0; i < 10; ++i) s.points.push_back({0.1 + 0.08 * i, 0.5 + 0.35 * std::sin(1.7 * i)});
  return s;
}

SplittingFee ten_fee() {
  return SplittingFee(std::vector<ScalarConvexFn>(10, ScalarConvexFn::quadratic({0.02, 1.0}, 0.1, 1.0)));
}

SolverConfig ten_config() {
  SolverConfig cfg;
  cfg.eps = 0.02;
  cfg.zeta = 1e-8;
  cfg.max_newton_iters = 60;
  return cfg;
}

// ---------------------------------------------------------------- 1

Outcome fixed_point() {
  auto p = line({0.25, 0.85});
  SplittingFee fee(std::vector<ScalarConvexFn>(2, ScalarConvexFn::quadratic({0.0, 1.0}, 0.0, 1.0)));
  SolverConfig cfg;
  cfg.zeta = 1e-10;
  cfg.eps = 0.3;
  const auto t0 = Clock::now();
  auto res = traced_newton("fixed point", p, fee, cfg);
  const double secs = seconds_since(t0);
  // w1 = 0.55 + d / 1.2 = 0.5 - d / 2.
  const double delta = -0.05 / (1.0 / 1.2 + 0.5);
  const double want = 0.5 - delta / 2.0;
  const double err = std::abs(res.w[0] - want);
  return {res.converged() && err <= 1e-8 && secs < 1.0,
          fmt("w1 = %.12f, closed form %.12f, |diff| = %.2e, %.3f s", res.w[0], want, err, secs)};
}

// ---------------------------------------------------------------- 2

SplittingFee random_compliant_fee(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScalarConvexFn> parts;
  for (int i = 0; i < n; ++i) {
    const double a = 0.02 + 0.08 * u(rng);
    if (u(rng) < 0.5)
      parts.push_back(ScalarConvexFn::quadratic({a, 1.0}, u(rng), 0.5 + 2.5 * u(rng)));
    else
      parts.push_back(ScalarConvexFn::log_barrier({a, 0.9 + 0.1 * u(rng)}, 0.02 + 0.1 * u(rng)));
  }
  return SplittingFee(parts);
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto t0 = Clock::now();
  double worst = 0.0;
  bool ok = true;
  for (int t = 0; t < 20; ++t) {
    const int n = t % 2 == 0 ? 2 : 3;
    std::vector<double> ys;
    for (int i = 0; i < n; ++i) ys.push_back((i + 0.2 + 0.6 * u(rng)) / n);
    auto p = line(ys);
    auto fee = random_compliant_fee(rng, n);
    if (!check_assumptions(fee).newton_ready) {
      ok = false;
      continue;
    }
    SolverConfig cfg;
    cfg.eps = solver_eps_for(fee);
    cfg.zeta = 1e-12;
    auto res = traced_newton(fmt("oracle %d", t), p, fee, cfg);
    ok &= res.converged();
    auto bf = brute_force_minimize(p, fee, 1e-4);
    worst = std::max(worst, (res.w - bf).lpNorm<Eigen::Infinity>());
  }
  const double secs = seconds_since(t0);
  return {ok && worst <= 2e-4 && secs < 120.0, fmt("max |w_newton - w_grid|_inf = %.2e over 20 instances, %.1f s", worst, secs)};
}

// ---------------------------------------------------------------- 3

Outcome linear_rate() {
  const auto dom = DomainSpec::box({0, 1}, {0, 1}, 256, 256);
  TransportProblem p(dom, DensityField::uniform(dom), ten_sites());
  const auto cfg = ten_config();
  const auto t0 = Clock::now();
  auto res = traced_newton("square uniform", p, ten_fee(), cfg);
  const double secs = seconds_since(t0);
  const auto& rec = res.trace.records;
  bool contract = true, floor = true;
  for (std::size_t k = 0; k + 1 < rec.size(); ++k) {
    const double factor = 1.0 - std::ldexp(1.0, -(rec[k].ell + 1));
    contract &= rec[k].ell >= 0 && rec[k + 1].err_l1 <= factor * rec[k].base_l1 && rec[k].base_l1 <= rec[k].err_l1;
    floor &= rec[k].min_mass >= cfg.effective_eps0();
  }
  const int iters = static_cast<int>(rec.size()) - 1;
  std::string log;
  for (const auto& r : rec) log += fmt(" %.3e", r.err_l1);
  return {res.converged() && contract && floor && iters <= 60 && secs <= 60.0,
          fmt("%d iterations, %.3f s, contract %s, mass floor %s, errors:", iters, secs, contract ? "held" : "broken",
              floor ? "held" : "broken") +
              log};
}

// ---------------------------------------------------------------- 4

Outcome superlinear_tail() {
  const auto dom = DomainSpec::box({0, 1}, {0, 1}, 256, 256);
  std::vector<double> rho(dom.node_count());
  for (std::size_t k = 0; k < rho.size(); ++k) {
    const auto x = dom.node(k);
    rho[k] = 1.0 + 0.5 * (x[0] + x[1]);
  }
  TransportProblem p(dom, DensityField::tabulated(dom, rho, 1.0), ten_sites());
  auto res = traced_newton("square lipschitz", p, ten_fee(), ten_config());
  const auto& rec = res.trace.records;
  if (!res.converged() || rec.size() < 3) return {false, fmt("status %s with %zu iterates", to_string(res.trace.status).c_str(), rec.size())};
  const double e0 = rec[rec.size() - 3].err_l1, e1 = rec[rec.size() - 2].err_l1, e2 = rec.back().err_l1;
  const double c = e1 / std::pow(e0, 1.8);
  const double order = std::log(e2 / e1) / std::log(e1 / e0);
  return {e2 <= c * std::pow(e1, 1.8), fmt("final errors %.3e %.3e %.3e, fitted C = %.3g, empirical order %.2f", e0, e1, e2, c, order)};
}

// ---------------------------------------------------------------- 5

// Essentially smooth parts keep every conjugate optimizer interior.
SplittingFee random_smooth_fee(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ScalarConvexFn> parts;
  for (int i = 0; i < n; ++i) {
    const double a = 0.05 * u(rng), b = 0.85 + 0.15 * u(rng);
    switch (i % 3) {
      case 0:
        parts.push_back(ScalarConvexFn::log_barrier({a, b}, 0.02 + 0.1 * u(rng)));
        break;
      case 1:
        parts.push_back(convexify_scalar(ScalarConvexFn::quadratic({a, b}, u(rng), 0.5 + 2.0 * u(rng)), 0.05 + 0.1 * u(rng)));
        break;
      default:
        parts.push_back(ScalarConvexFn::entropy({0.0, 1.0}, 0.1 + 0.5 * u(rng)));
    }
  }
  return SplittingFee(parts);
}

Outcome conjugate_machinery() {
  std::mt19937_64 rng(55);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double e_grad = 0.0, e_hess = 0.0, e_kernel = 0.0, e_dom = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + t % 5;
    auto fee = random_smooth_fee(rng, n);
    Eigen::VectorXd psi(n);
    for (int i = 0; i < n; ++i) psi[i] = 0.4 * (u(rng) - 0.5);
    const auto c = conjugate_solve(fee, psi);
    const auto h = fstar_hessian(fee, c);
    for (int j = 0; j < n; ++j) {
      auto up = psi, dn = psi;
      up[j] += 1e-6;
      dn[j] -= 1e-6;
      const double g = (conjugate_solve(fee, up).fstar - conjugate_solve(fee, dn).fstar) / 2e-6;
      e_grad = std::max(e_grad, std::abs(g - c.w[j]));
      up = psi;
      dn = psi;
      up[j] += 1e-5;
      dn[j] -= 1e-5;
      const Eigen::VectorXd col = (conjugate_solve(fee, up).w - conjugate_solve(fee, dn).w) / 2e-5;
      e_hess = std::max(e_hess, (col - h.col(j)).cwiseAbs().maxCoeff());
    }
    e_kernel = std::max(e_kernel, (h * Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff());
    for (int k = 0; k < n; ++k) {
      double off = 0.0;
      for (int j = 0; j < n; ++j)
        if (j != k) off += std::abs(h(k, j));
      e_dom = std::max(e_dom, std::abs(h(k, k) - off));
    }
  }
  return {e_grad <= 1e-6 && e_hess <= 1e-5 && e_kernel <= 1e-10 && e_dom <= 1e-9,
          fmt("gradient %.1e, hessian %.1e, kernel %.1e, dominance %.1e over 100 pairs", e_grad, e_hess, e_kernel, e_dom)};
}

// ---------------------------------------------------------------- 6

Outcome shuffle_guarantees() {
  std::mt19937_64 rng(66);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int good = 0;
  double worst_increase = -INFINITY, worst_margin = INFINITY;
  for (int t = 0; t < 100; ++t) {
    const int n = 3 + t % 6;
    const double tol = 0.5 / (3.0 * n) * (0.2 + 0.8 * u(rng));
    std::vector<ScalarConvexFn> parts;
    for (int i = 0; i < n; ++i)
      parts.push_back(ScalarConvexFn::quadratic({3.0 * tol, 1.0}, u(rng), 0.5 + 2.0 * u(rng)));
    SplittingFee fee(parts);
    SiteSet s;
    for (int i = 0; i < n; ++i) s.points.push_back({u(rng), u(rng)});
    TransportProblem p = [&] {
      if (t % 2 == 0) {
        const auto dom = DomainSpec::interval(0.0, 1.0, 1000);
        return TransportProblem(dom, DensityField::uniform(dom), s);
      }
      const auto dom = DomainSpec::box({0, 1}, {0, 1}, 32, 32);
      return TransportProblem(dom, DensityField::uniform(dom), s);
    }();
    Eigen::VectorXd psi(n);
    for (int i = 0; i < n; ++i) psi[i] = 1.5 * (u(rng) - 0.5);
    try {
      auto r = parameter_shuffle(p, fee, psi, tol);
      const auto g = laguerre_masses(p, r.psi).masses;
      const double margin = g.minCoeff() - tol;
      const double increase = r.err_out - r.err_in;
      worst_margin = std::min(worst_margin, margin);
      worst_increase = std::max(worst_increase, increase);
      if (margin > 0.0 && increase <= 1e-12) ++good;
    } catch (const std::exception&) {
    }
  }
  return {good == 100, fmt("%d/100 terminated with min G - tol >= %.2e and error change <= %.1e", good, worst_margin, worst_increase)};
}

// ---------------------------------------------------------------- 8

Outcome regularization_trend() {
  auto p = line({0.2, 0.5, 0.8});
  const Eigen::Vector3d a(0.3, 0.3, 0.4);
  const auto fee = point_indicator_fee(a);
  double prev = INFINITY;
  bool ok = true;
  std::string log;
  for (double eta : {0.1, 0.05, 0.025}) {
    auto r = regularize(fee, eta, cost_sup_norm(p));
    SolverConfig cfg;
    cfg.eps = r.report.eps_for_solver;
    cfg.zeta = 1e-10;
    auto res = traced_newton(fmt("regularized %.3f", eta), p, r.fee, cfg);
    const double d = (res.w - a).norm();
    ok &= res.converged() && d <= prev && d <= 0.2 * std::sqrt(eta);
    prev = d;
    log += fmt(" eta %.3f: %.4f (bound %.4f);", eta, d, 0.2 * std::sqrt(eta));
  }
  return {ok, "|w_eta - a|:" + log};
}

// ---------------------------------------------------------------- 9

Outcome stability_scaling() {
  auto p = line({0.15, 0.45, 0.8});
  SplittingFee fee({ScalarConvexFn::quadratic({0.05, 1.0}, 0.2, 1.0), ScalarConvexFn::quadratic({0.05, 1.0}, 0.5, 2.0),
                    ScalarConvexFn::quadratic({0.05, 1.0}, 0.3, 1.5)});
  auto ladder = stability_ladder(p, fee, {0.04, 0.01, 0.0025});
  std::string log;
  for (std::size_t k = 0; k < ladder.rungs.size(); ++k)
    log += fmt(" s=%g: |F1-F2| %.3e, |w1-w2| %.3e;", ladder.scales[k], ladder.rungs[k].perturbation, ladder.rungs[k].distance);
  for (double r : ladder.ratios) log += fmt(" ratio %.3f", r);
  return {ladder.consistent, log};
}

// ---------------------------------------------------------------- 7

Outcome dual_bound() {
  double worst = -INFINITY;
  std::size_t iterates = 0;
  for (const auto& run : g_runs)
    for (const auto& r : run.trace.records) {
      worst = std::max(worst, psi_bound_excess(r.psi, r.masses, run.cost_sup));
      ++iterates;
    }
  return {iterates > 0 && worst <= 1e-9, fmt("%zu iterates over %zu runs, max excess over 2|c|_inf = %.3e", iterates, g_runs.size(), worst)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"fixed point", fixed_point},
      {"oracle equivalence", oracle_equivalence},
      {"linear rate ledger", linear_rate},
      {"superlinear tail", superlinear_tail},
      {"conjugate machinery", conjugate_machinery},
      {"shuffle guarantees", shuffle_guarantees},
      {"regularization trend", regularization_trend},
      {"stability scaling", stability_scaling},
  };
  std::vector<std::pair<int, Outcome>> results;
  int idx = 0;
  for (const auto& [name, fn] : criteria) {
    ++idx;
    const int number = idx <= 6 ? idx : idx + 1;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", number, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    results.push_back({number, o});
  }
  const Outcome bound = dual_bound();
  std::printf("%s 7 dual bound invariant: %s\n", bound.pass ? "PASS" : "FAIL", bound.detail.c_str());
  bool all = bound.pass;
  for (const auto& r : results) all &= r.second.pass;
  std::printf("%s\n", all ? "all criteria passed" : "some criteria failed");
  return all ? 0 : 1;
}
