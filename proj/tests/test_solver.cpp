#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "sdot/errors.hpp"
#include "sdot/oracle.hpp"
#include "sdot/solver.hpp"
#include "sdot/verify.hpp"

using namespace sdot;
using testing::half_square_fee;
using testing::line_problem;
using testing::vec;

TEST_SUITE("solver") {

TEST_CASE("gradient at the symmetric fixed point and a shifted potential") {
  auto p = line_problem({0.25, 0.75});
  auto fee = half_square_fee(2);
  auto e0 = phi_gradient(p, fee, vec({0.0, 0.0}));
  CHECK(e0.l1() <= 1e-14);
  auto e1 = phi_gradient(p, fee, vec({0.0, 0.1}));
  CHECK(e1.grad[0] == doctest::Approx(0.15).epsilon(1e-12));
  CHECK(e1.grad[1] == doctest::Approx(-0.15).epsilon(1e-12));
}

TEST_CASE("gradient sums to zero and matches differences of the value") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (int t = 0; t < 10; ++t) {
    auto p = random_problem_1d(rng, 3, 4000);
    auto fee = random_smooth_fee(rng, 3);
    auto psi = vec({u(rng), u(rng), u(rng)});
    auto e = phi_gradient(p, fee, psi);
    CHECK(std::abs(e.grad.sum()) <= 1e-10);
    const double h = 1e-6;
    for (int j = 0; j < 3; ++j) {
      auto up = psi, dn = psi;
      up[j] += h;
      dn[j] -= h;
      const double fd = (phi_gradient(p, fee, up).value - phi_gradient(p, fee, dn).value) / (2 * h);
      CHECK(std::abs(fd - e.grad[j]) <= 1e-6);
    }
  }
}

TEST_CASE("shuffle leaves a good potential unchanged") {
  auto p = line_problem({0.25, 0.75});
  auto fee = half_square_fee(2);
  auto r = parameter_shuffle(p, fee, vec({0.0, 0.1}), 0.05);
  CHECK(r.steps == 0);
  CHECK(r.psi[1] == 0.1);
  CHECK(r.psi[0] == 0.0);
}

TEST_CASE("shuffle lifts an empty cell into its target window") {
  auto p = line_problem({0.25, 0.75});
  auto fee = half_square_fee(2);
  auto before = laguerre_masses(p, vec({2.0, 0.0})).masses;
  CHECK(before[0] == doctest::Approx(0.0));
  auto r = parameter_shuffle(p, fee, vec({2.0, 0.0}), 0.05);
  auto g = laguerre_masses(p, r.psi).masses;
  CHECK(g[0] >= 0.1 - 1e-12);
  CHECK(g[0] <= 0.15 + 1e-12);
  CHECK(g[1] == doctest::Approx(1.0 - g[0]).epsilon(1e-14));
  CHECK(r.err_out <= r.err_in + 1e-12);
}

TEST_CASE("shuffle guarantees on random two-dimensional instances") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int t = 0; t < 10; ++t) {
    auto p = random_problem_2d(rng, 5, 32);
    auto fee = random_quadratic_fee(rng, 5, 0.05);
    Eigen::VectorXd psi(5);
    for (int i = 0; i < 5; ++i) psi[i] = u(rng);
    const double tol = 0.05 / 3;
    auto r = parameter_shuffle(p, fee, psi, tol);
    auto g = laguerre_masses(p, r.psi).masses;
    CHECK(g.minCoeff() >= tol - 1e-12);
    CHECK(r.err_out <= r.err_in + 1e-12);
  }
}

TEST_CASE("newton returns a fixed point immediately") {
  auto p = line_problem({0.25, 0.75});
  auto fee = half_square_fee(2);
  SolverConfig cfg;
  cfg.eps = 0.3;
  auto res = damped_newton(p, fee, vec({0.0, 0.0}), cfg);
  CHECK(res.converged());
  CHECK(res.trace.records.size() == 1);
  CHECK(res.psi[0] == 0.0);
  CHECK(res.psi[1] == 0.0);
}

TEST_CASE("newton on the asymmetric two-site problem") {
  auto p = line_problem({0.25, 0.85});
  auto fee = half_square_fee(2);
  SolverConfig cfg;
  cfg.zeta = 1e-10;
  cfg.eps = 0.3;
  auto res = damped_newton(p, fee, vec({0.0, 0.0}), cfg);
  REQUIRE(res.converged());
  // Fixed point of 0.55 + d / 1.2 = 0.5 - d / 2.
  const double delta = -0.05 / (1.0 / 1.2 + 0.5);
  CHECK(res.psi[1] - res.psi[0] == doctest::Approx(delta).epsilon(1e-9));
  CHECK(res.w[0] == doctest::Approx(0.5 - delta / 2).epsilon(1e-9));
  CHECK(res.w[0] == doctest::Approx(0.51875).epsilon(1e-9));
  auto bf = brute_force_minimize(p, fee, 1e-3);
  CHECK(std::abs(bf[0] - res.w[0]) <= 1e-3);
}

TEST_CASE("newton trace on a two-dimensional instance") {
  std::mt19937_64 rng(12);
  auto p = random_problem_2d(rng, 6, 48);
  auto fee = half_square_fee(6, 0.05, 0.1);
  SolverConfig cfg;
  cfg.eps = 0.05;
  auto res = damped_newton(p, fee, Eigen::VectorXd::Zero(6), cfg);
  REQUIRE(res.converged());
  const auto& rec = res.trace.records;
  for (std::size_t k = 1; k < rec.size(); ++k) CHECK(rec[k].err_l1 < rec[k - 1].err_l1);
  for (std::size_t k = 0; k + 1 < rec.size(); ++k) CHECK(rec[k].min_mass >= cfg.effective_eps0());
  const double sup = cost_sup_norm(p);
  for (const auto& r : rec) CHECK(psi_bound_excess(r.psi, r.masses, sup) <= 1e-12);
  CHECK(res.w.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("strong concavity constant of the symmetric instance") {
  auto p = line_problem({0.25, 0.75});
  auto fee = half_square_fee(2);
  CHECK(estimate_kappa(p, fee, vec({0.0, 0.0}), {JacobianMethod::exact_1d}) == doctest::Approx(3.0).epsilon(1e-9));
  std::mt19937_64 rng(2);
  for (int t = 0; t < 5; ++t) {
    auto q = random_problem_1d(rng, 4);
    auto f = random_smooth_fee(rng, 4);
    SolverConfig cfg;
    cfg.eps = solver_eps_for(f);
    auto res = damped_newton(q, f, Eigen::VectorXd::Zero(4), cfg);
    if (res.converged()) CHECK(estimate_kappa(q, f, res.psi) > 0.0);
  }
}

TEST_CASE("linear algebra on the mean-zero subspace") {
  Eigen::MatrixXd h(3, 3);
  h << 2, -1, -1, -1, 2, -1, -1, -1, 2;
  auto ev = mean_zero_eigenvalues(h);
  CHECK(ev.size() == 2);
  CHECK(ev.minCoeff() == doctest::Approx(3.0));
  auto x = solve_on_mean_zero(h, vec({1.0, -1.0, 0.0}));
  CHECK(std::abs(x.sum()) <= 1e-12);
  CHECK((h * x - vec({1.0, -1.0, 0.0})).norm() <= 1e-12);
}

TEST_CASE("configuration validation") {
  SolverConfig cfg;
  cfg.zeta = 0.0;
  CHECK_THROWS_AS(cfg.validate(2), InvalidArgument);
  cfg = {};
  cfg.eps = 0.6;
  CHECK_THROWS_AS(cfg.validate(2), InvalidArgument);
  cfg = {};
  cfg.eps0 = 0.1;
  CHECK_THROWS_AS(cfg.validate(2), InvalidArgument);
  cfg = {};
  CHECK_NOTHROW(cfg.validate(10));
}

}
