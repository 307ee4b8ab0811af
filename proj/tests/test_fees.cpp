#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "sdot/errors.hpp"
#include "sdot/fees.hpp"
#include "sdot/scalar_fn.hpp"

using namespace sdot;
using testing::half_square_fee;
using testing::vec;

namespace {

// Max of <psi, w> - F(w) over the grid w = (k/m, 1 - k/m).
std::pair<double, double> grid_conjugate_2(const SplittingFee& fee, const Eigen::VectorXd& psi, int m) {
  double best = -INFINITY, arg = 0.0;
  for (int k = 0; k <= m; ++k) {
    const double a = static_cast<double>(k) / m;
    auto f = fee_value(fee, vec({a, 1.0 - a}));
    if (!f.is_finite()) continue;
    const double v = psi[0] * a + psi[1] * (1.0 - a) - f.value();
    if (v > best) {
      best = v;
      arg = a;
    }
  }
  return {best, arg};
}

double fd_fstar(const SplittingFee& fee, Eigen::VectorXd psi, int j, double h) {
  auto up = psi, dn = psi;
  up[j] += h;
  dn[j] -= h;
  return (conjugate_solve(fee, up).fstar - conjugate_solve(fee, dn).fstar) / (2 * h);
}

}  // namespace

TEST_SUITE("fees") {

TEST_CASE("quadratic conjugate closed form and grid maximization") {
  auto fee = half_square_fee(2);
  const auto psi = vec({0.2, 0.4});
  auto c = conjugate_solve(fee, psi);
  CHECK(c.r == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(c.w[0] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(c.w[1] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(c.fstar == doctest::Approx(0.06).epsilon(1e-12));
  auto [best, arg] = grid_conjugate_2(fee, psi, 10000);
  CHECK(best == doctest::Approx(c.fstar).epsilon(1e-8));
  CHECK(arg == doctest::Approx(c.w[0]).epsilon(1e-4));
}

TEST_CASE("point indicator fee has constant gradient") {
  auto fee = point_indicator_fee(vec({0.3, 0.3, 0.4}));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int t = 0; t < 10; ++t) {
    auto c = conjugate_solve(fee, vec({n(rng), n(rng), n(rng)}));
    CHECK(c.w[0] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(c.w[1] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(c.w[2] == doctest::Approx(0.4).epsilon(1e-12));
  }
}

TEST_CASE("identical parts at a constant potential split evenly") {
  auto fee = half_square_fee(5);
  auto c = conjugate_solve(fee, Eigen::VectorXd::Constant(5, 1.7));
  for (int i = 0; i < 5; ++i) CHECK(c.w[i] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("conjugate gradient matches finite differences") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  std::vector<SplittingFee> fees{
      half_square_fee(3),
      SplittingFee({ScalarConvexFn::log_barrier({0.05, 0.9}, 0.1), ScalarConvexFn::entropy({0.0, 1.0}, 0.5),
                    ScalarConvexFn::quadratic({0.1, 0.8}, 0.3, 2.0)})};
  for (const auto& fee : fees)
    for (int t = 0; t < 20; ++t) {
      auto psi = vec({u(rng), u(rng), u(rng)});
      auto c = conjugate_solve(fee, psi);
      CHECK(c.w.sum() == doctest::Approx(1.0).epsilon(1e-12));
      for (int j = 0; j < 3; ++j) CHECK(std::abs(fd_fstar(fee, psi, j, 1e-6) - c.w[j]) <= 1e-6);
    }
}

TEST_CASE("hessian closed form, finite differences and structure") {
  auto fee = half_square_fee(2);
  const auto psi = vec({0.2, 0.4});
  auto h = fstar_hessian(fee, psi);
  CHECK(h(0, 0) == doctest::Approx(0.5));
  CHECK(h(0, 1) == doctest::Approx(-0.5));
  CHECK(h(1, 1) == doctest::Approx(0.5));
  const double step = 1e-5;
  for (int j = 0; j < 2; ++j) {
    auto up = psi, dn = psi;
    up[j] += step;
    dn[j] -= step;
    Eigen::VectorXd col = (conjugate_solve(fee, up).w - conjugate_solve(fee, dn).w) / (2 * step);
    for (int i = 0; i < 2; ++i) CHECK(std::abs(col[i] - h(i, j)) <= 1e-5);
  }

  SplittingFee mixed({ScalarConvexFn::log_barrier({0.05, 0.9}, 0.1), ScalarConvexFn::entropy({0.0, 1.0}, 0.5),
                      ScalarConvexFn::quadratic({0.0, 1.0}, 0.3, 2.0), ScalarConvexFn::log_barrier({0.0, 0.6}, 0.3)});
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (int t = 0; t < 20; ++t) {
    auto p = vec({u(rng), u(rng), u(rng), u(rng)});
    auto m = fstar_hessian(mixed, p, BoundaryPolicy::active_set);
    CHECK((m * Eigen::VectorXd::Ones(4)).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((m - m.transpose()).norm() <= 1e-12);
    for (int k = 0; k < 4; ++k) {
      double off = 0.0;
      for (int j = 0; j < 4; ++j)
        if (j != k) off += std::abs(m(k, j));
      CHECK(std::abs(m(k, k) - off) <= 1e-9);
    }
  }
}

TEST_CASE("hessian at a clamped coordinate") {
  auto fee = half_square_fee(2);
  const auto psi = vec({5.0, 0.0});
  CHECK_THROWS_AS(fstar_hessian(fee, psi), HessianUnavailable);
  auto h = fstar_hessian(fee, psi, BoundaryPolicy::active_set);
  CHECK(h.norm() <= 1e-12);
}

TEST_CASE("fee value") {
  auto fee = half_square_fee(2);
  CHECK(fee_value(fee, vec({0.5, 0.5})).value() == doctest::Approx(0.25));
  CHECK_FALSE(fee_value(fee, vec({0.5, 0.4})).is_finite());
  auto floored = half_square_fee(2, 0.2);
  CHECK_FALSE(fee_value(floored, vec({0.1, 0.9})).is_finite());
  CHECK_THROWS_AS(fee_value(fee, vec({0.5, 0.2, 0.3})), InvalidArgument);
}

TEST_CASE("assumption report for floored quadratics") {
  auto fee = half_square_fee(10, 0.02);
  auto r = check_assumptions(fee);
  CHECK(r.strict_interior);
  CHECK(r.sum_lower == doctest::Approx(0.2));
  CHECK(r.sum_upper == doctest::Approx(10.0));
  CHECK(r.strong_convexity_lb == doctest::Approx(1.0));
  CHECK_FALSE(r.essential_smoothness);
  CHECK(r.eps_max == doctest::Approx(0.02));
  CHECK(r.newton_ready);
  CHECK_FALSE(r.overall);
}

TEST_CASE("assumption report for a point fee") {
  auto r = check_assumptions(point_indicator_fee(vec({0.4, 0.6})));
  CHECK_FALSE(r.strict_interior);
  CHECK_FALSE(r.newton_ready);
  bool cited = false;
  for (const auto& f : r.failures) cited |= f.rfind("strict_interior", 0) == 0;
  CHECK(cited);
}

TEST_CASE("essentially smooth parts") {
  SplittingFee fee({ScalarConvexFn::log_barrier({0.1, 0.8}, 0.05), ScalarConvexFn::log_barrier({0.1, 0.9}, 0.05)});
  auto r = check_assumptions(fee);
  CHECK(r.essential_smoothness);
  CHECK(r.overall);
}

TEST_CASE("scalar functions") {
  auto q = ScalarConvexFn::quadratic({0.0, 1.0}, 0.25, 2.0);
  CHECK(q.value(0.75) == doctest::Approx(0.25));
  CHECK(std::isinf(q.value(1.5)));
  CHECK(q.argmax_affine(0.5) == doctest::Approx(0.5));
  CHECK(q.argmin() == doctest::Approx(0.25));
  auto t = q.transformed(3.0, 1.0);
  CHECK(t.value(0.75) == doctest::Approx(1.75));
  auto r = q.restricted({0.5, 0.9});
  CHECK(r.argmin() == doctest::Approx(0.5));
  auto tab = ScalarConvexFn::tabulated({0.0, 0.5, 1.0}, {1.0, 0.0, 2.0});
  CHECK(tab.value(0.25) == doctest::Approx(0.5));
  CHECK(tab.sampled_convexity());
  CHECK_THROWS_AS(ScalarConvexFn::tabulated({0.0, 0.5, 1.0}, {0.0, 1.0, 0.0}), InvalidArgument);
  auto e = ScalarConvexFn::entropy({0.0, 1.0}, 1.0);
  CHECK(e.argmin() == doctest::Approx(std::exp(-1.0)));
  CHECK(std::isinf(e.deriv(0.0)));
}

TEST_CASE("infeasible fee") {
  SplittingFee fee({ScalarConvexFn::quadratic({0.6, 1.0}, 0.0, 1.0), ScalarConvexFn::quadratic({0.6, 1.0}, 0.0, 1.0)});
  CHECK_FALSE(fee.feasible());
  CHECK_THROWS_AS(conjugate_solve(fee, vec({0.0, 0.0})), InfeasibleFee);
}

}
