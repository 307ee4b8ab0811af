#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "sdot/errors.hpp"
#include "sdot/geometry.hpp"
#include "sdot/polygon.hpp"

using namespace sdot;
using testing::line_problem;
using testing::square_problem;
using testing::vec;

namespace {

// Midpoint quadrature of a 1-D integrand on [0,1].
template <class F>
double midpoint_integral(F f, int n = 200000) {
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += f((k + 0.5) / n);
  return s / n;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("single site covers the whole domain") {
  auto p = line_problem({0.3});
  for (double s : {-5.0, 0.0, 7.5}) {
    auto d = laguerre_masses(p, vec({s}));
    CHECK(d.masses[0] == doctest::Approx(1.0).epsilon(1e-15));
  }
  auto q = square_problem({{0.2, 0.7}});
  CHECK(laguerre_masses(q, vec({1.0})).masses[0] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("symmetric two-site masses") {
  auto p = line_problem({0.25, 0.75});
  auto d = laguerre_masses(p, vec({0.0, 0.0}));
  CHECK(d.masses[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(d.masses[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("shifted breakpoint agrees with fine grid quadrature") {
  auto p = line_problem({0.25, 0.75});
  auto d = laguerre_masses(p, vec({0.0, 0.1}));
  CHECK(d.intervals[0].hi == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(d.masses[0] == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(d.masses[1] == doctest::Approx(0.4).epsilon(1e-14));

  auto fine = line_problem({0.25, 0.75}, 100000);
  auto g = laguerre_masses(fine, vec({0.0, 0.1}), {MassBackend::grid});
  CHECK(std::abs(g.masses[0] - 0.6) <= 2e-5);
  CHECK(std::abs(g.masses[1] - 0.4) <= 2e-5);
}

TEST_CASE("jacobian matches central differences of the masses") {
  auto p = line_problem({0.25, 0.75});
  const auto psi = vec({0.0, 0.0});
  auto dg = laguerre_jacobian(p, psi, {JacobianMethod::exact_1d});
  const double h = 1e-6;
  for (int j = 0; j < 2; ++j) {
    auto up = psi, dn = psi;
    up[j] += h;
    dn[j] -= h;
    Eigen::VectorXd col = (laguerre_masses(p, up).masses - laguerre_masses(p, dn).masses) / (2 * h);
    for (int i = 0; i < 2; ++i) CHECK(dg(i, j) == doctest::Approx(col[i]).epsilon(1e-6));
  }
  CHECK(dg(0, 0) == doctest::Approx(-1.0));
  CHECK(dg(0, 1) == doctest::Approx(1.0));
  auto fd = laguerre_jacobian(p, psi);
  CHECK((fd - dg).norm() <= 1e-6);
}

TEST_CASE("jacobian kernel and symmetry on random instances") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0), s(-0.05, 0.05);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Point2> pts;
    for (int i = 0; i < 5; ++i) pts.push_back({u(rng), u(rng)});
    auto p = square_problem(pts, 64);
    Eigen::VectorXd psi(5);
    for (int i = 0; i < 5; ++i) psi[i] = s(rng);
    auto dg = laguerre_jacobian(p, psi);
    CHECK((dg * Eigen::VectorXd::Ones(5)).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((dg - dg.transpose()).norm() <= 1e-6 * dg.norm() + 1e-12);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        if (i != j) CHECK(dg(i, j) >= -1e-9);
  }
}

TEST_CASE("jacobian errors") {
  auto p = line_problem({0.25, 0.75});
  JacobianOptions opts;
  opts.mass_floor = 0.1;
  CHECK_THROWS_AS(laguerre_jacobian(p, vec({0.0, 5.0}), opts), ConditioningError);
  auto q = square_problem({{0.2, 0.2}, {0.8, 0.8}});
  CHECK_THROWS_AS(laguerre_jacobian(q, vec({0.0, 0.0}), {JacobianMethod::exact_1d}), InvalidArgument);
  CHECK_THROWS_AS(laguerre_masses(p, vec({0.0})), InvalidArgument);
  CHECK_THROWS_AS(laguerre_masses(p, vec({0.0, NAN})), InvalidArgument);
}

TEST_CASE("transport cost of one and two sites") {
  auto one = line_problem({0.5}, 1000, 0.5);
  const double want1 = midpoint_integral([](double x) { return 0.5 * (x - 0.5) * (x - 0.5); });
  CHECK(transport_summary(one, vec({0.0})).cost == doctest::Approx(want1).epsilon(1e-9));
  CHECK(want1 == doctest::Approx(1.0 / 24).epsilon(1e-9));

  auto two = line_problem({0.25, 0.75}, 1000, 0.5);
  const double want2 = midpoint_integral([](double x) {
    const double y = x < 0.5 ? 0.25 : 0.75;
    return 0.5 * (x - y) * (x - y);
  });
  auto s = transport_summary(two, vec({0.0, 0.0}));
  CHECK(s.cost == doctest::Approx(want2).epsilon(1e-9));
  CHECK(s.cost == doctest::Approx(1.0 / 96).epsilon(1e-12));
  CHECK(s.weights.sum() == doctest::Approx(1.0));
}

TEST_CASE("two-dimensional transport cost matches grid quadrature") {
  auto p = square_problem({{0.2, 0.3}, {0.7, 0.6}, {0.4, 0.9}}, 512);
  const auto psi = vec({0.0, 0.02, -0.01});
  auto exact = transport_summary(p, psi);
  auto grid = transport_summary(p, psi, {MassBackend::grid});
  CHECK(std::abs(exact.cost - grid.cost) <= 1e-4);
  CHECK((exact.weights - grid.weights).lpNorm<Eigen::Infinity>() <= 1e-2);
}

TEST_CASE("cost sup norm") {
  const auto dom = DomainSpec::box({0, 1}, {0, 1}, 8, 8);
  TransportProblem sq(dom, DensityField::uniform(dom), SiteSet{{{0.0, 0.0}}}, QuadraticCost{0.5});
  CHECK(cost_sup_norm(sq) == doctest::Approx(1.0));
  CHECK(cost_sup_norm(line_problem({0.5}, 100, 0.5)) == doctest::Approx(0.125));
}

TEST_CASE("masses sum to one and respond monotonically") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0), s(-0.3, 0.3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> ys;
    for (int i = 0; i < 4; ++i) ys.push_back(u(rng));
    auto p = line_problem(ys);
    Eigen::VectorXd psi(4);
    for (int i = 0; i < 4; ++i) psi[i] = s(rng);
    auto m = laguerre_masses(p, psi).masses;
    CHECK(m.sum() == doctest::Approx(1.0).epsilon(1e-12));
    auto shifted = laguerre_masses(p, (psi.array() + 0.37).matrix()).masses;
    CHECK((shifted - m).cwiseAbs().maxCoeff() <= 1e-12);
    auto up = psi;
    up[1] += 0.05;
    auto m2 = laguerre_masses(p, up).masses;
    CHECK(m2[1] <= m[1] + 1e-14);
    for (int i = 0; i < 4; ++i)
      if (i != 1) CHECK(m2[i] >= m[i] - 1e-14);
  }
}

TEST_CASE("exact and grid backends agree on tabulated densities") {
  const auto dom = DomainSpec::interval(0.0, 1.0, 400);
  std::vector<double> rho(400);
  for (int k = 0; k < 400; ++k) rho[k] = 1.0 + 0.5 * std::sin(6.0 * (k + 0.5) / 400);
  const double hmax = *std::max_element(rho.begin(), rho.end());
  TransportProblem p(dom, DensityField::tabulated(dom, rho), SiteSet{{{0.1, 0}, {0.45, 0}, {0.9, 0}}});
  const auto psi = vec({0.01, 0.0, -0.02});
  auto e = laguerre_masses(p, psi).masses;
  auto g = laguerre_masses(p, psi, {MassBackend::grid}).masses;
  CHECK((e - g).cwiseAbs().maxCoeff() <= 2 * dom.spacing(0) * hmax);
  CHECK(p.cdf_at(p.quantile(0.3)) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("dual bound holds at random potentials with positive masses") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0), s(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Point2> pts;
    for (int i = 0; i < 4; ++i) pts.push_back({u(rng), u(rng)});
    auto p = square_problem(pts, 32);
    Eigen::VectorXd psi(4);
    for (int i = 0; i < 4; ++i) psi[i] = s(rng);
    auto m = laguerre_masses(p, psi).masses;
    CHECK(psi_bound_excess(psi, m, cost_sup_norm(p)) <= 1e-12);
  }
}

TEST_CASE("polygon clipping and moments") {
  auto r = rectangle(0, 2, 0, 1);
  CHECK(polygon_area(r) == doctest::Approx(2.0));
  auto half = clip_halfplane(r, {1.0, 0.0}, 1.0);
  CHECK(polygon_area(half) == doctest::Approx(1.0));
  auto tri = clip_halfplane(rectangle(0, 1, 0, 1), {1.0, 1.0}, 1.0);
  auto m = polygon_moments(tri);
  CHECK(m.area == doctest::Approx(0.5));
  CHECK(m.mx == doctest::Approx(1.0 / 6));
  CHECK(m.mxx == doctest::Approx(1.0 / 12));
  auto rm = rectangle_moments(0, 2, 0, 1);
  auto pm = polygon_moments(r);
  CHECK(rm.mxx == doctest::Approx(pm.mxx));
  CHECK(rm.myy == doctest::Approx(1.0 / 3 * 2));
  CHECK(clip_slab(r, 0, 0.5, 0.75).size() >= 4);
  CHECK(polygon_area(clip_slab(r, 0, 0.5, 0.75)) == doctest::Approx(0.25));
}

TEST_CASE("domain validation") {
  CHECK_THROWS_AS(DomainSpec::interval(1.0, 0.0, 10).validate(), InvalidArgument);
  CHECK_THROWS_AS(DomainSpec::interval(0.0, 1.0, 1).validate(), InvalidArgument);
}

}
