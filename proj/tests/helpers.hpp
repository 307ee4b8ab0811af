#pragma once

#include <cmath>
#include <vector>

#include "sdot/fees.hpp"
#include "sdot/geometry.hpp"

namespace testing {

inline sdot::TransportProblem line_problem(std::vector<double> ys, int resolution = 1000, double coefficient = 1.0) {
  const auto dom = sdot::DomainSpec::interval(0.0, 1.0, resolution);
  sdot::SiteSet sites;
  for (double y : ys) sites.points.push_back({y, 0.0});
  return sdot::TransportProblem(dom, sdot::DensityField::uniform(dom), sites, sdot::QuadraticCost{coefficient});
}

inline sdot::TransportProblem square_problem(std::vector<sdot::Point2> pts, int resolution = 64, double coefficient = 1.0) {
  const auto dom = sdot::DomainSpec::box({0.0, 1.0}, {0.0, 1.0}, resolution, resolution);
  return sdot::TransportProblem(dom, sdot::DensityField::uniform(dom), sdot::SiteSet{std::move(pts)},
                                sdot::QuadraticCost{coefficient});
}

inline sdot::SplittingFee half_square_fee(int n, double lo = 0.0, double center = 0.0) {
  std::vector<sdot::ScalarConvexFn> parts(static_cast<std::size_t>(n), sdot::ScalarConvexFn::quadratic({lo, 1.0}, center, 1.0));
  return sdot::SplittingFee(parts);
}

inline Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

}  // namespace testing
