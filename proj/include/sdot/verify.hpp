#pragma once

// Seeded property suites run by `sdot verify`.

#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdot/fees.hpp"
#include "sdot/geometry.hpp"

namespace sdot {

struct PropertyResult {
  std::string suite;
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double tolerance = 0.0;
  int instances = 0;
  std::string detail;
};

struct VerifyReport {
  std::vector<PropertyResult> results;

  bool all_pass() const;
  nlohmann::json to_json() const;
};

struct VerifyOptions {
  /// default | gradient | geometry | shuffle | oracle | regularize | all
  std::string suite = "default";
  unsigned seed = 1;
  int instances = 100;
  int oracle_sites = 2;
  int oracle_instances = 5;
  double grid_step = 1e-3;
  unsigned threads = 1;
};

VerifyReport run_verify_suites(const VerifyOptions& options);

/// Generators shared by the suites.
TransportProblem random_problem_1d(std::mt19937_64& rng, int n_sites, int resolution = 2000, bool tabulated = false);
TransportProblem random_problem_2d(std::mt19937_64& rng, int n_sites, int resolution = 32);
/// Quadratic parts 0.5 k (x - c)^2 on [floor, 1].
SplittingFee random_quadratic_fee(std::mt19937_64& rng, int n_sites, double floor);
/// Mix of quadratic, log-barrier, entropy and convexified parts whose
/// conjugate has a Hessian everywhere.
SplittingFee random_smooth_fee(std::mt19937_64& rng, int n_sites);

}  // namespace sdot
