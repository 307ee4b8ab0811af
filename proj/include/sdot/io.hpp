#pragma once

// Problem configuration (JSON), density and site tables (CSV), fee specs,
// traces and result files.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdot/fees.hpp"
#include "sdot/geometry.hpp"
#include "sdot/solver.hpp"

namespace sdot {

struct ProblemConfig {
  TransportProblem problem;
  std::optional<SplittingFee> fee;
  nlohmann::json solver = nlohmann::json::object();
};

/// Schema:
///   domain:  {dim, bounds: [[lo, hi], ...], resolution: [n, ...]}
///   density: {kind: "uniform"} | {kind: "tabulated", values: [...] | file: "rho.csv"}, optional holder_alpha
///   sites:   [[x] or [x, y], ...] | {file: "sites.csv"}
///   cost:    {coefficient}               (optional, default 1)
///   fee:     [fee part, ...]             (optional)
///   solver:  {zeta, eps, eps0, max_newton_iters, max_backtrack}   (optional)
/// Relative file names resolve against `base_dir`.
ProblemConfig problem_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
ProblemConfig load_problem(const std::filesystem::path& path);
nlohmann::json problem_to_json(const TransportProblem& problem, const SplittingFee* fee = nullptr);

/// Fee part: {kind, params, domain: [a, b], multiplier?, offset?}.
ScalarConvexFn scalar_fn_from_json(const nlohmann::json& j, const std::string& where = "fee");
/// Accepts a list of parts or {"parts": [...]}.
SplittingFee fee_from_json(const nlohmann::json& j, const std::string& where = "fee");
nlohmann::json fee_to_json(const SplittingFee& fee);
/// Inline JSON when the text starts with '[' or '{', otherwise a file path.
SplittingFee load_fee(const std::string& spec_or_path);

struct DensityTable {
  int nx = 0;
  int ny = 1;
  std::vector<double> values;  ///< row-major, x fastest
};

/// Header row "nx[,ny]" then the values in any line layout.
DensityTable read_density_csv(const std::filesystem::path& path);
void write_density_csv(const std::filesystem::path& path, const DensityTable& table);
/// One site per row; a non-numeric first row is skipped as a header.
std::vector<Point2> read_sites_csv(const std::filesystem::path& path);

/// Applies {zeta, eps, eps0, max_newton_iters, max_backtrack} on top of `base`.
SolverConfig solver_config_from_json(const nlohmann::json& j, SolverConfig base = {});

void write_trace_csv(std::ostream& os, const SolveTrace& trace);
void write_trace_csv(const std::filesystem::path& path, const SolveTrace& trace);

nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& j, const std::string& where);

/// Pretty-printed with a trailing newline; identical input gives identical bytes.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

nlohmann::json to_json(const AssumptionReport& report);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace sdot
