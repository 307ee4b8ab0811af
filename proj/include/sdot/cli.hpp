#pragma once

// Command-line front end: solve, regularize, verify, oracle-compare and
// stability.
//
// Exit codes: 0 success, 1 malformed input or runtime error, 2 the fee fails
// the solver's assumptions, 3 the solver or a checked property failed. Every
// non-zero exit writes a one-line JSON diagnostic to stderr (and to
// diagnostic.json in the output directory when one is given).

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sdot {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitAssumptions = 2, kExitSolver = 3 };

struct RunConfig {
  std::string problem;
  std::string fee;  ///< inline JSON or path; overrides the problem's fee
  std::optional<double> zeta, eps, eps0;
  double eta = 0.05;
  double grid_step = 1e-3;
  bool auto_regularize = false;
  unsigned seed = 1;
  unsigned threads = 0;  ///< 0 = available cores
  std::string out = ".";
  std::optional<double> cost_sup;
  std::string suite = "default";
  int n_sites = 2;
  std::vector<double> scales{0.04, 0.01, 0.0025};
};

int run_solve(const RunConfig& config, std::ostream& out, std::ostream& err);
int run_regularize(const RunConfig& config, std::ostream& out, std::ostream& err);
int run_verify(const RunConfig& config, std::ostream& out, std::ostream& err);
int run_oracle_compare(const RunConfig& config, std::ostream& out, std::ostream& err);
int run_stability(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a subcommand.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sdot
