#include "sdot/cli.hpp"

#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"

#include "sdot/errors.hpp"
#include "sdot/io.hpp"
#include "sdot/oracle.hpp"
#include "sdot/regularize.hpp"
#include "sdot/solver.hpp"
#include "sdot/verify.hpp"

namespace sdot {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Raised inside a command to leave with a specific exit code and diagnostic.
struct Exit {
  int code;
  json diagnostic;
};

[[noreturn]] void fail(int code, const std::string& kind, const std::string& message, json extra = json::object()) {
  extra["exit_code"] = code;
  extra["error"] = kind;
  extra["message"] = message;
  throw Exit{code, std::move(extra)};
}

fs::path out_dir(const RunConfig& c) {
  fs::path p(c.out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw ConfigError("--out", "cannot create directory '" + c.out + "': " + ec.message());
  return p;
}

unsigned thread_count(const RunConfig& c) {
  return c.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : c.threads;
}

ProblemConfig require_problem(const RunConfig& c) {
  if (c.problem.empty()) throw ConfigError("--problem", "a problem file is required");
  return load_problem(c.problem);
}

SplittingFee select_fee(const RunConfig& c, const ProblemConfig& pc) {
  SplittingFee fee;
  if (!c.fee.empty()) fee = load_fee(c.fee);
  else if (pc.fee) fee = *pc.fee;
  else throw ConfigError("fee", "no fee given: pass --fee or add a 'fee' list to the problem");
  if (fee.size() != pc.problem.size())
    throw ConfigError("fee", "has " + std::to_string(fee.size()) + " parts but the problem has " +
                                 std::to_string(pc.problem.size()) + " sites");
  if (!fee.feasible()) fail(kExitAssumptions, "infeasible_fee", "sum of lower domain ends exceeds 1 or upper ends fall short");
  return fee;
}

SolverConfig solver_config(const RunConfig& c, const ProblemConfig& pc, const SplittingFee& fee) {
  SolverConfig sc;
  sc.eps = solver_eps_for(fee);
  sc = solver_config_from_json(pc.solver, sc);
  if (c.zeta) sc.zeta = *c.zeta;
  if (c.eps) sc.eps = *c.eps;
  if (c.eps0) sc.eps0 = *c.eps0;
  sc.jacobian.mass.threads = thread_count(c);
  try {
    sc.validate(fee.size());
  } catch (const InvalidArgument& e) {
    throw ConfigError("solver", e.what());
  }
  return sc;
}

template <class Fn>
int guarded(const RunConfig& c, std::ostream& err, Fn&& fn) {
  json diag;
  int code = kExitOk;
  try {
    return fn();
  } catch (const Exit& e) {
    code = e.code;
    diag = e.diagnostic;
  } catch (const ConfigError& e) {
    code = kExitConfig;
    diag = {{"exit_code", code}, {"error", "config"}, {"field", e.field()}, {"message", e.what()}};
  } catch (const std::exception& e) {
    code = kExitConfig;
    diag = {{"exit_code", code}, {"error", "runtime"}, {"message", e.what()}};
  }
  err << diag.dump() << '\n';
  if (!c.out.empty() && c.out != ".") {
    std::error_code ec;
    fs::create_directories(c.out, ec);
    if (!ec) {
      try {
        write_json_file(fs::path(c.out) / "diagnostic.json", diag);
      } catch (const std::exception&) {
      }
    }
  }
  return code;
}

}  // namespace

// ---------------------------------------------------------------- solve

int run_solve(const RunConfig& c, std::ostream& out, std::ostream& err) {
  return guarded(c, err, [&] {
    const ProblemConfig pc = require_problem(c);
    SplittingFee fee = select_fee(c, pc);
    AssumptionReport rep = check_assumptions(fee);
    json result;
    if (!rep.newton_ready) {
      if (!c.auto_regularize)
        fail(kExitAssumptions, "assumptions", "the fee fails the solver's assumptions; pass --auto-regularize",
             {{"assumptions", to_json(rep)}});
      RegularizedFee r = regularize(fee, c.eta, cost_sup_norm(pc.problem));
      fee = std::move(r.fee);
      result["regularization"] = to_json(r.report);
      rep = check_assumptions(fee);
      if (!rep.newton_ready)
        fail(kExitAssumptions, "assumptions", "regularized fee still fails the assumptions", {{"assumptions", to_json(rep)}});
    }
    const SolverConfig sc = solver_config(c, pc, fee);
    const NewtonResult nr = damped_newton(pc.problem, fee, DualVector::Zero(static_cast<Eigen::Index>(fee.size())), sc);
    const fs::path dir = out_dir(c);
    write_trace_csv(dir / "trace.csv", nr.trace);

    const ExtendedReal fv = fee_value(fee, nr.w);
    result["status"] = to_string(nr.trace.status);
    result["iterations"] = static_cast<int>(nr.trace.records.size()) - 1;
    result["psi"] = vector_to_json(nr.psi);
    result["w"] = vector_to_json(nr.w);
    result["masses"] = vector_to_json(nr.final_eval.diagram.masses);
    result["transport_cost"] = nr.final_eval.diagram.transport_cost;
    result["fee_value"] = fv.is_finite() ? json(fv.value()) : json("inf");
    result["grad_l1"] = nr.final_eval.l1();
    result["grad_l2"] = nr.final_eval.l2();
    result["solver"] = {{"zeta", sc.zeta}, {"eps", sc.eps}, {"eps0", sc.effective_eps0()}, {"max_backtrack", sc.max_backtrack}};
    result["assumptions"] = to_json(rep);
    write_json_file(dir / "result.json", result);
    out << "status " << to_string(nr.trace.status) << " after " << result["iterations"].get<int>()
        << " iterations, ||grad||_2 = " << format_double(nr.final_eval.l2()) << '\n';
    if (!nr.converged())
      fail(kExitSolver, "solver", nr.trace.message, {{"status", to_string(nr.trace.status)}, {"psi", vector_to_json(nr.psi)}});
    return int{kExitOk};
  });
}

// ---------------------------------------------------------------- regularize

int run_regularize(const RunConfig& c, std::ostream& out, std::ostream& err) {
  return guarded(c, err, [&] {
    SplittingFee fee;
    double cost_sup = 0.0;
    if (!c.problem.empty()) {
      const ProblemConfig pc = load_problem(c.problem);
      fee = select_fee(c, pc);
      cost_sup = cost_sup_norm(pc.problem);
    } else {
      if (c.fee.empty()) throw ConfigError("--fee", "pass --fee or --problem");
      fee = load_fee(c.fee);
      if (!c.cost_sup) throw ConfigError("--cost-sup", "required without --problem");
    }
    if (c.cost_sup) cost_sup = *c.cost_sup;
    if (!(c.eta > 0.0)) throw ConfigError("--eta", "must be positive");
    const RegularizedFee r = regularize(fee, c.eta, cost_sup);
    const fs::path dir = out_dir(c);
    write_json_file(dir / "fee.json", fee_to_json(r.fee));
    json rep = to_json(r.report);
    rep["assumptions"] = to_json(check_assumptions(r.fee));
    write_json_file(dir / "regularization.json", rep);
    out << "regularized " << r.fee.size() << " parts, eps_for_solver = " << format_double(r.report.eps_for_solver) << '\n';
    return int{kExitOk};
  });
}

// ---------------------------------------------------------------- verify

int run_verify(const RunConfig& c, std::ostream& out, std::ostream& err) {
  return guarded(c, err, [&] {
    VerifyOptions vo;
    vo.suite = c.suite;
    vo.seed = c.seed;
    vo.oracle_sites = c.n_sites;
    vo.grid_step = c.grid_step;
    vo.threads = thread_count(c);
    VerifyReport rep;
    try {
      rep = run_verify_suites(vo);
    } catch (const InvalidArgument& e) {
      throw ConfigError("--suite", e.what());
    }
    const fs::path dir = out_dir(c);
    const json j = rep.to_json();
    write_json_file(dir / "verify.json", j);
    for (const auto& r : rep.results)
      out << (r.pass ? "PASS " : "FAIL ") << r.suite << '/' << r.name << " measured " << format_double(r.measured)
          << " tolerance " << format_double(r.tolerance) << '\n';
    if (!rep.all_pass()) {
      json failed = json::array();
      for (const auto& r : rep.results)
        if (!r.pass) failed.push_back(r.suite + "/" + r.name);
      fail(kExitSolver, "property", "some properties failed", {{"failed", failed}});
    }
    return int{kExitOk};
  });
}

// ---------------------------------------------------------------- oracle-compare

int run_oracle_compare(const RunConfig& c, std::ostream& out, std::ostream& err) {
  return guarded(c, err, [&] {
    const ProblemConfig pc = require_problem(c);
    const SplittingFee fee = select_fee(c, pc);
    if (pc.problem.dim() != 1 || pc.problem.size() > 4)
      throw ConfigError("--problem", "oracle-compare needs a 1-D problem with at most 4 sites");
    const AssumptionReport rep = check_assumptions(fee);
    if (!rep.newton_ready)
      fail(kExitAssumptions, "assumptions", "the fee fails the solver's assumptions", {{"assumptions", to_json(rep)}});
    SolverConfig sc = solver_config(c, pc, fee);
    if (!c.zeta) sc.zeta = 1e-11;
    const NewtonResult nr = damped_newton(pc.problem, fee, DualVector::Zero(static_cast<Eigen::Index>(fee.size())), sc);
    if (!nr.converged()) fail(kExitSolver, "solver", nr.trace.message, {{"status", to_string(nr.trace.status)}});
    const WeightVector bf = brute_force_minimize(pc.problem, fee, c.grid_step);
    const double dist = (nr.w - bf).cwiseAbs().maxCoeff();
    const bool pass = dist <= 2.0 * c.grid_step;
    json j = {{"newton_w", vector_to_json(nr.w)},
              {"brute_force_w", vector_to_json(bf)},
              {"grid_step", c.grid_step},
              {"max_abs_difference", dist},
              {"tolerance", 2.0 * c.grid_step},
              {"newton_objective", primal_objective(pc.problem, fee, nr.w).value()},
              {"brute_force_objective", primal_objective(pc.problem, fee, bf).value()},
              {"pass", pass}};
    write_json_file(out_dir(c) / "oracle.json", j);
    out << (pass ? "PASS" : "FAIL") << " max |w_newton - w_grid| = " << format_double(dist) << '\n';
    if (!pass) fail(kExitSolver, "property", "Newton and brute-force weights differ by more than 2 grid steps", j);
    return int{kExitOk};
  });
}

// ---------------------------------------------------------------- stability

int run_stability(const RunConfig& c, std::ostream& out, std::ostream& err) {
  return guarded(c, err, [&] {
    const ProblemConfig pc = require_problem(c);
    const SplittingFee fee = select_fee(c, pc);
    StabilityOptions so;
    so.grid_step = c.grid_step;
    so.seed = c.seed;
    std::optional<SolverConfig> sc;
    if (check_assumptions(fee).newton_ready) {
      sc = solver_config(c, pc, fee);
      if (!c.zeta) sc->zeta = 1e-11;
      so.config = &*sc;
    }
    const LadderReport lr = stability_ladder(pc.problem, fee, c.scales, so);
    const json j = to_json(lr);
    write_json_file(out_dir(c) / "stability.json", j);
    for (std::size_t k = 0; k < lr.rungs.size(); ++k)
      out << "s = " << format_double(lr.scales[k]) << " perturbation " << format_double(lr.rungs[k].perturbation)
          << " distance " << format_double(lr.rungs[k].distance) << '\n';
    out << (lr.consistent ? "PASS" : "FAIL") << " square-root scaling within a factor of 2\n";
    if (!lr.consistent) fail(kExitSolver, "property", "distance ratios exceed the square-root law by more than 2", j);
    return int{kExitOk};
  });
}

// ---------------------------------------------------------------- dispatch

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semi-discrete optimal transport with storage fees"};
  app.require_subcommand(1);
  RunConfig cfg;
  double zeta = 0.0, eps = 0.0, eps0 = 0.0, cost_sup = 0.0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--problem", cfg.problem, "Problem JSON file");
    sub->add_option("--fee", cfg.fee, "Fee spec: inline JSON or a JSON file");
    sub->add_option("--zeta", zeta, "Stopping tolerance on ||grad Phi||_2");
    sub->add_option("--eps", eps, "Lower bound on grad F*");
    sub->add_option("--eps0", eps0, "Cell-mass floor (default eps/6)");
    sub->add_option("--eta", cfg.eta, "Regularization parameter");
    sub->add_option("--grid-step", cfg.grid_step, "Brute-force simplex grid step");
    sub->add_flag("--auto-regularize", cfg.auto_regularize, "Regularize fees that fail the assumptions");
    sub->add_option("--seed", cfg.seed, "Seed for generated instances");
    sub->add_option("--threads", cfg.threads, "Worker threads (0 = all cores)");
    sub->add_option("--out", cfg.out, "Output directory");
  };
  CLI::App* solve = app.add_subcommand("solve", "Run the damped Newton solver");
  CLI::App* reg = app.add_subcommand("regularize", "Regularize a fee");
  CLI::App* verify = app.add_subcommand("verify", "Run seeded property suites");
  CLI::App* oracle = app.add_subcommand("oracle-compare", "Compare Newton with brute force");
  CLI::App* stab = app.add_subcommand("stability", "Fee-scaling stability ladder");
  for (CLI::App* s : {solve, reg, verify, oracle, stab}) common(s);
  reg->add_option("--cost-sup", cost_sup, "Sup-norm of the cost when no problem is given");
  verify->add_option("--suite", cfg.suite, "default | gradient | geometry | shuffle | oracle | regularize | all");
  verify->add_option("--n-sites", cfg.n_sites, "Number of sites in the oracle suite");
  stab->add_option("--scales", cfg.scales, "Fee scalings s (fee2 = (1 + s) fee1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    const json diag = {{"exit_code", int{kExitConfig}}, {"error", "config"}, {"message", e.what()}};
    err << diag.dump() << '\n';
    return kExitConfig;
  }
  auto given = [](CLI::App* sub, const char* name) { return sub->count(name) > 0; };
  CLI::App* active = app.get_subcommands().front();
  if (given(active, "--zeta")) cfg.zeta = zeta;
  if (given(active, "--eps")) cfg.eps = eps;
  if (given(active, "--eps0")) cfg.eps0 = eps0;
  if (active == reg && given(active, "--cost-sup")) cfg.cost_sup = cost_sup;

  if (active == solve) return run_solve(cfg, out, err);
  if (active == reg) return run_regularize(cfg, out, err);
  if (active == verify) return run_verify(cfg, out, err);
  if (active == oracle) return run_oracle_compare(cfg, out, err);
  return run_stability(cfg, out, err);
}

}  // namespace sdot
