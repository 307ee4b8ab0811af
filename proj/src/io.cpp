#include "sdot/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "sdot/errors.hpp"
#include "sdot/regularize.hpp"

namespace sdot {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const json& require(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(where + "." + key, "missing required field");
  return j.at(key);
}

double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where, "expected a number");
  return j.get<double>();
}

int as_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where, "expected an integer");
  return j.get<int>();
}

std::vector<double> as_numbers(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(as_number(j[k], where + "[" + std::to_string(k) + "]"));
  return out;
}

Interval as_interval(const json& j, const std::string& where) {
  const auto v = as_numbers(j, where);
  if (v.size() != 2) throw ConfigError(where, "expected [lo, hi]");
  return {v[0], v[1]};
}

double number_or(const json& j, const std::string& key, double fallback, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return as_number(j.at(key), where + "." + key);
}

std::string read_text(const fs::path& path, const std::string& where) {
  std::ifstream in(path);
  if (!in) throw ConfigError(where, "cannot open file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',' || ch == ' ' || ch == '\t' || ch == '\r' || ch == ';') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

bool parse_double(const std::string& s, double& v) {
  const char* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  return res.ec == std::errc() && res.ptr == end;
}

// Wraps library errors raised while building objects from a config section.
template <class Fn>
auto in_section(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(where, e.what());
  } catch (const json::exception& e) {
    throw ConfigError(where, e.what());
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------- fees

ScalarConvexFn scalar_fn_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where, "expected an object {kind, params, domain}");
  const json& kind_j = require(j, "kind", where);
  if (!kind_j.is_string()) throw ConfigError(where + ".kind", "expected a string");
  const std::string kind = kind_j.get<std::string>();
  const json params = j.contains("params") ? j.at("params") : json::object();
  if (!params.is_object()) throw ConfigError(where + ".params", "expected an object");
  const std::string pw = where + ".params";
  std::optional<Interval> domain;
  if (j.contains("domain")) domain = as_interval(j.at("domain"), where + ".domain");

  ScalarConvexFn f = in_section(where, [&]() -> ScalarConvexFn {
    auto dom = [&] {
      if (!domain) throw ConfigError(where + ".domain", "missing required field");
      return *domain;
    };
    if (kind == "quadratic")
      return ScalarConvexFn::quadratic(dom(), number_or(params, "center", 0.0, pw), number_or(params, "scale", 1.0, pw));
    if (kind == "entropy") return ScalarConvexFn::entropy(dom(), number_or(params, "scale", 1.0, pw));
    if (kind == "log_barrier") return ScalarConvexFn::log_barrier(dom(), number_or(params, "scale", 1.0, pw));
    if (kind == "indicator") return ScalarConvexFn::indicator(dom(), number_or(params, "value", 0.0, pw));
    if (kind == "tabulated") {
      auto knots = as_numbers(require(params, "knots", pw), pw + ".knots");
      auto values = as_numbers(require(params, "values", pw), pw + ".values");
      if (domain) return ScalarConvexFn::tabulated(*domain, std::move(knots), std::move(values));
      return ScalarConvexFn::tabulated(std::move(knots), std::move(values));
    }
    if (kind == "tabulated-smoothed") {
      auto vals = as_numbers(require(params, "knot_values", pw), pw + ".knot_values");
      const double width = as_number(require(params, "width", pw), pw + ".width");
      const Interval kd = params.contains("knot_domain") ? as_interval(params.at("knot_domain"), pw + ".knot_domain") : dom();
      return make_smoothed(kd, std::move(vals), width);
    }
    if (kind == "convexified") {
      const double eta = as_number(require(params, "eta", pw), pw + ".eta");
      return make_convexified(scalar_fn_from_json(require(params, "inner", pw), pw + ".inner"), eta);
    }
    throw ConfigError(where + ".kind", "unknown fee kind '" + kind +
                                           "' (expected quadratic, entropy, log_barrier, indicator, tabulated, "
                                           "tabulated-smoothed or convexified)");
  });

  return in_section(where, [&] {
    ScalarConvexFn out = f;
    if (domain && (domain->lo != out.domain().lo || domain->hi != out.domain().hi)) out = out.restricted(*domain);
    const double mult = number_or(j, "multiplier", 1.0, where);
    const double off = number_or(j, "offset", 0.0, where);
    if (mult != 1.0 || off != 0.0) out = out.transformed(mult, off);
    return out;
  });
}

SplittingFee fee_from_json(const json& j, const std::string& where) {
  const json* parts = &j;
  std::string w = where;
  if (j.is_object()) {
    parts = &require(j, "parts", where);
    w = where + ".parts";
  }
  if (!parts->is_array() || parts->empty()) throw ConfigError(w, "expected a nonempty list of fee parts");
  std::vector<ScalarConvexFn> fns;
  for (std::size_t k = 0; k < parts->size(); ++k) fns.push_back(scalar_fn_from_json((*parts)[k], w + "[" + std::to_string(k) + "]"));
  return in_section(w, [&] { return SplittingFee(std::move(fns)); });
}

json fee_to_json(const SplittingFee& fee) {
  json out = json::array();
  for (const auto& p : fee.parts()) out.push_back(p.to_json());
  return out;
}

SplittingFee load_fee(const std::string& spec_or_path) {
  const auto first = spec_or_path.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && (spec_or_path[first] == '[' || spec_or_path[first] == '{')) {
    json j;
    try {
      j = json::parse(spec_or_path);
    } catch (const json::exception& e) {
      throw ConfigError("--fee", std::string("invalid inline JSON: ") + e.what());
    }
    return fee_from_json(j, "--fee");
  }
  const json j = read_json_file(spec_or_path);
  if (j.is_object() && j.contains("fee")) return fee_from_json(j.at("fee"), "fee");
  return fee_from_json(j, "fee");
}

// ---------------------------------------------------------------- CSV

DensityTable read_density_csv(const fs::path& path) {
  const std::string where = "density file '" + path.string() + "'";
  std::istringstream in(read_text(path, where));
  std::string line;
  DensityTable t;
  bool header = false;
  while (std::getline(in, line)) {
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    if (!header) {
      double nx = 0.0, ny = 1.0;
      if (fields.size() > 2 || !parse_double(fields[0], nx) || (fields.size() == 2 && !parse_double(fields[1], ny)))
        throw ConfigError(where, "header must be 'nx' or 'nx,ny'");
      t.nx = static_cast<int>(nx);
      t.ny = static_cast<int>(ny);
      if (t.nx < 1 || t.ny < 1 || t.nx != nx || t.ny != ny) throw ConfigError(where, "header counts must be positive integers");
      header = true;
      continue;
    }
    for (const auto& f : fields) {
      double v = 0.0;
      if (!parse_double(f, v)) throw ConfigError(where, "non-numeric value '" + f + "'");
      t.values.push_back(v);
    }
  }
  if (!header) throw ConfigError(where, "empty file");
  if (t.values.size() != static_cast<std::size_t>(t.nx) * static_cast<std::size_t>(t.ny))
    throw ConfigError(where, "expected " + std::to_string(t.nx * t.ny) + " values, found " + std::to_string(t.values.size()));
  return t;
}

void write_density_csv(const fs::path& path, const DensityTable& t) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path.string(), "cannot write file");
  out << t.nx;
  if (t.ny > 1) out << ',' << t.ny;
  out << '\n';
  for (int r = 0; r < t.ny; ++r) {
    for (int c = 0; c < t.nx; ++c) {
      if (c) out << ',';
      out << format_double(t.values[static_cast<std::size_t>(r) * t.nx + c]);
    }
    out << '\n';
  }
}

std::vector<Point2> read_sites_csv(const fs::path& path) {
  const std::string where = "sites file '" + path.string() + "'";
  std::istringstream in(read_text(path, where));
  std::string line;
  std::vector<Point2> out;
  bool first = true;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto fields = split_fields(line);
    if (fields.empty()) continue;
    Point2 p{0.0, 0.0};
    bool ok = fields.size() <= 2;
    for (std::size_t k = 0; ok && k < fields.size(); ++k) ok = parse_double(fields[k], p[k]);
    if (!ok) {
      if (first) {
        first = false;
        continue;
      }
      throw ConfigError(where, "row " + std::to_string(row) + " is not one or two numbers");
    }
    first = false;
    out.push_back(p);
  }
  if (out.empty()) throw ConfigError(where, "no sites");
  return out;
}

// ---------------------------------------------------------------- problem

ProblemConfig problem_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("problem", "expected a JSON object");
  auto resolve = [&](const std::string& name) {
    const fs::path p(name);
    return p.is_absolute() ? p : base_dir / p;
  };

  const json& dj = require(j, "domain", "problem");
  const int dim = as_int(require(dj, "dim", "domain"), "domain.dim");
  if (dim != 1 && dim != 2) throw ConfigError("domain.dim", "must be 1 or 2");
  const json& bj = require(dj, "bounds", "domain");
  if (!bj.is_array() || static_cast<int>(bj.size()) != dim) throw ConfigError("domain.bounds", "expected one [lo, hi] per axis");
  std::vector<int> res;
  const json& rj = require(dj, "resolution", "domain");
  if (rj.is_number_integer()) res.assign(static_cast<std::size_t>(dim), rj.get<int>());
  else if (rj.is_array() && static_cast<int>(rj.size()) == dim)
    for (std::size_t a = 0; a < rj.size(); ++a) res.push_back(as_int(rj[a], "domain.resolution[" + std::to_string(a) + "]"));
  else throw ConfigError("domain.resolution", "expected an integer or one integer per axis");
  const Interval bx = as_interval(bj[0], "domain.bounds[0]");
  const DomainSpec domain = in_section("domain", [&] {
    return dim == 1 ? DomainSpec::interval(bx.lo, bx.hi, res[0])
                    : DomainSpec::box(bx, as_interval(bj[1], "domain.bounds[1]"), res[0], res[1]);
  });

  DensityField density = DensityField::uniform(domain);
  if (j.contains("density")) {
    const json& rho = j.at("density");
    const std::string kind = rho.is_object() && rho.contains("kind") && rho.at("kind").is_string()
                                 ? rho.at("kind").get<std::string>()
                                 : throw ConfigError("density.kind", "missing required field");
    const double alpha = number_or(rho, "holder_alpha", 1.0, "density");
    if (kind == "uniform") {
      density = in_section("density", [&] { return DensityField::uniform(domain, alpha); });
    } else if (kind == "tabulated") {
      std::vector<double> values;
      if (rho.contains("file")) {
        const DensityTable t = read_density_csv(resolve(rho.at("file").get<std::string>()));
        if (t.nx != domain.resolution[0] || t.ny != (dim == 2 ? domain.resolution[1] : 1))
          throw ConfigError("density.file", "grid size does not match domain.resolution");
        values = t.values;
      } else {
        values = as_numbers(require(rho, "values", "density"), "density.values");
      }
      density = in_section("density", [&] { return DensityField::tabulated(domain, values, alpha); });
    } else {
      throw ConfigError("density.kind", "unknown density kind '" + kind + "' (expected uniform or tabulated)");
    }
  }

  SiteSet sites;
  const json& sj = require(j, "sites", "problem");
  if (sj.is_object()) {
    sites.points = read_sites_csv(resolve(require(sj, "file", "sites").get<std::string>()));
  } else if (sj.is_array()) {
    for (std::size_t k = 0; k < sj.size(); ++k) {
      const std::string w = "sites[" + std::to_string(k) + "]";
      std::vector<double> c = sj[k].is_number() ? std::vector<double>{sj[k].get<double>()} : as_numbers(sj[k], w);
      if (static_cast<int>(c.size()) != dim) throw ConfigError(w, "expected " + std::to_string(dim) + " coordinate(s)");
      sites.points.push_back({c[0], dim == 2 ? c[1] : 0.0});
    }
  } else {
    throw ConfigError("sites", "expected a list of coordinates or {file}");
  }

  QuadraticCost cost;
  if (j.contains("cost")) cost.coefficient = number_or(j.at("cost"), "coefficient", 1.0, "cost");
  if (!(cost.coefficient > 0.0)) throw ConfigError("cost.coefficient", "must be positive");

  ProblemConfig cfg{in_section("problem", [&] { return TransportProblem(domain, density, sites, cost); }), std::nullopt,
                    json::object()};
  if (j.contains("fee")) cfg.fee = fee_from_json(j.at("fee"), "fee");
  if (j.contains("solver")) {
    if (!j.at("solver").is_object()) throw ConfigError("solver", "expected an object");
    cfg.solver = j.at("solver");
  }
  if (cfg.fee && cfg.fee->size() != cfg.problem.size())
    throw ConfigError("fee", "has " + std::to_string(cfg.fee->size()) + " parts but there are " +
                                 std::to_string(cfg.problem.size()) + " sites");
  return cfg;
}

ProblemConfig load_problem(const fs::path& path) {
  const json j = read_json_file(path);
  return problem_from_json(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

json problem_to_json(const TransportProblem& problem, const SplittingFee* fee) {
  const DomainSpec& d = problem.domain();
  json bounds = json::array(), res = json::array();
  for (int a = 0; a < d.dim; ++a) {
    bounds.push_back({d.bounds[a].lo, d.bounds[a].hi});
    res.push_back(d.resolution[a]);
  }
  json density = {{"kind", problem.density().kind() == DensityKind::uniform ? "uniform" : "tabulated"},
                  {"holder_alpha", problem.density().holder_alpha()}};
  if (problem.density().kind() == DensityKind::tabulated) density["values"] = problem.density().values();
  json sites = json::array();
  for (const auto& p : problem.sites().points) {
    if (d.dim == 1) sites.push_back({p[0]});
    else sites.push_back({p[0], p[1]});
  }
  json out = {{"domain", {{"dim", d.dim}, {"bounds", bounds}, {"resolution", res}}},
              {"density", density},
              {"sites", sites},
              {"cost", {{"coefficient", problem.cost().coefficient}}}};
  if (fee) out["fee"] = fee_to_json(*fee);
  return out;
}

SolverConfig solver_config_from_json(const json& j, SolverConfig base) {
  if (!j.is_object()) throw ConfigError("solver", "expected an object");
  for (const auto& [key, val] : j.items()) {
    const std::string w = "solver." + key;
    if (key == "zeta") base.zeta = as_number(val, w);
    else if (key == "eps") base.eps = as_number(val, w);
    else if (key == "eps0") base.eps0 = as_number(val, w);
    else if (key == "max_newton_iters") base.max_newton_iters = as_int(val, w);
    else if (key == "max_backtrack") base.max_backtrack = as_int(val, w);
    else if (key == "shuffle_bisect_tol") base.shuffle_bisect_tol = as_number(val, w);
    else throw ConfigError(w, "unknown solver option");
  }
  return base;
}

// ---------------------------------------------------------------- output

void write_trace_csv(std::ostream& os, const SolveTrace& trace) {
  os << "k,err_l1,err_l2,ell,min_mass,shuffle_steps,elapsed_ms\n";
  for (const auto& r : trace.records) {
    os << r.k << ',' << format_double(r.err_l1) << ',' << format_double(r.err_l2) << ',';
    if (r.ell >= 0) os << r.ell;
    os << ',' << format_double(r.min_mass) << ',' << r.shuffle_steps << ',' << format_double(r.elapsed_ms) << '\n';
  }
}

void write_trace_csv(const fs::path& path, const SolveTrace& trace) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path.string(), "cannot write file");
  write_trace_csv(out, trace);
}

json to_json(const AssumptionReport& r) {
  std::vector<bool> smooth = r.part_essentially_smooth;
  return {{"eps_max", r.eps_max},
          {"sum_lower", r.sum_lower},
          {"sum_upper", r.sum_upper},
          {"strict_interior", r.strict_interior},
          {"strong_convexity_lb", r.strong_convexity_lb},
          {"essential_smoothness", r.essential_smoothness},
          {"part_essentially_smooth", smooth},
          {"newton_ready", r.newton_ready},
          {"overall", r.overall},
          {"failures", r.failures}};
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j, const std::string& where) {
  const auto v = as_numbers(j, where);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(path.string(), "cannot write file");
  out << j.dump(2) << '\n';
}

json read_json_file(const fs::path& path) {
  const std::string text = read_text(path, path.string());
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(path.string(), std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace sdot
