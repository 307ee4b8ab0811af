#include "sdot/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "sdot/errors.hpp"

namespace sdot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> sorted_sites_1d(const TransportProblem& problem) {
  std::vector<int> order(problem.size());
  std::iota(order.begin(), order.end(), 0);
  const auto& pts = problem.sites().points;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return pts[a][0] < pts[b][0]; });
  return order;
}

void check_weights(const WeightVector& w, std::size_t n) {
  if (static_cast<std::size_t>(w.size()) != n) throw InvalidArgument("kantorovich_cost: weight vector has wrong length");
  if (!w.allFinite() || w.minCoeff() < -1e-12 || std::abs(w.sum() - 1.0) > 1e-9)
    throw InvalidArgument("kantorovich_cost: weights must lie in the simplex");
}

double rearrangement_cost(const TransportProblem& problem, const WeightVector& w) {
  const auto order = sorted_sites_1d(problem);
  const auto& pts = problem.sites().points;
  double cum = 0.0, total = 0.0;
  double left = problem.domain().bounds[0].lo;
  for (std::size_t k = 0; k < order.size(); ++k) {
    cum += std::max(0.0, w[order[k]]);
    const double right = k + 1 == order.size() ? problem.domain().bounds[0].hi : problem.quantile(cum);
    total += interval_cost_1d(problem, left, right, pts[order[k]][0]);
    left = right;
  }
  return total;
}

double indicator_newton_cost(const TransportProblem& problem, const WeightVector& w, const OracleOptions& options) {
  if (w.minCoeff() <= 0.0) throw InvalidArgument("kantorovich_cost: the indicator-fee route needs every w^i > 0");
  const SplittingFee fee = point_indicator_fee(w);
  SolverConfig cfg;
  cfg.zeta = options.zeta;
  cfg.eps = std::min(w.minCoeff(), 0.99 / static_cast<double>(w.size()));
  cfg.jacobian.mass = options.mass;
  cfg.max_newton_iters = 200;
  const NewtonResult res = damped_newton(problem, fee, DualVector::Zero(w.size()), cfg);
  if (!res.converged()) throw ConditioningError("kantorovich_cost: indicator-fee solve failed: " + res.trace.message);
  return res.final_eval.diagram.transport_cost;
}

}  // namespace

double kantorovich_cost(const TransportProblem& problem, const WeightVector& w, const OracleOptions& options) {
  check_weights(w, problem.size());
  CostRoute route = options.route;
  if (route == CostRoute::automatic) route = problem.dim() == 1 ? CostRoute::rearrangement : CostRoute::indicator_newton;
  if (route == CostRoute::rearrangement) {
    if (problem.dim() != 1) throw InvalidArgument("kantorovich_cost: rearrangement needs a 1-D problem");
    return rearrangement_cost(problem, w);
  }
  return indicator_newton_cost(problem, w, options);
}

ExtendedReal primal_objective(const TransportProblem& problem, const SplittingFee& fee, const WeightVector& w,
                              const OracleOptions& options) {
  const ExtendedReal f = fee_value(fee, w);
  if (!f.is_finite()) return f;
  return kantorovich_cost(problem, w, options) + f.value();
}

// ---------------------------------------------------------------- brute force

WeightVector brute_force_minimize(const TransportProblem& problem, const SplittingFee& fee, double grid_step) {
  const std::size_t n = problem.size();
  if (fee.size() != n) throw InvalidArgument("brute_force_minimize: fee and problem sizes differ");
  if (n > 4) throw InvalidArgument("brute_force_minimize: N must be at most 4");
  if (problem.dim() != 1) throw InvalidArgument("brute_force_minimize: needs a 1-D problem");
  if (!(grid_step > 0.0) || grid_step > 1.0) throw InvalidArgument("brute_force_minimize: grid_step must lie in (0, 1]");
  const double mf = 1.0 / grid_step;
  const long m = std::lround(mf);
  if (std::abs(mf - static_cast<double>(m)) > 1e-6 * mf) throw InvalidArgument("brute_force_minimize: 1/grid_step must be an integer");
  double count = 1.0;
  for (std::size_t k = 1; k < n; ++k) count *= static_cast<double>(m + static_cast<long>(k)) / static_cast<double>(k);
  if (count > 5e9) throw InvalidArgument("brute_force_minimize: grid too fine for this N");

  auto grid = [&](long j) { return static_cast<double>(j) / static_cast<double>(m); };

  // fee_tab[i][j] = f_i(j h); cost_tab[k][j] = int_{x_0}^{Q(j h)} c(x, y_{order[k]}) dmu.
  std::vector<std::vector<double>> fee_tab(n, std::vector<double>(m + 1));
  for (std::size_t i = 0; i < n; ++i)
    for (long j = 0; j <= m; ++j) fee_tab[i][j] = fee.part(i).value(grid(j));
  const auto order = sorted_sites_1d(problem);
  std::vector<double> quant(m + 1);
  for (long j = 0; j <= m; ++j) quant[j] = j == m ? problem.domain().bounds[0].hi : problem.quantile(grid(j));
  std::vector<std::vector<double>> cost_tab(n, std::vector<double>(m + 1, 0.0));
  for (std::size_t k = 0; k < n; ++k) {
    const double y = problem.sites().points[order[k]][0];
    for (long j = 1; j <= m; ++j) cost_tab[k][j] = cost_tab[k][j - 1] + interval_cost_1d(problem, quant[j - 1], quant[j], y);
  }

  std::vector<long> idx(n, 0), best_idx;
  double best = kInf;
  auto evaluate = [&] {
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v += fee_tab[i][idx[i]];
      if (v == kInf) return kInf;
    }
    long cum = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const long next = cum + idx[order[k]];
      v += cost_tab[k][next] - cost_tab[k][cum];
      cum = next;
    }
    return v;
  };
  // Lexicographic enumeration; strict improvement keeps the smallest w on ties.
  auto recurse = [&](auto&& self, std::size_t pos, long remaining) -> void {
    if (pos + 1 == n) {
      idx[pos] = remaining;
      const double v = evaluate();
      if (v < best) {
        best = v;
        best_idx = idx;
      }
      return;
    }
    for (long j = 0; j <= remaining; ++j) {
      idx[pos] = j;
      if (fee_tab[pos][j] == kInf) continue;
      self(self, pos + 1, remaining - j);
    }
  };
  recurse(recurse, 0, m);
  if (best_idx.empty()) throw InfeasibleFee("brute_force_minimize: the fee is +inf on every grid point");
  WeightVector w(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) w[static_cast<Eigen::Index>(i)] = grid(best_idx[i]);
  return w;
}

WeightSolve solve_weights(const TransportProblem& problem, const SplittingFee& fee, double grid_step,
                          const SolverConfig* config) {
  if (check_assumptions(fee).newton_ready) {
    SolverConfig cfg;
    if (config) cfg = *config;
    else {
      cfg.eps = solver_eps_for(fee);
      cfg.zeta = 1e-11;
    }
    const NewtonResult res = damped_newton(problem, fee, DualVector::Zero(static_cast<Eigen::Index>(fee.size())), cfg);
    if (!res.converged()) throw ConditioningError("solve_weights: Newton failed: " + res.trace.message);
    return {res.w, "newton"};
  }
  return {brute_force_minimize(problem, fee, grid_step), "brute_force"};
}

// ---------------------------------------------------------------- stability

double sampled_fee_distance(const SplittingFee& f1, const SplittingFee& f2, int samples, unsigned seed) {
  const std::size_t n = f1.size();
  if (f2.size() != n) throw InvalidArgument("sampled_fee_distance: fee sizes differ");
  double sup = 0.0;
  auto probe = [&](const WeightVector& w) {
    const ExtendedReal a = fee_value(f1, w), b = fee_value(f2, w);
    if (a.is_finite() && b.is_finite()) sup = std::max(sup, std::abs(a.value() - b.value()));
  };
  WeightVector w(static_cast<Eigen::Index>(n));
  if (n <= 4) {
    const long m = n <= 2 ? 4096 : n == 3 ? 256 : 64;
    std::vector<long> idx(n, 0);
    auto recurse = [&](auto&& self, std::size_t pos, long remaining) -> void {
      if (pos + 1 == n) {
        idx[pos] = remaining;
        for (std::size_t i = 0; i < n; ++i) w[static_cast<Eigen::Index>(i)] = static_cast<double>(idx[i]) / m;
        probe(w);
        return;
      }
      for (long j = 0; j <= remaining; ++j) {
        idx[pos] = j;
        self(self, pos + 1, remaining - j);
      }
    };
    recurse(recurse, 0, m);
  } else {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> expo(1.0);
    for (int s = 0; s < samples; ++s) {
      for (std::size_t i = 0; i < n; ++i) w[static_cast<Eigen::Index>(i)] = expo(rng);
      w /= w.sum();
      probe(w);
    }
  }
  // Vertices of the domain boxes on the simplex carry the extremes of
  // monotone parts; include each part's domain endpoints.
  for (std::size_t i = 0; i < n; ++i) {
    for (double end : {f1.part(i).domain().lo, f1.part(i).domain().hi}) {
      std::vector<Interval> box;
      for (std::size_t j = 0; j < n; ++j) box.push_back(j == i ? Interval{end, end} : f1.part(j).domain());
      double lo = 0.0, hi = 0.0;
      for (const auto& b : box) {
        lo += b.lo;
        hi += b.hi;
      }
      if (lo <= 1.0 && 1.0 <= hi) probe(project_box_simplex(WeightVector::Constant(static_cast<Eigen::Index>(n), 1.0 / n), box));
    }
  }
  return sup;
}

namespace {

std::vector<Interval> domains_of(const SplittingFee& fee) {
  std::vector<Interval> out;
  for (const auto& p : fee.parts()) out.push_back(p.domain());
  return out;
}

}  // namespace

StabilityReport stability_experiment(const TransportProblem& problem, const SplittingFee& fee1,
                                     const SplittingFee& fee2, const StabilityOptions& options) {
  if (!fee1.feasible() || !fee2.feasible()) throw InfeasibleFee("stability_experiment: both fees must be feasible");
  StabilityReport rep;
  const auto d1 = domains_of(fee1), d2 = domains_of(fee2);
  const bool same_domains = std::equal(d1.begin(), d1.end(), d2.begin(), d2.end(),
                                       [](const Interval& a, const Interval& b) { return a.lo == b.lo && a.hi == b.hi; });
  const double n = static_cast<double>(fee1.size());
  if (same_domains) {
    rep.form = BoundForm::sup_norm;
    rep.perturbation = sampled_fee_distance(fee1, fee2, options.samples, options.seed);
  } else {
    rep.form = BoundForm::hausdorff;
    rep.perturbation = hausdorff_box_simplex(d1, d2);
  }
  const WeightSolve s1 = solve_weights(problem, fee1, options.grid_step, options.config);
  const WeightSolve s2 = solve_weights(problem, fee2, options.grid_step, options.config);
  rep.w1 = s1.w;
  rep.w2 = s2.w;
  rep.method1 = s1.method;
  rep.method2 = s2.method;
  rep.distance = (s1.w - s2.w).norm();
  if (rep.perturbation > 0.0) {
    rep.sqrt_law_constant = rep.distance / std::sqrt(rep.perturbation);
    if (rep.form == BoundForm::sup_norm) {
      rep.fitted_constant = rep.distance * rep.distance / (16.0 * n * rep.perturbation);
    } else {
      const double csup = cost_sup_norm(problem);
      rep.fitted_constant = rep.distance * rep.distance / (8.0 * n * 2.0 * csup * std::sqrt(n) * rep.perturbation);
    }
  } else {
    rep.sqrt_law_constant = rep.distance == 0.0 ? 0.0 : kInf;
    rep.fitted_constant = rep.sqrt_law_constant;
  }
  std::ostringstream os;
  os << (rep.form == BoundForm::sup_norm ? "sup-norm" : "hausdorff") << " perturbation " << rep.perturbation;
  rep.description = os.str();
  return rep;
}

LadderReport stability_ladder(const TransportProblem& problem, const SplittingFee& fee1,
                              const std::vector<double>& scales, const StabilityOptions& options) {
  LadderReport out;
  out.scales = scales;
  for (double s : scales) {
    if (!(s > 0.0)) throw InvalidArgument("stability_ladder: scales must be positive");
    StabilityReport r = stability_experiment(problem, fee1, fee1.transformed(1.0 + s), options);
    std::ostringstream os;
    os << "fee scaled by 1 + " << s << ", " << r.description;
    r.description = os.str();
    out.fitted_constant = std::max(out.fitted_constant, r.fitted_constant);
    out.rungs.push_back(std::move(r));
  }
  out.consistent = true;
  for (std::size_t k = 0; k + 1 < out.rungs.size(); ++k) {
    const double a = out.rungs[k].sqrt_law_constant, b = out.rungs[k + 1].sqrt_law_constant;
    const double ratio = a > 0.0 ? b / a : (b == 0.0 ? 1.0 : kInf);
    out.ratios.push_back(ratio);
    if (!(ratio <= 2.0)) out.consistent = false;
  }
  return out;
}

nlohmann::json to_json(const StabilityReport& r) {
  return {{"description", r.description},
          {"bound_form", r.form == BoundForm::sup_norm ? "sup_norm" : "hausdorff"},
          {"perturbation", r.perturbation},
          {"distance", r.distance},
          {"sqrt_law_constant", r.sqrt_law_constant},
          {"fitted_constant", r.fitted_constant},
          {"w1", std::vector<double>(r.w1.data(), r.w1.data() + r.w1.size())},
          {"w2", std::vector<double>(r.w2.data(), r.w2.data() + r.w2.size())},
          {"method1", r.method1},
          {"method2", r.method2}};
}

nlohmann::json to_json(const LadderReport& r) {
  nlohmann::json rungs = nlohmann::json::array();
  for (const auto& x : r.rungs) rungs.push_back(to_json(x));
  return {{"scales", r.scales},
          {"rungs", rungs},
          {"ratios", r.ratios},
          {"consistent", r.consistent},
          {"fitted_constant", r.fitted_constant}};
}

// ---------------------------------------------------------------- Hausdorff

WeightVector project_box_simplex(const WeightVector& x, const std::vector<Interval>& box) {
  const auto n = static_cast<Eigen::Index>(box.size());
  if (x.size() != n) throw InvalidArgument("project_box_simplex: size mismatch");
  double slo = 0.0, shi = 0.0;
  for (const auto& b : box) {
    slo += b.lo;
    shi += b.hi;
  }
  if (slo > 1.0 + 1e-12 || shi < 1.0 - 1e-12) throw InvalidArgument("project_box_simplex: empty set");
  auto at = [&](double r) {
    WeightVector w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = std::clamp(x[i] - r, box[i].lo, box[i].hi);
    return w;
  };
  // sum clamp(x - r) is nonincreasing in r; bracket and bisect.
  double lo = (x.minCoeff() - 1.0) - 1.0, hi = x.maxCoeff() + 1.0;
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (at(mid).sum() > 1.0) lo = mid;
    else hi = mid;
  }
  WeightVector wl = at(lo), wh = at(hi);
  const double sl = wl.sum(), sh = wh.sum();
  if (sl == sh) return wl;
  const double theta = (sl - 1.0) / (sl - sh);
  return (1.0 - theta) * wl + theta * wh;
}

namespace {

// Vertices of {w in box : sum w = 1}: all but one coordinate on a face.
std::vector<WeightVector> box_simplex_vertices(const std::vector<Interval>& box) {
  const std::size_t n = box.size();
  std::vector<WeightVector> out;
  for (std::size_t free = 0; free < n; ++free) {
    const std::size_t combos = std::size_t{1} << (n - 1);
    for (std::size_t mask = 0; mask < combos; ++mask) {
      WeightVector w(static_cast<Eigen::Index>(n));
      double s = 0.0;
      std::size_t bit = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (i == free) continue;
        w[static_cast<Eigen::Index>(i)] = (mask >> bit++) & 1U ? box[i].hi : box[i].lo;
        s += w[static_cast<Eigen::Index>(i)];
      }
      const double v = 1.0 - s;
      if (v < box[free].lo - 1e-12 || v > box[free].hi + 1e-12) continue;
      w[static_cast<Eigen::Index>(free)] = std::clamp(v, box[free].lo, box[free].hi);
      out.push_back(w);
    }
  }
  return out;
}

double one_sided(const std::vector<Interval>& from, const std::vector<Interval>& to) {
  double sup = 0.0;
  for (const auto& v : box_simplex_vertices(from)) sup = std::max(sup, (v - project_box_simplex(v, to)).norm());
  return sup;
}

}  // namespace

double hausdorff_box_simplex(const std::vector<Interval>& box1, const std::vector<Interval>& box2) {
  if (box1.size() != box2.size()) throw InvalidArgument("hausdorff_box_simplex: size mismatch");
  if (box1.size() > 20) throw InvalidArgument("hausdorff_box_simplex: at most 20 coordinates");
  return std::max(one_sided(box1, box2), one_sided(box2, box1));
}

double hypercube_hausdorff_bound(const std::vector<Interval>& box1, const std::vector<Interval>& box2) {
  if (box1.size() != box2.size()) throw InvalidArgument("hypercube_hausdorff_bound: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < box1.size(); ++i)
    s += std::max(std::abs(box1[i].lo - box2[i].lo), std::abs(box1[i].hi - box2[i].hi));
  return 4.0 * s;
}

}  // namespace sdot
