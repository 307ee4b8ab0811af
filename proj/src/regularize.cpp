#include "sdot/regularize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "sdot/errors.hpp"

namespace sdot {

namespace {

constexpr int kSmoothingKnots = 4096;

// Quadratic B-spline on [0, 3] and its first two antiderivatives.
double bspline(double u) {
  if (u <= 0.0 || u >= 3.0) return 0.0;
  if (u < 1.0) return 0.5 * u * u;
  if (u < 2.0) return 0.5 * (-2.0 * u * u + 6.0 * u - 3.0);
  return 0.5 * (3.0 - u) * (3.0 - u);
}

double bspline_int1(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 3.0) return 1.0;
  if (u < 1.0) return u * u * u / 6.0;
  if (u < 2.0) return 0.5 - u * u * u / 3.0 + 1.5 * u * u - 1.5 * u;
  const double v = 3.0 - u;
  return 1.0 - v * v * v / 6.0;
}

double bspline_int2(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 3.0) return u - 1.5;
  const double u2 = u * u;
  if (u < 1.0) return u2 * u2 / 24.0;
  if (u < 2.0) return 1.0 / 24.0 - 1.0 / 6.0 + 0.5 * u - u2 * u2 / 12.0 + 0.5 * u2 * u - 0.75 * u2;
  const double v = 3.0 - u;
  return u - 1.5 + v * v * v * v / 24.0;
}

class SmoothedFn final : public detail::ScalarFnImpl {
 public:
  SmoothedFn(Interval d, std::vector<double> knot_values, double width)
      : ScalarFnImpl(d), values_(std::move(knot_values)), width_(width) {
    const auto m = static_cast<int>(values_.size()) - 1;
    h_ = d.length() / m;
    slopes_.resize(m);
    for (int k = 0; k < m; ++k) slopes_[k] = (values_[k + 1] - values_[k]) / h_;
    jumps_.assign(m + 1, 0.0);
    // Rounding in sampled convex data can leave tiny negative jumps.
    for (int k = 1; k < m; ++k) jumps_[k] = std::max(0.0, slopes_[k] - slopes_[k - 1]);
  }

  FnKind kind() const override { return FnKind::tabulated_smoothed; }

  double value(double x) const override {
    const int seg = segment(x);
    double v = values_[seg] + slopes_[seg] * (x - knot(seg));
    const double scale = 2.0 * width_ / 3.0;
    for_window(x, [&](int j, double t, double u) { v += jumps_[j] * (scale * bspline_int2(u) - std::max(t, 0.0)); });
    return v;
  }

  double deriv(double x) const override {
    const int seg = segment(x);
    double g = slopes_[seg];
    for_window(x, [&](int j, double, double u) { g += jumps_[j] * (bspline_int1(u) - (j <= seg ? 1.0 : 0.0)); });
    return g;
  }

  double deriv2(double x) const override {
    double g = 0.0;
    const double scale = 1.5 / width_;
    for_window(x, [&](int j, double, double u) { g += jumps_[j] * scale * bspline(u); });
    return g;
  }

  nlohmann::json params() const override {
    return {{"knot_values", values_}, {"width", width_}, {"knot_domain", {domain_.lo, domain_.hi}}};
  }

 private:
  double knot(int k) const {
    return k == static_cast<int>(slopes_.size()) ? domain_.hi : domain_.lo + k * h_;
  }
  int segment(double x) const {
    const int m = static_cast<int>(slopes_.size());
    const int k = static_cast<int>(std::floor((x - domain_.lo) / h_));
    return std::clamp(k, 0, m - 1);
  }
  template <class Fn>
  void for_window(double x, Fn&& fn) const {
    const int m = static_cast<int>(slopes_.size());
    const int lo = std::max(1, static_cast<int>(std::floor((x - width_ - domain_.lo) / h_)));
    const int hi = std::min(m - 1, static_cast<int>(std::ceil((x + width_ - domain_.lo) / h_)));
    for (int j = lo; j <= hi; ++j) {
      if (jumps_[j] == 0.0) continue;
      const double t = x - knot(j);
      if (t <= -width_ || t >= width_) continue;
      fn(j, t, (t + width_) * 1.5 / width_);
    }
  }

  std::vector<double> values_, slopes_, jumps_;
  double width_, h_ = 0.0;
};

class ConvexifiedFn final : public detail::ScalarFnImpl {
 public:
  ConvexifiedFn(ScalarConvexFn inner, double eta) : ScalarFnImpl(inner.domain()), inner_(std::move(inner)), eta_(eta) {}

  FnKind kind() const override { return FnKind::convexified; }

  double value(double x) const override { return inner_.value(x) - eta_ * std::sqrt(gap(x)); }

  double deriv(double x) const override {
    const double c = domain_.lo, d = domain_.hi;
    const double g = gap(x);
    const double num = c + d - 2.0 * x;
    if (g <= 0.0) return num > 0.0 ? -kInfinity : kInfinity;
    return inner_.deriv(x) - eta_ * num / (2.0 * std::sqrt(g));
  }

  double deriv2(double x) const override {
    const double g = gap(x);
    if (g <= 0.0) return kInfinity;
    const double len = domain_.length();
    return inner_.deriv2(x) + eta_ * len * len / (4.0 * g * std::sqrt(g));
  }

  nlohmann::json params() const override { return {{"eta", eta_}, {"inner", inner_.to_json()}}; }

 private:
  static constexpr double kInfinity = std::numeric_limits<double>::infinity();
  double gap(double x) const { return std::max(0.0, (domain_.hi - x) * (x - domain_.lo)); }

  ScalarConvexFn inner_;
  double eta_;
};

void require_interval(const ScalarConvexFn& f, const char* who) {
  if (f.domain().degenerate()) {
    std::ostringstream os;
    os << who << ": domain [" << f.domain().lo << ", " << f.domain().hi << "] is a single point";
    throw InvalidArgument(os.str());
  }
}

void require_eta(double eta, const char* who) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidArgument(std::string(who) + ": eta must be positive");
}

std::vector<Interval> domains_of(const SplittingFee& fee) {
  std::vector<Interval> out;
  for (const auto& p : fee.parts()) out.push_back(p.domain());
  return out;
}

// Endpoint of {f <= level} between `inside` (f <= level) and `outside`.
double level_crossing(const ScalarConvexFn& f, double level, double inside, double outside) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (inside + outside);
    if (mid == inside || mid == outside) break;
    if (f.value(mid) <= level) inside = mid;
    else outside = mid;
  }
  return inside;
}

bool same_interval(const Interval& a, const Interval& b) { return a.lo == b.lo && a.hi == b.hi; }

}  // namespace

ScalarConvexFn make_smoothed(Interval domain, std::vector<double> knot_values, double width) {
  if (domain.degenerate()) throw InvalidArgument("tabulated-smoothed: domain must have positive length");
  if (knot_values.size() < 2) throw InvalidArgument("tabulated-smoothed: need at least two knot values");
  if (!(width > 0.0) || !std::isfinite(width)) throw InvalidArgument("tabulated-smoothed: width must be positive");
  for (double v : knot_values)
    if (!std::isfinite(v)) throw InvalidArgument("tabulated-smoothed: non-finite knot value");
  double scale = 1.0;
  for (double v : knot_values) scale = std::max(scale, std::abs(v));
  for (std::size_t k = 2; k < knot_values.size(); ++k) {
    const double s0 = knot_values[k - 1] - knot_values[k - 2], s1 = knot_values[k] - knot_values[k - 1];
    if (s1 < s0 - 1e-12 * scale) throw InvalidArgument("tabulated-smoothed: knot values are not convex");
  }
  return ScalarConvexFn(std::make_shared<SmoothedFn>(domain, std::move(knot_values), width));
}

ScalarConvexFn make_convexified(ScalarConvexFn inner, double eta) {
  require_eta(eta, "convexified");
  require_interval(inner, "convexified");
  return ScalarConvexFn(std::make_shared<ConvexifiedFn>(std::move(inner), eta));
}

double sampled_sup_distance(const ScalarConvexFn& f, const ScalarConvexFn& g, int samples) {
  const Interval d = f.domain();
  double sup = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double x = samples == 1 ? d.lo : d.lo + d.length() * k / (samples - 1);
    sup = std::max(sup, std::abs(f.value(x) - g.value(x)));
  }
  return sup;
}

ScalarConvexFn smooth_scalar(const ScalarConvexFn& f, double eta) {
  require_eta(eta, "smooth_scalar");
  require_interval(f, "smooth_scalar");
  const Interval d = f.domain();
  const int m = kSmoothingKnots;
  std::vector<double> vals(m + 1);
  for (int k = 0; k <= m; ++k) {
    const double x = k == m ? d.hi : d.lo + d.length() * k / m;
    vals[k] = f.value(x);
    if (!std::isfinite(vals[k])) throw InvalidArgument("smooth_scalar: f must be finite on its whole domain");
  }
  const double h = d.length() / m;
  double smin = INFINITY, smax = -INFINITY;
  for (int k = 0; k < m; ++k) {
    const double s = (vals[k + 1] - vals[k]) / h;
    smin = std::min(smin, s);
    smax = std::max(smax, s);
  }
  if (smax - smin <= 1e-12 * (1.0 + std::abs(smax))) return f;

  // The mollified ramp exceeds the ramp by at most 0.136 w per unit jump, so
  // start from the width that keeps that term near eta / 4 and refine.
  double width = std::min(0.25 * d.length(), 0.25 * eta / (0.1355 * (smax - smin)));
  width = std::max(width, 0.5 * h);
  for (;;) {
    ScalarConvexFn g = make_smoothed(d, vals, width);
    const double err = sampled_sup_distance(f, g, 4 * m + 1);
    if (err < 0.5 * eta) return g;
    if (width <= 0.5 * h) {
      if (err < eta) return g;
      std::ostringstream os;
      os << "smooth_scalar: cannot reach sup error " << eta << " (got " << err << ")";
      throw ConditioningError(os.str());
    }
    width = std::max(0.5 * width, 0.5 * h);
  }
}

ScalarConvexFn convexify_scalar(const ScalarConvexFn& f, double eta) { return make_convexified(f, eta); }

FloorResult floor_domains(const std::vector<Interval>& domains, double eta) {
  require_eta(eta, "floor_domains");
  const auto n = static_cast<double>(domains.size());
  double sa = 0.0, sb = 0.0, min_b = INFINITY;
  for (const auto& iv : domains) {
    sa += iv.lo;
    sb += iv.hi;
    min_b = std::min(min_b, iv.hi);
  }
  const double tol = 1e-12;
  FloorResult out;
  if (sa < 1.0 - tol && sb > 1.0 + tol) {
    out.which = FloorCase::interior;
    out.eps = 0.5 * std::min({(1.0 - sa) / (2.0 * n), eta, min_b});
    for (const auto& iv : domains) out.domains.push_back({std::max(iv.lo, out.eps), iv.hi});
    return out;
  }
  if (sa > 1.0 + tol || sb < 1.0 - tol) throw InfeasibleFee("floor_domains: sum of lower ends exceeds 1 or upper ends fall short");
  out.which = FloorCase::degenerate;
  const bool use_lo = std::abs(sa - 1.0) <= tol;
  for (const auto& iv : domains) {
    const double anchor = use_lo ? iv.lo : iv.hi;
    out.domains.push_back({(anchor + eta / n) / (1.0 + 2.0 * eta), std::min(anchor + eta / n, 1.0)});
  }
  return out;
}

SplittingFee truncate_to_level_sets(const SplittingFee& fee, double cost_sup, std::vector<double>* levels) {
  const std::size_t n = fee.size();
  const double min_fee = -conjugate_solve(fee, DualVector::Zero(static_cast<Eigen::Index>(n))).fstar;
  std::vector<double> mins(n);
  for (std::size_t i = 0; i < n; ++i) mins[i] = fee.part(i).min_value();
  const double total_min = std::accumulate(mins.begin(), mins.end(), 0.0);
  std::vector<ScalarConvexFn> parts;
  if (levels) levels->assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const ScalarConvexFn& f = fee.part(i);
    const double level = 2.0 * cost_sup + min_fee - (total_min - mins[i]);
    if (levels) (*levels)[i] = level;
    const Interval d = f.domain();
    const double m = f.argmin();
    const double lo = f.value(d.lo) <= level ? d.lo : level_crossing(f, level, m, d.lo);
    const double hi = f.value(d.hi) <= level ? d.hi : level_crossing(f, level, m, d.hi);
    parts.push_back(lo == d.lo && hi == d.hi ? f : f.restricted({lo, hi}));
  }
  return SplittingFee(std::move(parts));
}

RegularizedFee regularize(const SplittingFee& fee, double eta, double cost_sup, const RegularizeOptions& options) {
  require_eta(eta, "regularize");
  if (!fee.feasible()) throw InfeasibleFee("regularize: input fee is infeasible");
  if (!(cost_sup >= 0.0)) throw InvalidArgument("regularize: cost sup-norm must be nonnegative");
  const std::size_t n = fee.size();
  const double eta_widen = options.eta_widen.value_or(eta);
  const double eta_floor = options.eta_floor.value_or(eta);
  const double eta_smooth = options.eta_smooth.value_or(eta);
  const double eta_cvx = options.eta_convexify.value_or(eta);

  RegularizationReport rep;
  rep.eta = eta;
  rep.cost_sup = cost_sup;
  rep.min_fee = -conjugate_solve(fee, DualVector::Zero(static_cast<Eigen::Index>(n))).fstar;
  rep.stages_applied.assign(n, {});
  rep.stage_domains.push_back(domains_of(fee));

  auto mark = [&](int stage, const std::vector<Interval>& before, const std::vector<Interval>& after) {
    for (std::size_t i = 0; i < n; ++i)
      if (!same_interval(before[i], after[i])) rep.stages_applied[i].push_back(stage);
  };

  // Stage 2: truncation to a level set.
  SplittingFee f2 = options.truncate ? truncate_to_level_sets(fee, cost_sup, &rep.truncation_levels) : fee;
  rep.stage_domains.push_back(domains_of(f2));
  mark(2, rep.stage_domains[0], rep.stage_domains[1]);

  // Stage 3: point domains widened to [y - eta, y + eta] within [0, 1].
  std::vector<ScalarConvexFn> p3;
  for (std::size_t i = 0; i < n; ++i) {
    const ScalarConvexFn& f = f2.part(i);
    if (f.domain().degenerate()) {
      const double y = f.domain().lo;
      p3.push_back(ScalarConvexFn::indicator({std::max(0.0, y - eta_widen), std::min(1.0, y + eta_widen)}, f.value(y)));
      rep.stages_applied[i].push_back(3);
    } else {
      p3.push_back(f);
    }
  }
  const SplittingFee f3(std::move(p3));
  rep.stage_domains.push_back(domains_of(f3));

  // Stage 4: positive floor, or fresh domains when the constraint is tight.
  const FloorResult fl = floor_domains(rep.stage_domains.back(), eta_floor);
  rep.floor_case = fl.which;
  rep.floor_eps = fl.eps;
  std::vector<ScalarConvexFn> p4;
  for (std::size_t i = 0; i < n; ++i) {
    if (fl.which == FloorCase::degenerate) {
      p4.push_back(ScalarConvexFn::indicator(fl.domains[i]));
      rep.stages_applied[i].push_back(4);
    } else if (same_interval(fl.domains[i], f3.part(i).domain())) {
      p4.push_back(f3.part(i));
    } else {
      p4.push_back(f3.part(i).restricted(fl.domains[i]));
      rep.stages_applied[i].push_back(4);
    }
  }
  rep.stage_domains.push_back(fl.domains);

  // Stages 5 and 6.
  std::vector<ScalarConvexFn> p6;
  for (std::size_t i = 0; i < n; ++i) {
    const ScalarConvexFn f5 = smooth_scalar(p4[i], eta_smooth);
    rep.smoothing_error.push_back(sampled_sup_distance(p4[i], f5));
    if (rep.smoothing_error.back() > 0.0) rep.stages_applied[i].push_back(5);
    p6.push_back(convexify_scalar(f5, eta_cvx));
    rep.stages_applied[i].push_back(6);
    rep.strong_convexity.push_back(2.0 * eta_cvx / fl.domains[i].length());
  }
  rep.stage_domains.push_back(fl.domains);
  rep.stage_domains.push_back(fl.domains);
  rep.eps_for_solver = INFINITY;
  for (const auto& iv : fl.domains) rep.eps_for_solver = std::min(rep.eps_for_solver, iv.lo);
  return {SplittingFee(std::move(p6)), std::move(rep)};
}

nlohmann::json to_json(const RegularizationReport& r) {
  using nlohmann::json;
  json stages = json::array();
  for (std::size_t s = 0; s < r.stage_domains.size(); ++s) {
    json doms = json::array();
    for (const auto& iv : r.stage_domains[s]) doms.push_back({iv.lo, iv.hi});
    stages.push_back({{"stage", static_cast<int>(s) + 1}, {"domains", doms}});
  }
  return {{"eta", r.eta},
          {"cost_sup", r.cost_sup},
          {"min_fee", r.min_fee},
          {"truncation_levels", r.truncation_levels},
          {"stage_domains", stages},
          {"stages_applied", r.stages_applied},
          {"floor_case", r.floor_case == FloorCase::interior ? "interior" : "degenerate"},
          {"floor_eps", r.floor_eps},
          {"smoothing_error", r.smoothing_error},
          {"strong_convexity", r.strong_convexity},
          {"eps_for_solver", r.eps_for_solver}};
}

}  // namespace sdot
