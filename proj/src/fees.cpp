#include "sdot/fees.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sdot/errors.hpp"

namespace sdot {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-12;
}  // namespace

double ExtendedReal::value() const {
  if (!finite_) throw InvalidArgument("ExtendedReal: value requested from +inf");
  return value_;
}

// ---------------------------------------------------------------- SplittingFee

SplittingFee::SplittingFee(std::vector<ScalarConvexFn> parts) : parts_(std::move(parts)) {
  if (parts_.empty()) throw InvalidArgument("fee: at least one part is required");
}

double SplittingFee::eps_floor() const {
  double e = kInf;
  for (const auto& p : parts_) e = std::min(e, p.domain().lo);
  return e;
}

double SplittingFee::sum_lower() const {
  double s = 0.0;
  for (const auto& p : parts_) s += p.domain().lo;
  return s;
}

double SplittingFee::sum_upper() const {
  double s = 0.0;
  for (const auto& p : parts_) s += p.domain().hi;
  return s;
}

bool SplittingFee::feasible() const {
  return sum_lower() <= 1.0 + kFeasTol && sum_upper() >= 1.0 - kFeasTol;
}

SplittingFee SplittingFee::transformed(double lambda, double offset_per_part) const {
  std::vector<ScalarConvexFn> parts;
  parts.reserve(parts_.size());
  for (const auto& p : parts_) parts.push_back(p.transformed(lambda, offset_per_part));
  return SplittingFee(std::move(parts));
}

SplittingFee point_indicator_fee(const WeightVector& w) {
  std::vector<ScalarConvexFn> parts;
  for (Eigen::Index i = 0; i < w.size(); ++i) parts.push_back(ScalarConvexFn::indicator(Interval{w[i], w[i]}));
  return SplittingFee(std::move(parts));
}

// ---------------------------------------------------------------- conjugate

namespace {

double weights_at(const SplittingFee& fee, const DualVector& psi, double r, WeightVector& w) {
  double total = 0.0;
  for (std::size_t i = 0; i < fee.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    w[ii] = fee.part(i).argmax_affine(psi[ii] - r);
    total += w[ii];
  }
  return total;
}

}  // namespace

ConjugateResult conjugate_solve(const SplittingFee& fee, const DualVector& psi) {
  const auto n = static_cast<Eigen::Index>(fee.size());
  if (psi.size() != n) {
    std::ostringstream os;
    os << "conjugate_solve: psi has length " << psi.size() << " but the fee has " << n << " parts";
    throw InvalidArgument(os.str());
  }
  if (!psi.allFinite()) throw InvalidArgument("conjugate_solve: psi has non-finite entries");
  if (!fee.feasible()) {
    std::ostringstream os;
    os << "conjugate_solve: infeasible fee (sum a = " << fee.sum_lower() << ", sum b = " << fee.sum_upper() << ")";
    throw InfeasibleFee(os.str());
  }

  WeightVector w_lo(n), w_hi(n);
  double dmax_b = -kInf, dmin_a = kInf;
  for (std::size_t i = 0; i < fee.size(); ++i) {
    const Interval d = fee.part(i).domain();
    dmax_b = std::max(dmax_b, fee.part(i).deriv(d.hi));
    dmin_a = std::min(dmin_a, fee.part(i).deriv(d.lo));
  }
  double lo = psi.minCoeff() - dmax_b;
  double hi = psi.maxCoeff() - dmin_a;
  const double center = psi.mean();
  if (!std::isfinite(lo)) lo = center - 1.0;
  if (!std::isfinite(hi)) hi = center + 1.0;
  if (hi < lo) std::swap(lo, hi);
  double s_lo = weights_at(fee, psi, lo, w_lo);
  double s_hi = weights_at(fee, psi, hi, w_hi);
  double step = std::max(1.0, hi - lo);
  // Domains summing to one only up to rounding cap S on that side.
  const double top = std::min(1.0, fee.sum_upper());
  const double bottom = std::max(1.0, fee.sum_lower());
  for (int it = 0; s_lo < top || s_hi > bottom; ++it) {
    if (it > 2000 || !std::isfinite(step)) throw BracketError("conjugate_solve: could not bracket the multiplier");
    if (s_lo < top) s_lo = weights_at(fee, psi, lo -= step, w_lo);
    if (s_hi > bottom) s_hi = weights_at(fee, psi, hi += step, w_hi);
    step *= 2.0;
  }

  // S(r) = sum_i w^i(r) is nonincreasing; keep S(lo) >= 1 >= S(hi).
  WeightVector w_mid(n);
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double s_mid = weights_at(fee, psi, mid, w_mid);
    if (s_mid == 1.0) {
      lo = hi = mid;
      s_lo = s_hi = s_mid;
      w_lo = w_hi = w_mid;
      break;
    }
    if (s_mid > 1.0) {
      lo = mid;
      s_lo = s_mid;
      w_lo = w_mid;
    } else {
      hi = mid;
      s_hi = s_mid;
      w_hi = w_mid;
    }
  }

  ConjugateResult res;
  res.r = 0.5 * (lo + hi);
  if (s_lo - s_hi > 1e-13) {
    // Jump in S: some coordinate's subdifferential contains psi^i - r on an
    // interval. Pick the convex combination that lands on the simplex.
    const double theta = std::clamp((1.0 - s_hi) / (s_lo - s_hi), 0.0, 1.0);
    res.w = w_hi + theta * (w_lo - w_hi);
  } else {
    res.w = (std::abs(s_lo - 1.0) <= std::abs(s_hi - 1.0)) ? w_lo : w_hi;
    // One Newton step on S(r) = 1 when every coordinate is smooth and interior.
    double curvature = 0.0;
    bool smooth = true;
    for (std::size_t i = 0; i < fee.size() && smooth; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const Interval d = fee.part(i).domain();
      const double f2 = fee.part(i).deriv2(res.w[ii]);
      smooth = res.w[ii] > d.lo && res.w[ii] < d.hi && f2 > 0.0 && std::isfinite(f2);
      if (smooth) curvature += 1.0 / f2;
    }
    const double s_now = res.w.sum();
    if (smooth && curvature > 0.0 && s_now != 1.0) {
      const double r_new = res.r + (s_now - 1.0) / curvature;
      WeightVector w_new(n);
      const double s_new = weights_at(fee, psi, r_new, w_new);
      if (std::abs(s_new - 1.0) < std::abs(s_now - 1.0)) {
        res.r = r_new;
        res.w = w_new;
      }
    }
  }

  res.at_boundary.resize(fee.size());
  double fval = 0.0;
  for (std::size_t i = 0; i < fee.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Interval d = fee.part(i).domain();
    res.w[ii] = std::clamp(res.w[ii], d.lo, d.hi);
    res.at_boundary[i] = d.degenerate() || res.w[ii] <= d.lo || res.w[ii] >= d.hi;
    fval += fee.part(i).value(res.w[ii]);
  }
  res.fstar = psi.dot(res.w) - fval;
  return res;
}

// ---------------------------------------------------------------- Hessian

Eigen::MatrixXd fstar_hessian(const SplittingFee& fee, const DualVector& psi, BoundaryPolicy policy) {
  return fstar_hessian(fee, conjugate_solve(fee, psi), policy);
}

Eigen::MatrixXd fstar_hessian(const SplittingFee& fee, const ConjugateResult& conj, BoundaryPolicy policy) {
  const auto n = static_cast<Eigen::Index>(fee.size());
  Eigen::VectorXd l = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::Index> flat;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& part = fee.part(static_cast<std::size_t>(i));
    if (conj.at_boundary[static_cast<std::size_t>(i)]) {
      if (policy == BoundaryPolicy::error) {
        std::ostringstream os;
        os << "fstar_hessian: coordinate " << i << " is clamped to its domain boundary; regularize the fee";
        throw HessianUnavailable(os.str());
      }
      continue;
    }
    const double f2 = part.deriv2(conj.w[i]);
    if (f2 > 0.0 && std::isfinite(f2)) {
      l[i] = 1.0 / f2;
    } else if (f2 == 0.0) {
      flat.push_back(i);
    } else if (!(f2 == kInf)) {
      std::ostringstream os;
      os << "fstar_hessian: invalid second derivative " << f2 << " at coordinate " << i;
      throw HessianUnavailable(os.str());
    }
  }

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  if (flat.empty()) {
    const double total = l.sum();
    if (total > 0.0) h = Eigen::MatrixXd(l.asDiagonal()) - (l * l.transpose()) / total;
    return h;
  }
  if (flat.size() > 1 || policy == BoundaryPolicy::error) {
    std::ostringstream os;
    os << "fstar_hessian: " << flat.size() << " coordinate(s) with zero curvature; F* is not twice differentiable";
    throw HessianUnavailable(os.str());
  }
  // Limit of S - Q l l^T as l_k -> infinity for the single flat coordinate k.
  const Eigen::Index k = flat.front();
  h = l.asDiagonal();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j == k) continue;
    h(k, j) = -l[j];
    h(j, k) = -l[j];
  }
  h(k, k) = l.sum();
  return h;
}

// ---------------------------------------------------------------- value

ExtendedReal fee_value(const SplittingFee& fee, const WeightVector& w) {
  if (static_cast<std::size_t>(w.size()) != fee.size()) throw InvalidArgument("fee_value: weight vector has wrong length");
  if (!w.allFinite() || std::abs(w.sum() - 1.0) > 1e-9) return ExtendedReal::infinity();
  double total = 0.0;
  for (std::size_t i = 0; i < fee.size(); ++i) {
    const double v = fee.part(i).value(w[static_cast<Eigen::Index>(i)]);
    if (!std::isfinite(v)) return ExtendedReal::infinity();
    total += v;
  }
  return total;
}

// ---------------------------------------------------------------- assumptions

namespace {

bool blows_up_near(const ScalarConvexFn& f, double endpoint, double toward) {
  const double dir = toward > endpoint ? 1.0 : -1.0;
  for (int k = 0; k <= 80; ++k) {
    const double x = endpoint + dir * std::ldexp(1e-6, -k);
    if (x == endpoint) break;
    if (std::abs(f.deriv(x)) > 1e3) return true;
  }
  const double x = std::nextafter(endpoint, toward);
  return std::abs(f.deriv(x)) > 1e3;
}

}  // namespace

AssumptionReport check_assumptions(const SplittingFee& fee) {
  AssumptionReport rep;
  rep.eps_max = fee.eps_floor();
  rep.sum_lower = fee.sum_lower();
  rep.sum_upper = fee.sum_upper();
  rep.strict_interior = rep.sum_lower < 1.0 && 1.0 < rep.sum_upper;

  double lb = kInf;
  bool smooth = true;
  rep.part_essentially_smooth.resize(fee.size());
  for (std::size_t i = 0; i < fee.size(); ++i) {
    const auto& f = fee.part(i);
    const Interval d = f.domain();
    if (d.degenerate()) {
      lb = 0.0;
      rep.part_essentially_smooth[i] = false;
      smooth = false;
      continue;
    }
    constexpr int kSamples = 1000;
    for (int k = 0; k < kSamples; ++k) {
      const double x = d.lo + (k + 0.5) / kSamples * d.length();
      const double f2 = f.deriv2(x);
      lb = std::min(lb, std::isnan(f2) ? 0.0 : f2);
    }
    const bool ok = blows_up_near(f, d.lo, d.hi) && blows_up_near(f, d.hi, d.lo);
    rep.part_essentially_smooth[i] = ok;
    smooth = smooth && ok;
  }
  rep.strong_convexity_lb = lb;
  rep.essential_smoothness = smooth;

  if (!(rep.eps_max > 0.0)) rep.failures.push_back("eps_max: some domain starts at 0");
  if (!rep.strict_interior) {
    std::ostringstream os;
    os << "strict_interior: need sum a_i < 1 < sum b_i, got " << rep.sum_lower << " and " << rep.sum_upper;
    rep.failures.push_back(os.str());
  }
  if (!(rep.strong_convexity_lb > 0.0)) rep.failures.push_back("strong_convexity: some f_i'' vanishes");
  if (!rep.essential_smoothness) rep.failures.push_back("essential_smoothness: some derivative stays bounded at an endpoint");
  rep.newton_ready = rep.eps_max > 0.0 && rep.strict_interior && rep.strong_convexity_lb > 0.0;
  rep.overall = rep.newton_ready && rep.essential_smoothness;
  return rep;
}

}  // namespace sdot
