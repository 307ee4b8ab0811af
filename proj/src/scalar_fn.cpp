#include "sdot/scalar_fn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sdot/errors.hpp"

namespace sdot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_domain(Interval d, const char* who) {
  if (!std::isfinite(d.lo) || !std::isfinite(d.hi) || d.lo > d.hi || d.lo < 0.0 || d.hi > 1.0) {
    std::ostringstream os;
    os << who << ": domain [" << d.lo << ", " << d.hi << "] must be an interval inside [0, 1]";
    throw InvalidArgument(os.str());
  }
}

}  // namespace

std::string to_string(FnKind kind) {
  switch (kind) {
    case FnKind::quadratic: return "quadratic";
    case FnKind::log_barrier: return "log_barrier";
    case FnKind::entropy: return "entropy";
    case FnKind::indicator: return "indicator";
    case FnKind::tabulated: return "tabulated";
    case FnKind::tabulated_smoothed: return "tabulated-smoothed";
    case FnKind::convexified: return "convexified";
  }
  return "unknown";
}

double detail::ScalarFnImpl::argmax_affine(double s) const {
  const double a = domain_.lo, b = domain_.hi;
  if (!(b > a)) return a;
  if (deriv(a) >= s) return a;
  if (deriv(b) <= s) return b;
  double lo = a, hi = b;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (deriv(mid) < s) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

namespace {

class QuadraticFn final : public detail::ScalarFnImpl {
 public:
  QuadraticFn(Interval d, double center, double scale) : ScalarFnImpl(d), center_(center), scale_(scale) {}
  FnKind kind() const override { return FnKind::quadratic; }
  double value(double x) const override { return 0.5 * scale_ * (x - center_) * (x - center_); }
  double deriv(double x) const override { return scale_ * (x - center_); }
  double deriv2(double) const override { return scale_; }
  double argmax_affine(double s) const override {
    return std::clamp(center_ + s / scale_, domain_.lo, domain_.hi);
  }
  nlohmann::json params() const override { return {{"center", center_}, {"scale", scale_}}; }

 private:
  double center_, scale_;
};

class LogBarrierFn final : public detail::ScalarFnImpl {
 public:
  LogBarrierFn(Interval d, double scale) : ScalarFnImpl(d), scale_(scale) {}
  FnKind kind() const override { return FnKind::log_barrier; }
  double value(double x) const override {
    if (x <= domain_.lo || x >= domain_.hi) return kInf;
    return -scale_ * (std::log(x - domain_.lo) + std::log(domain_.hi - x));
  }
  double deriv(double x) const override {
    if (x <= domain_.lo) return -kInf;
    if (x >= domain_.hi) return kInf;
    return -scale_ / (x - domain_.lo) + scale_ / (domain_.hi - x);
  }
  double deriv2(double x) const override {
    if (x <= domain_.lo || x >= domain_.hi) return kInf;
    const double u = x - domain_.lo, v = domain_.hi - x;
    return scale_ / (u * u) + scale_ / (v * v);
  }
  double argmax_affine(double s) const override {
    // Solve s u^2 + (2k - sL) u - kL = 0 for u = x - a in (0, L).
    const double len = domain_.length();
    const double k = scale_;
    if (s == 0.0) return domain_.lo + 0.5 * len;
    const double bq = 2.0 * k - s * len;
    const double disc = std::sqrt(4.0 * k * k + s * s * len * len);
    const double q = -0.5 * (bq + std::copysign(disc, bq));
    double u1 = q / s;
    double u2 = (-k * len) / q;
    double u = (u1 > 0.0 && u1 < len) ? u1 : u2;
    u = std::clamp(u, 0.0, len);
    double x = domain_.lo + u;
    // Keep the maximizer strictly interior; the barrier is infinite on the boundary.
    if (x <= domain_.lo) x = std::nextafter(domain_.lo, domain_.hi);
    if (x >= domain_.hi) x = std::nextafter(domain_.hi, domain_.lo);
    return x;
  }
  nlohmann::json params() const override { return {{"scale", scale_}}; }

 private:
  double scale_;
};

class EntropyFn final : public detail::ScalarFnImpl {
 public:
  EntropyFn(Interval d, double scale) : ScalarFnImpl(d), scale_(scale) {}
  FnKind kind() const override { return FnKind::entropy; }
  double value(double x) const override { return x > 0.0 ? scale_ * x * std::log(x) : 0.0; }
  double deriv(double x) const override { return x > 0.0 ? scale_ * (std::log(x) + 1.0) : -kInf; }
  double deriv2(double x) const override { return x > 0.0 ? scale_ / x : kInf; }
  double argmax_affine(double s) const override {
    return std::clamp(std::exp(s / scale_ - 1.0), domain_.lo, domain_.hi);
  }
  nlohmann::json params() const override { return {{"scale", scale_}}; }

 private:
  double scale_;
};

class IndicatorFn final : public detail::ScalarFnImpl {
 public:
  IndicatorFn(Interval d, double value) : ScalarFnImpl(d), value_(value) {}
  FnKind kind() const override { return FnKind::indicator; }
  double value(double) const override { return value_; }
  double deriv(double) const override { return 0.0; }
  double deriv2(double) const override { return 0.0; }
  double argmax_affine(double s) const override {
    if (s > 0.0) return domain_.hi;
    if (s < 0.0) return domain_.lo;
    return 0.5 * (domain_.lo + domain_.hi);
  }
  nlohmann::json params() const override {
    if (value_ == 0.0) return nlohmann::json::object();
    return {{"value", value_}};
  }

 private:
  double value_;
};

class TabulatedFn final : public detail::ScalarFnImpl {
 public:
  TabulatedFn(Interval d, std::vector<double> knots, std::vector<double> values)
      : ScalarFnImpl(d), knots_(std::move(knots)), values_(std::move(values)) {
    slopes_.resize(knots_.size() - 1);
    for (std::size_t k = 0; k + 1 < knots_.size(); ++k)
      slopes_[k] = (values_[k + 1] - values_[k]) / (knots_[k + 1] - knots_[k]);
  }
  FnKind kind() const override { return FnKind::tabulated; }
  double value(double x) const override {
    const std::size_t k = segment(x);
    return values_[k] + slopes_[k] * (x - knots_[k]);
  }
  double deriv(double x) const override {
    std::size_t k = segment(x);
    if (x == domain_.hi && x == knots_[k] && k > 0) --k;
    return slopes_[k];
  }
  double deriv2(double) const override { return 0.0; }
  nlohmann::json params() const override { return {{"knots", knots_}, {"values", values_}}; }

  const std::vector<double>& slopes() const { return slopes_; }

 private:
  std::size_t segment(double x) const {
    const auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
    std::size_t k = it == knots_.begin() ? 0 : static_cast<std::size_t>(it - knots_.begin()) - 1;
    return std::min(k, slopes_.size() - 1);
  }
  std::vector<double> knots_, values_, slopes_;
};

// lambda * inner + offset restricted to a subinterval of the inner domain.
class TransformedFn final : public detail::ScalarFnImpl {
 public:
  TransformedFn(Interval d, ScalarConvexFn inner, double lambda, double offset)
      : ScalarFnImpl(d), inner_(std::move(inner)), lambda_(lambda), offset_(offset) {}
  FnKind kind() const override { return inner_.kind(); }
  double value(double x) const override { return lambda_ * inner_.value(x) + offset_; }
  double deriv(double x) const override { return lambda_ * inner_.deriv(x); }
  double deriv2(double x) const override { return lambda_ * inner_.deriv2(x); }
  double argmax_affine(double s) const override {
    return std::clamp(inner_.argmax_affine(s / lambda_), domain_.lo, domain_.hi);
  }
  nlohmann::json params() const override { return inner_.impl().params(); }

  const ScalarConvexFn& inner() const { return inner_; }
  double lambda() const { return lambda_; }
  double offset() const { return offset_; }

 private:
  ScalarConvexFn inner_;
  double lambda_, offset_;
};

}  // namespace

// ---------------------------------------------------------------- factories

ScalarConvexFn ScalarConvexFn::quadratic(Interval domain, double center, double scale) {
  check_domain(domain, "quadratic");
  if (!(scale > 0.0) || !std::isfinite(scale) || !std::isfinite(center))
    throw InvalidArgument("quadratic: scale must be positive and center finite");
  return ScalarConvexFn(std::make_shared<QuadraticFn>(domain, center, scale));
}

ScalarConvexFn ScalarConvexFn::log_barrier(Interval domain, double scale) {
  check_domain(domain, "log_barrier");
  if (domain.degenerate()) throw InvalidArgument("log_barrier: domain must have positive length");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidArgument("log_barrier: scale must be positive");
  return ScalarConvexFn(std::make_shared<LogBarrierFn>(domain, scale));
}

ScalarConvexFn ScalarConvexFn::entropy(Interval domain, double scale) {
  check_domain(domain, "entropy");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidArgument("entropy: scale must be positive");
  return ScalarConvexFn(std::make_shared<EntropyFn>(domain, scale));
}

ScalarConvexFn ScalarConvexFn::indicator(Interval domain, double value) {
  check_domain(domain, "indicator");
  if (!std::isfinite(value)) throw InvalidArgument("indicator: value must be finite");
  return ScalarConvexFn(std::make_shared<IndicatorFn>(domain, value));
}

ScalarConvexFn ScalarConvexFn::tabulated(std::vector<double> knots, std::vector<double> values) {
  if (knots.empty()) throw InvalidArgument("tabulated: knots must be nonempty");
  const Interval d{knots.front(), knots.back()};
  return tabulated(d, std::move(knots), std::move(values));
}

ScalarConvexFn ScalarConvexFn::tabulated(Interval domain, std::vector<double> knots, std::vector<double> values) {
  check_domain(domain, "tabulated");
  if (knots.size() < 2 || knots.size() != values.size())
    throw InvalidArgument("tabulated: need at least two knots and one value per knot");
  for (std::size_t k = 0; k < knots.size(); ++k) {
    if (!std::isfinite(knots[k]) || !std::isfinite(values[k])) throw InvalidArgument("tabulated: non-finite entry");
    if (k > 0 && !(knots[k] > knots[k - 1])) throw InvalidArgument("tabulated: knots must be strictly increasing");
  }
  if (domain.lo < knots.front() || domain.hi > knots.back())
    throw InvalidArgument("tabulated: domain must lie within the knot range");
  auto impl = std::make_shared<TabulatedFn>(domain, std::move(knots), std::move(values));
  const auto& m = impl->slopes();
  for (std::size_t k = 1; k < m.size(); ++k) {
    if (m[k] < m[k - 1] - 1e-12 * (1.0 + std::abs(m[k - 1])))
      throw InvalidArgument("tabulated: values are not convex (slopes decrease)");
  }
  return ScalarConvexFn(std::move(impl));
}

// ---------------------------------------------------------------- handle

double ScalarConvexFn::value(double x) const {
  const Interval d = domain();
  if (!(x >= d.lo && x <= d.hi)) return kInf;
  return impl_->value(x);
}

double ScalarConvexFn::deriv(double x) const { return impl_->deriv(std::clamp(x, domain().lo, domain().hi)); }

double ScalarConvexFn::deriv2(double x) const { return impl_->deriv2(std::clamp(x, domain().lo, domain().hi)); }

double ScalarConvexFn::argmax_affine(double s) const {
  if (std::isnan(s)) throw InvalidArgument("argmax_affine: NaN slope");
  return impl_->argmax_affine(s);
}

ScalarConvexFn ScalarConvexFn::transformed(double lambda, double offset) const {
  if (!(lambda > 0.0) || !std::isfinite(lambda) || !std::isfinite(offset))
    throw InvalidArgument("transformed: multiplier must be positive and offset finite");
  if (const auto* t = dynamic_cast<const TransformedFn*>(impl_.get())) {
    return ScalarConvexFn(std::make_shared<TransformedFn>(domain(), t->inner(), t->lambda() * lambda,
                                                          t->offset() * lambda + offset));
  }
  return ScalarConvexFn(std::make_shared<TransformedFn>(domain(), *this, lambda, offset));
}

ScalarConvexFn ScalarConvexFn::restricted(Interval sub) const {
  const Interval d = domain();
  check_domain(sub, "restricted");
  if (sub.lo < d.lo || sub.hi > d.hi) throw InvalidArgument("restricted: subinterval leaves the domain");
  if (const auto* t = dynamic_cast<const TransformedFn*>(impl_.get()))
    return ScalarConvexFn(std::make_shared<TransformedFn>(sub, t->inner(), t->lambda(), t->offset()));
  return ScalarConvexFn(std::make_shared<TransformedFn>(sub, *this, 1.0, 0.0));
}

bool ScalarConvexFn::sampled_convexity(int samples) const {
  const Interval d = domain();
  if (d.degenerate()) return true;
  double prev = -kInf;
  for (int k = 0; k < samples; ++k) {
    const double x = d.lo + (k + 0.5) / samples * d.length();
    const double g = deriv(x);
    if (std::isnan(g)) return false;
    if (g < prev - 1e-12 * (1.0 + std::abs(prev))) return false;
    prev = g;
  }
  return true;
}

nlohmann::json ScalarConvexFn::to_json() const {
  const Interval d = domain();
  if (const auto* t = dynamic_cast<const TransformedFn*>(impl_.get())) {
    nlohmann::json j = t->inner().to_json();
    const double lambda = j.value("multiplier", 1.0) * t->lambda();
    const double offset = j.value("offset", 0.0) * t->lambda() + t->offset();
    j["domain"] = {d.lo, d.hi};
    if (lambda != 1.0) j["multiplier"] = lambda;
    else j.erase("multiplier");
    if (offset != 0.0) j["offset"] = offset;
    else j.erase("offset");
    return j;
  }
  return {{"kind", to_string(kind())}, {"params", impl_->params()}, {"domain", {d.lo, d.hi}}};
}

}  // namespace sdot
