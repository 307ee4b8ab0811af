#include "sdot/polygon.hpp"

#include <cstddef>

namespace sdot {

Polygon rectangle(double x0, double x1, double y0, double y1) {
  return {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
}

Polygon clip_halfplane(const Polygon& poly, const Point2& normal, double offset) {
  Polygon out;
  const std::size_t n = poly.size();
  if (n == 0) return out;
  out.reserve(n + 1);
  for (std::size_t k = 0; k < n; ++k) {
    const Point2& p = poly[k];
    const Point2& q = poly[(k + 1) % n];
    const double fp = normal[0] * p[0] + normal[1] * p[1] - offset;
    const double fq = normal[0] * q[0] + normal[1] * q[1] - offset;
    if (fp <= 0.0) out.push_back(p);
    if ((fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0)) {
      const double t = fp / (fp - fq);
      out.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])});
    }
  }
  if (out.size() < 3) out.clear();
  return out;
}

namespace {

// One side of an axis-aligned clip; sign = +1 keeps coord <= value, -1 keeps coord >= value.
Polygon clip_axis(const Polygon& poly, int axis, double value, double sign) {
  Polygon out;
  const std::size_t n = poly.size();
  if (n == 0) return out;
  out.reserve(n + 1);
  const int other = 1 - axis;
  for (std::size_t k = 0; k < n; ++k) {
    const Point2& p = poly[k];
    const Point2& q = poly[(k + 1) % n];
    const double fp = sign * (p[axis] - value);
    const double fq = sign * (q[axis] - value);
    if (fp <= 0.0) out.push_back(p);
    if ((fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0)) {
      const double t = fp / (fp - fq);
      Point2 r;
      r[axis] = value;
      r[other] = p[other] + t * (q[other] - p[other]);
      out.push_back(r);
    }
  }
  if (out.size() < 3) out.clear();
  return out;
}

}  // namespace

Polygon clip_slab(const Polygon& poly, int axis, double lo, double hi) {
  return clip_axis(clip_axis(poly, axis, lo, -1.0), axis, hi, 1.0);
}

double polygon_area(const Polygon& poly) {
  double a = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t k = 0; k < n; ++k) {
    const Point2& p = poly[k];
    const Point2& q = poly[(k + 1) % n];
    a += p[0] * q[1] - q[0] * p[1];
  }
  return 0.5 * a;
}

Moments polygon_moments(const Polygon& poly) {
  Moments m;
  const std::size_t n = poly.size();
  if (n < 3) return m;
  // Shift to the first vertex to limit cancellation.
  const double ox = poly[0][0];
  const double oy = poly[0][1];
  double a = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x0 = poly[k][0] - ox, y0 = poly[k][1] - oy;
    const double x1 = poly[(k + 1) % n][0] - ox, y1 = poly[(k + 1) % n][1] - oy;
    const double cr = x0 * y1 - x1 * y0;
    a += cr;
    sx += cr * (x0 + x1);
    sy += cr * (y0 + y1);
    sxx += cr * (x0 * x0 + x0 * x1 + x1 * x1);
    syy += cr * (y0 * y0 + y0 * y1 + y1 * y1);
  }
  a *= 0.5;
  sx /= 6.0;
  sy /= 6.0;
  sxx /= 12.0;
  syy /= 12.0;
  // Undo the shift: x = u + ox.
  m.area = a;
  m.mx = sx + ox * a;
  m.my = sy + oy * a;
  m.mxx = sxx + 2.0 * ox * sx + ox * ox * a;
  m.myy = syy + 2.0 * oy * sy + oy * oy * a;
  return m;
}

Moments rectangle_moments(double x0, double x1, double y0, double y1) {
  const double w = x1 - x0;
  const double h = y1 - y0;
  const double a = w * h;
  const double cx = 0.5 * (x0 + x1);
  const double cy = 0.5 * (y0 + y1);
  return {a, a * cx, a * cy, a * (cx * cx + w * w / 12.0), a * (cy * cy + h * h / 12.0)};
}

}  // namespace sdot
