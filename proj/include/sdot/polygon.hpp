#pragma once

// Convex polygon clipping and exact polynomial moments, used by the 2-D
// Laguerre backend.

#include <array>
#include <vector>

namespace sdot {

using Point2 = std::array<double, 2>;

/// Convex polygon as a counter-clockwise vertex list.
using Polygon = std::vector<Point2>;

/// Integrals of 1, x, y, x^2, y^2 over a region.
struct Moments {
  double area = 0.0;
  double mx = 0.0;
  double my = 0.0;
  double mxx = 0.0;
  double myy = 0.0;

  Moments& operator+=(const Moments& o) {
    area += o.area;
    mx += o.mx;
    my += o.my;
    mxx += o.mxx;
    myy += o.myy;
    return *this;
  }
  Moments scaled(double s) const { return {area * s, mx * s, my * s, mxx * s, myy * s}; }
};

Polygon rectangle(double x0, double x1, double y0, double y1);

/// Keeps the part of `poly` where n.x <= offset.
Polygon clip_halfplane(const Polygon& poly, const Point2& normal, double offset);

/// Keeps the part with lo <= coordinate[axis] <= hi. Vertices created on the
/// clip lines carry the clip value exactly.
Polygon clip_slab(const Polygon& poly, int axis, double lo, double hi);

double polygon_area(const Polygon& poly);

/// Exact moments of a simple polygon by the divergence theorem.
Moments polygon_moments(const Polygon& poly);

/// Moments of the axis-aligned rectangle [x0,x1] x [y0,y1].
Moments rectangle_moments(double x0, double x1, double y0, double y1);

}  // namespace sdot
