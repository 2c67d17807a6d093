#ifndef FLOWX_POLYGON_H_
#define FLOWX_POLYGON_H_

#include <span>
#include <vector>

#include "flowx/geo.h"

namespace flowx {

// Simple polygon as a vertex ring without the closing repeat. Convex pieces
// produced by clipping are counter-clockwise.
using Polygon = std::vector<Point>;

// Signed shoelace area; positive for counter-clockwise rings.
double SignedArea(std::span<const Point> ring);
inline double Area(std::span<const Point> ring) {
  const double a = SignedArea(ring);
  return a < 0 ? -a : a;
}

Polygon RectPolygon(const Rect& r);

// Keeps the part of a convex polygon where dot(normal, p - origin) <= 0.
Polygon ClipHalfPlane(const Polygon& poly, Point origin, Point normal);

// Containment for a convex counter-clockwise polygon; points within `tol` of
// the boundary count as inside.
bool ConvexContains(const Polygon& poly, Point p, double tol = 1e-9);

// Even-odd containment for an arbitrary ring.
bool RingContains(std::span<const Point> ring, Point p);

// Length of boundary shared by two polygons: the summed overlap of
// antiparallel collinear edge pairs. `line_tol` is the collinearity distance.
double SharedBoundaryLength(const Polygon& a, const Polygon& b, double line_tol = 1e-6);

}  // namespace flowx

#endif  // FLOWX_POLYGON_H_
