#include "flowx/polygon.h"

#include <algorithm>
#include <cmath>

namespace flowx {
namespace {

double Cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace

double SignedArea(std::span<const Point> ring) {
  const size_t n = ring.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const Point& a = ring[i];
    const Point& b = ring[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

Polygon RectPolygon(const Rect& r) {
  return {{r.x_min, r.y_min}, {r.x_max, r.y_min}, {r.x_max, r.y_max}, {r.x_min, r.y_max}};
}

Polygon ClipHalfPlane(const Polygon& poly, Point origin, Point normal) {
  Polygon out;
  const size_t n = poly.size();
  if (n == 0) return out;
  out.reserve(n + 1);
  auto side = [&](Point p) { return normal.x * (p.x - origin.x) + normal.y * (p.y - origin.y); };
  for (size_t i = 0; i < n; ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % n];
    const double sa = side(a);
    const double sb = side(b);
    if (sa <= 0.0) out.push_back(a);
    if ((sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0)) {
      const double s = sa / (sa - sb);
      out.push_back({a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)});
    }
  }
  // Drop consecutive duplicates left by vertices lying on the line.
  Polygon cleaned;
  cleaned.reserve(out.size());
  for (const Point& p : out) {
    if (cleaned.empty() || !(cleaned.back() == p)) cleaned.push_back(p);
  }
  while (cleaned.size() > 1 && cleaned.front() == cleaned.back()) cleaned.pop_back();
  if (cleaned.size() < 3) cleaned.clear();
  return cleaned;
}

bool ConvexContains(const Polygon& poly, Point p, double tol) {
  const size_t n = poly.size();
  if (n < 3) return false;
  for (size_t i = 0; i < n; ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % n];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    if (len == 0.0) continue;
    // Signed distance of p to the left of edge a->b.
    if (Cross(a, b, p) / len < -tol) return false;
  }
  return true;
}

bool RingContains(std::span<const Point> ring, Point p) {
  bool inside = false;
  const size_t n = ring.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = ring[i];
    const Point& b = ring[j];
    if ((a.y > p.y) != (b.y > p.y) &&
        p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) {
      inside = !inside;
    }
  }
  return inside;
}

double SharedBoundaryLength(const Polygon& a, const Polygon& b, double line_tol) {
  double total = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const Point& p0 = a[i];
    const Point& p1 = a[(i + 1) % a.size()];
    const double len = std::hypot(p1.x - p0.x, p1.y - p0.y);
    if (len == 0.0) continue;
    const double ux = (p1.x - p0.x) / len;
    const double uy = (p1.y - p0.y) / len;
    for (size_t j = 0; j < b.size(); ++j) {
      const Point& q0 = b[j];
      const Point& q1 = b[(j + 1) % b.size()];
      // Perpendicular distances of q0, q1 from the line through p0, p1.
      const double d0 = (q0.x - p0.x) * uy - (q0.y - p0.y) * ux;
      const double d1 = (q1.x - p0.x) * uy - (q1.y - p0.y) * ux;
      if (std::abs(d0) > line_tol || std::abs(d1) > line_tol) continue;
      const double t0 = (q0.x - p0.x) * ux + (q0.y - p0.y) * uy;
      const double t1 = (q1.x - p0.x) * ux + (q1.y - p0.y) * uy;
      if (t1 >= t0) continue;  // not antiparallel
      const double lo = std::max(0.0, t1);
      const double hi = std::min(len, t0);
      if (hi > lo) total += hi - lo;
    }
  }
  return total;
}

}  // namespace flowx
