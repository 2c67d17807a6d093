#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <spdlog/spdlog.h>

#include "flowx/error.h"
#include "flowx/partition.h"

namespace flowx {

VoronoiDiagram VoronoiRegions(std::span<const Point> sites, const Rect& box) {
  if (sites.empty()) throw Error(ErrorKind::kConfig, "Voronoi construction needs a site");
  VoronoiDiagram diagram;
  const size_t n = sites.size();
  diagram.cells.resize(n);
  diagram.canonical.resize(n);

  std::map<std::pair<double, double>, int> first_seen;
  std::vector<int> unique;
  for (size_t i = 0; i < n; ++i) {
    auto [it, inserted] = first_seen.emplace(std::make_pair(sites[i].x, sites[i].y), i);
    diagram.canonical[i] = it->second;
    if (inserted) {
      unique.push_back(static_cast<int>(i));
    } else {
      ++diagram.duplicates;
    }
  }
  if (diagram.duplicates > 0) {
    spdlog::warn("Voronoi: {} duplicate site(s) ignored", diagram.duplicates);
  }

  const Polygon box_poly = RectPolygon(box);
  std::vector<std::pair<double, int>> by_distance;
  by_distance.reserve(unique.size());
  for (int i : unique) {
    const Point s = sites[i];
    by_distance.clear();
    for (int j : unique) {
      if (j == i) continue;
      const double dx = sites[j].x - s.x;
      const double dy = sites[j].y - s.y;
      by_distance.emplace_back(std::sqrt(dx * dx + dy * dy), j);
    }
    std::sort(by_distance.begin(), by_distance.end());

    Polygon cell = box_poly;
    for (const auto& [dist, j] : by_distance) {
      // A bisector farther than the cell's radius cannot cut the cell.
      double radius = 0.0;
      for (const Point& v : cell) radius = std::max(radius, std::hypot(v.x - s.x, v.y - s.y));
      if (dist > 2.0 * radius) break;
      const Point other = sites[j];
      const Point mid{0.5 * (s.x + other.x), 0.5 * (s.y + other.y)};
      cell = ClipHalfPlane(cell, mid, {other.x - s.x, other.y - s.y});
      if (cell.empty()) break;
    }
    diagram.cells[i] = std::move(cell);
  }
  return diagram;
}

}  // namespace flowx
