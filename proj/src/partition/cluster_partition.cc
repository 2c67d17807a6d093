#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <string_view>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "flowx/error.h"
#include "flowx/partition.h"

namespace flowx {
namespace {

// Merges vertices closer than `tol` so that edges shared by neighboring cells
// get identical endpoint ids.
class VertexPool {
 public:
  explicit VertexPool(double tol) : tol_(tol) {}

  int Intern(Point p) {
    const int64_t bx = static_cast<int64_t>(std::floor(p.x / tol_));
    const int64_t by = static_cast<int64_t>(std::floor(p.y / tol_));
    for (int64_t dx = -1; dx <= 1; ++dx) {
      for (int64_t dy = -1; dy <= 1; ++dy) {
        auto it = buckets_.find(Key(bx + dx, by + dy));
        if (it == buckets_.end()) continue;
        for (int id : it->second) {
          if (std::abs(points_[id].x - p.x) <= tol_ && std::abs(points_[id].y - p.y) <= tol_) {
            return id;
          }
        }
      }
    }
    const int id = static_cast<int>(points_.size());
    points_.push_back(p);
    buckets_[Key(bx, by)].push_back(id);
    return id;
  }

  Point at(int id) const { return points_[id]; }

 private:
  static uint64_t Key(int64_t x, int64_t y) {
    return (static_cast<uint64_t>(x) * 0x9E3779B97F4A7C15ULL) ^ static_cast<uint64_t>(y);
  }

  double tol_;
  std::vector<Point> points_;
  std::unordered_map<uint64_t, std::vector<int>> buckets_;
};

double Cross(Point o, Point a, Point b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Drops vertices where the ring continues straight on.
Polygon DropCollinear(const Polygon& ring) {
  Polygon out = ring;
  bool changed = true;
  while (changed && out.size() > 3) {
    changed = false;
    for (size_t i = 0; i < out.size() && out.size() > 3; ++i) {
      const Point& prev = out[(i + out.size() - 1) % out.size()];
      const Point& cur = out[i];
      const Point& next = out[(i + 1) % out.size()];
      const double l1 = std::hypot(cur.x - prev.x, cur.y - prev.y);
      const double l2 = std::hypot(next.x - cur.x, next.y - cur.y);
      const double dot = (cur.x - prev.x) * (next.x - cur.x) + (cur.y - prev.y) * (next.y - cur.y);
      if (l1 == 0.0 || l2 == 0.0 ||
          (std::abs(Cross(prev, cur, next)) <= 1e-12 * l1 * l2 && dot > 0.0)) {
        out.erase(out.begin() + static_cast<long>(i));
        changed = true;
      }
    }
  }
  return out;
}

// Boundary of a union of tiles: directed edges whose reverse is not present,
// chained into rings.
std::vector<Polygon> MergeRings(const std::vector<Polygon>& pieces, double tol) {
  VertexPool pool(tol);
  std::map<std::pair<int, int>, int> edges;
  for (const Polygon& piece : pieces) {
    const size_t n = piece.size();
    std::vector<int> ids(n);
    for (size_t i = 0; i < n; ++i) ids[i] = pool.Intern(piece[i]);
    for (size_t i = 0; i < n; ++i) {
      const int a = ids[i];
      const int b = ids[(i + 1) % n];
      if (a == b) continue;
      auto rev = edges.find({b, a});
      if (rev != edges.end()) {
        if (--rev->second == 0) edges.erase(rev);
      } else {
        ++edges[{a, b}];
      }
    }
  }

  std::multimap<int, int> outgoing;
  for (const auto& [e, count] : edges) {
    for (int c = 0; c < count; ++c) outgoing.emplace(e.first, e.second);
  }

  std::vector<Polygon> rings;
  while (!outgoing.empty()) {
    auto it = outgoing.begin();
    const int start = it->first;
    int prev = start;
    int cur = it->second;
    outgoing.erase(it);
    Polygon ring{pool.at(start)};
    size_t guard = 0;
    while (cur != start && ++guard < 1000000) {
      ring.push_back(pool.at(cur));
      auto [lo, hi] = outgoing.equal_range(cur);
      if (lo == hi) break;  // open chain; cannot happen for a proper tiling
      // At pinch vertices take the most clockwise continuation.
      auto best = lo;
      double best_angle = std::numeric_limits<double>::infinity();
      const Point a = pool.at(prev);
      const Point b = pool.at(cur);
      for (auto c = lo; c != hi; ++c) {
        const Point d = pool.at(c->second);
        const double angle = std::atan2(Cross(a, b, d),
                                        (b.x - a.x) * (d.x - b.x) + (b.y - a.y) * (d.y - b.y));
        if (angle < best_angle) {
          best_angle = angle;
          best = c;
        }
      }
      prev = cur;
      cur = best->second;
      outgoing.erase(best);
    }
    Polygon simplified = DropCollinear(ring);
    if (simplified.size() >= 3) rings.push_back(std::move(simplified));
  }
  // Outer rings first, then by first vertex, for a stable document order.
  std::sort(rings.begin(), rings.end(), [](const Polygon& a, const Polygon& b) {
    const double aa = SignedArea(a);
    const double ab = SignedArea(b);
    if ((aa > 0) != (ab > 0)) return aa > 0;
    return std::make_pair(a.front().x, a.front().y) < std::make_pair(b.front().x, b.front().y);
  });
  return rings;
}

Rect Bounds(const Polygon& p) {
  Rect r{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
         -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const Point& v : p) {
    r.x_min = std::min(r.x_min, v.x);
    r.y_min = std::min(r.y_min, v.y);
    r.x_max = std::max(r.x_max, v.x);
    r.y_max = std::max(r.y_max, v.y);
  }
  return r;
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool ParseDouble(std::string_view s, double& v) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return !s.empty() && ec == std::errc() && ptr == s.data() + s.size();
}

nlohmann::json RingsJson(const std::vector<Polygon>& rings, const LocalProjection* proj) {
  nlohmann::json out = nlohmann::json::array();
  for (const Polygon& ring : rings) {
    nlohmann::json r = nlohmann::json::array();
    for (const Point& p : ring) {
      if (proj) {
        const auto [lon, lat] = proj->Inverse(p);
        r.push_back({lon, lat});
      } else {
        r.push_back({p.x, p.y});
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<ClusterRegion> ClusterRegions(std::span<const int> labels, int k,
                                          const VoronoiDiagram& voronoi) {
  if (labels.size() != voronoi.cells.size()) {
    throw Error(ErrorKind::kInput, "every Voronoi site needs a cluster label");
  }
  std::vector<ClusterRegion> regions(k);
  double scale = 1.0;
  for (const Polygon& cell : voronoi.cells) {
    for (const Point& p : cell) scale = std::max({scale, std::abs(p.x), std::abs(p.y)});
  }
  for (int c = 0; c < k; ++c) regions[c].cluster = c;
  for (size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || c >= k) throw Error(ErrorKind::kInput, "cluster label out of range");
    regions[c].members.push_back(static_cast<int>(i));
    if (!voronoi.cells[i].empty()) {
      regions[c].pieces.push_back(voronoi.cells[i]);
      regions[c].area += Area(voronoi.cells[i]);
    }
  }
  for (ClusterRegion& r : regions) r.rings = MergeRings(r.pieces, 1e-9 * scale);
  return regions;
}

std::vector<int> AssignGrids(const GridSpec& grid, std::span<const ClusterRegion> regions,
                             std::span<const Point> sites) {
  std::vector<int> assignment(grid.cell_count(), -1);
  std::vector<Rect> bounds;
  for (const ClusterRegion& r : regions) {
    for (const Polygon& piece : r.pieces) bounds.push_back(Bounds(piece));
  }
  for (size_t flat = 0; flat < grid.cell_count(); ++flat) {
    const Point p = grid.CellCenter(grid.Unflat(flat));
    std::vector<int> hits;
    size_t b = 0;
    for (const ClusterRegion& r : regions) {
      bool hit = false;
      for (const Polygon& piece : r.pieces) {
        const Rect& bb = bounds[b++];
        if (hit || p.x < bb.x_min - 1e-9 || p.x > bb.x_max + 1e-9 || p.y < bb.y_min - 1e-9 ||
            p.y > bb.y_max + 1e-9) {
          continue;
        }
        hit = ConvexContains(piece, p, 1e-9);
      }
      if (hit) hits.push_back(r.cluster);
    }
    if (hits.size() == 1) {
      assignment[flat] = hits.front();
      continue;
    }
    // On a shared edge (or in a numerical gap): nearest member site decides.
    std::vector<int> candidates = hits;
    if (candidates.empty()) {
      for (const ClusterRegion& r : regions) candidates.push_back(r.cluster);
    }
    double best = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (int c : candidates) {
      for (int m : regions[c].members) {
        const double d = std::hypot(sites[m].x - p.x, sites[m].y - p.y);
        if (d < best * (1.0 - 1e-12) || (d <= best * (1.0 + 1e-12) && c < arg)) {
          best = std::min(best, d);
          arg = c;
        }
      }
    }
    assignment[flat] = arg;
  }
  return assignment;
}

std::vector<std::vector<int>> ClusterAdjacency(std::span<const ClusterRegion> regions,
                                               double min_shared_length) {
  const size_t k = regions.size();
  std::vector<std::vector<Rect>> bounds(k);
  for (size_t c = 0; c < k; ++c) {
    for (const Polygon& piece : regions[c].pieces) bounds[c].push_back(Bounds(piece));
  }
  constexpr double kSlack = 1e-6;
  std::vector<std::vector<int>> adjacency(k);
  for (size_t a = 0; a < k; ++a) {
    for (size_t b = a + 1; b < k; ++b) {
      double shared = 0.0;
      for (size_t i = 0; i < regions[a].pieces.size() && shared <= min_shared_length; ++i) {
        const Rect& ra = bounds[a][i];
        for (size_t j = 0; j < regions[b].pieces.size(); ++j) {
          const Rect& rb = bounds[b][j];
          if (ra.x_max + kSlack < rb.x_min || rb.x_max + kSlack < ra.x_min ||
              ra.y_max + kSlack < rb.y_min || rb.y_max + kSlack < ra.y_min) {
            continue;
          }
          shared += SharedBoundaryLength(regions[a].pieces[i], regions[b].pieces[j]);
        }
      }
      if (shared > min_shared_length) {
        adjacency[a].push_back(static_cast<int>(b));
        adjacency[b].push_back(static_cast<int>(a));
      }
    }
  }
  for (auto& list : adjacency) std::sort(list.begin(), list.end());
  return adjacency;
}

std::vector<int> ClusterPartition::CellsOfCluster(int c) const {
  std::vector<int> cells;
  for (size_t i = 0; i < grid_assignment.size(); ++i) {
    if (grid_assignment[i] == c) cells.push_back(static_cast<int>(i));
  }
  return cells;
}

std::vector<Intersection> ParseIntersections(std::istream& in) {
  if (!in) throw Error(ErrorKind::kInput, "intersection source is not readable");
  std::vector<Intersection> out;
  std::string line;
  bool first = true;
  size_t malformed = 0;
  size_t lines = 0;
  std::string sample;
  while (std::getline(in, line)) {
    const std::string_view view = Trim(line);
    if (view.empty()) continue;
    const size_t c1 = view.find(',');
    const size_t c2 = c1 == std::string_view::npos ? c1 : view.find(',', c1 + 1);
    Intersection node;
    bool ok = c2 != std::string_view::npos && view.find(',', c2 + 1) == std::string_view::npos;
    if (ok) {
      node.id = std::string(Trim(view.substr(0, c1)));
      ok = ParseDouble(Trim(view.substr(c1 + 1, c2 - c1 - 1)), node.lon) &&
           ParseDouble(Trim(view.substr(c2 + 1)), node.lat) && !node.id.empty();
    }
    if (first) {
      first = false;
      if (!ok) continue;  // header
    }
    ++lines;
    if (!ok) {
      if (malformed++ == 0) sample = std::string(view);
      continue;
    }
    out.push_back(std::move(node));
  }
  if (lines > 0 && malformed * 2 > lines) {
    throw Error(ErrorKind::kFormat, "more than half of the intersection lines are malformed",
                sample);
  }
  return out;
}

std::vector<Intersection> LoadIntersections(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kInput, "cannot open intersection file", path.string());
  return ParseIntersections(in);
}

ClusterPartition BuildPartition(std::span<const Intersection> intersections,
                                const GridSpec& grid, const PartitionOptions& options) {
  ClusterPartition partition;
  partition.k = options.k;
  for (const Intersection& node : intersections) {
    if (!grid.Contains(node.lon, node.lat)) continue;
    partition.site_ids.push_back(node.id);
    partition.sites.push_back(grid.ToPlanar(node.lon, node.lat));
  }
  if (partition.sites.empty()) {
    throw Error(ErrorKind::kConfig, "no intersections inside the grid bounding box");
  }
  const size_t dropped = intersections.size() - partition.sites.size();
  if (dropped > 0) spdlog::info("partition: {} intersection(s) outside the box dropped", dropped);

  KMeansResult km = KMeans(partition.sites, options.k, options.seed, options.max_iter);
  partition.labels = std::move(km.labels);
  partition.centroids = std::move(km.centroids);
  partition.inertia = km.inertia;

  const VoronoiDiagram voronoi = VoronoiRegions(partition.sites, grid.PlanarBox());
  partition.regions = ClusterRegions(partition.labels, options.k, voronoi);
  partition.grid_assignment = AssignGrids(grid, partition.regions, partition.sites);
  partition.adjacency = ClusterAdjacency(partition.regions);
  return partition;
}

nlohmann::json PartitionToJson(const ClusterPartition& partition, const GridSpec& grid) {
  const LocalProjection& proj = grid.projection();
  nlohmann::json doc;
  doc["k"] = partition.k;
  const BoundingBox& b = grid.bbox();
  doc["grid"] = {{"bbox", {b.lon_min, b.lat_min, b.lon_max, b.lat_max}},
                 {"rows", grid.rows()},
                 {"cols", grid.cols()}};
  doc["inertia"] = partition.inertia;

  nlohmann::json labels = nlohmann::json::array();
  for (size_t i = 0; i < partition.sites.size(); ++i) {
    const auto [lon, lat] = proj.Inverse(partition.sites[i]);
    labels.push_back({{"id", partition.site_ids[i]},
                      {"cluster", partition.labels[i]},
                      {"x", partition.sites[i].x},
                      {"y", partition.sites[i].y},
                      {"lon", lon},
                      {"lat", lat}});
  }
  doc["labels"] = std::move(labels);

  nlohmann::json centroids = nlohmann::json::array();
  for (size_t c = 0; c < partition.centroids.size(); ++c) {
    const auto [lon, lat] = proj.Inverse(partition.centroids[c]);
    centroids.push_back({{"cluster", c},
                         {"x", partition.centroids[c].x},
                         {"y", partition.centroids[c].y},
                         {"lon", lon},
                         {"lat", lat}});
  }
  doc["centroids"] = std::move(centroids);

  nlohmann::json regions = nlohmann::json::array();
  for (const ClusterRegion& r : partition.regions) {
    regions.push_back({{"cluster", r.cluster},
                       {"area", r.area},
                       {"members", r.members},
                       {"rings", RingsJson(r.rings, nullptr)},
                       {"rings_lonlat", RingsJson(r.rings, &proj)}});
  }
  doc["regions"] = std::move(regions);

  nlohmann::json assignment = nlohmann::json::array();
  for (int row = 0; row < grid.rows(); ++row) {
    nlohmann::json line = nlohmann::json::array();
    for (int col = 0; col < grid.cols(); ++col) {
      line.push_back(partition.grid_assignment[grid.Flat({row, col})]);
    }
    assignment.push_back(std::move(line));
  }
  doc["grid_assignment"] = std::move(assignment);
  doc["adjacency"] = partition.adjacency;
  return doc;
}

ClusterPartition PartitionFromJson(const nlohmann::json& doc) {
  try {
    ClusterPartition p;
    p.k = doc.at("k").get<int>();
    p.inertia = doc.at("inertia").get<double>();
    for (const auto& l : doc.at("labels")) {
      p.site_ids.push_back(l.at("id").get<std::string>());
      p.labels.push_back(l.at("cluster").get<int>());
      p.sites.push_back({l.at("x").get<double>(), l.at("y").get<double>()});
    }
    for (const auto& c : doc.at("centroids")) {
      p.centroids.push_back({c.at("x").get<double>(), c.at("y").get<double>()});
    }
    for (const auto& r : doc.at("regions")) {
      ClusterRegion region;
      region.cluster = r.at("cluster").get<int>();
      region.area = r.at("area").get<double>();
      region.members = r.at("members").get<std::vector<int>>();
      for (const auto& ring : r.at("rings")) {
        Polygon poly;
        for (const auto& v : ring) poly.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
        region.rings.push_back(std::move(poly));
      }
      p.regions.push_back(std::move(region));
    }
    for (const auto& line : doc.at("grid_assignment")) {
      for (const auto& c : line) p.grid_assignment.push_back(c.get<int>());
    }
    p.adjacency = doc.at("adjacency").get<std::vector<std::vector<int>>>();
    if (static_cast<int>(p.centroids.size()) != p.k || static_cast<int>(p.regions.size()) != p.k ||
        static_cast<int>(p.adjacency.size()) != p.k) {
      throw Error(ErrorKind::kFormat, "partition document is inconsistent with k");
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, "malformed partition document", e.what());
  }
}

void SavePartition(const ClusterPartition& partition, const GridSpec& grid,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::kInput, "cannot write partition", path.string());
  out << PartitionToJson(partition, grid).dump(1) << '\n';
}

ClusterPartition LoadPartition(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kMissingArtifact, "partition not found", path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, "partition file is not valid JSON", e.what());
  }
  return PartitionFromJson(doc);
}

}  // namespace flowx
