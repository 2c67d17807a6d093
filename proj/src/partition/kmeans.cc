#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "flowx/error.h"
#include "flowx/partition.h"
#include "flowx/random.h"

namespace flowx {
namespace {

double SquaredDistance(Point a, Point b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

size_t CountDistinct(std::span<const Point> points) {
  std::vector<std::pair<double, double>> v;
  v.reserve(points.size());
  for (const Point& p : points) v.emplace_back(p.x, p.y);
  std::sort(v.begin(), v.end());
  return static_cast<size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

std::vector<Point> PlusPlusInit(std::span<const Point> points, int k, Rng& rng) {
  std::vector<Point> centroids;
  centroids.reserve(k);
  centroids.push_back(points[rng.UniformIndex(points.size())]);
  std::vector<double> d2(points.size());
  for (size_t i = 0; i < points.size(); ++i) d2[i] = SquaredDistance(points[i], centroids[0]);
  while (static_cast<int>(centroids.size()) < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    const double target = rng.Uniform() * total;
    double acc = 0.0;
    size_t pick = points.size();
    for (size_t i = 0; i < points.size(); ++i) {
      if (d2[i] <= 0.0) continue;
      acc += d2[i];
      pick = i;
      if (acc > target) break;
    }
    centroids.push_back(points[pick]);
    for (size_t i = 0; i < points.size(); ++i) {
      d2[i] = std::min(d2[i], SquaredDistance(points[i], centroids.back()));
    }
  }
  return centroids;
}

// Nearest centroid, ties to the lower index.
std::vector<int> Assign(std::span<const Point> points, const std::vector<Point>& centroids) {
  std::vector<int> labels(points.size());
  for (size_t i = 0; i < points.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (size_t c = 0; c < centroids.size(); ++c) {
      const double d = SquaredDistance(points[i], centroids[c]);
      if (d < best) {
        best = d;
        arg = static_cast<int>(c);
      }
    }
    labels[i] = arg;
  }
  return labels;
}

double Cost(std::span<const Point> points, const std::vector<int>& labels,
            const std::vector<Point>& centroids) {
  double cost = 0.0;
  for (size_t i = 0; i < points.size(); ++i) cost += SquaredDistance(points[i], centroids[labels[i]]);
  return cost;
}

std::vector<Point> Means(std::span<const Point> points, const std::vector<int>& labels, int k,
                         std::vector<int>& counts) {
  std::vector<Point> sums(k);
  counts.assign(k, 0);
  for (size_t i = 0; i < points.size(); ++i) {
    sums[labels[i]].x += points[i].x;
    sums[labels[i]].y += points[i].y;
    ++counts[labels[i]];
  }
  for (int c = 0; c < k; ++c) {
    if (counts[c] > 0) sums[c] = {sums[c].x / counts[c], sums[c].y / counts[c]};
  }
  return sums;
}

// Moves the farthest point of the largest cluster (with non-zero spread) into
// each empty cluster. Returns the number of repairs.
int RepairEmpty(std::span<const Point> points, std::vector<int>& labels,
                std::vector<Point>& centroids, std::vector<int>& counts) {
  const int k = static_cast<int>(centroids.size());
  int repairs = 0;
  for (int empty = 0; empty < k; ++empty) {
    if (counts[empty] > 0) continue;
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return counts[a] > counts[b]; });
    for (int donor : order) {
      if (counts[donor] < 2) break;
      size_t far = points.size();
      double far_d = 0.0;
      for (size_t i = 0; i < points.size(); ++i) {
        if (labels[i] != donor) continue;
        const double d = SquaredDistance(points[i], centroids[donor]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == points.size()) continue;
      labels[far] = empty;
      counts[empty] = 1;
      --counts[donor];
      centroids[empty] = points[far];
      Point sum{};
      for (size_t i = 0; i < points.size(); ++i) {
        if (labels[i] != donor) continue;
        sum.x += points[i].x;
        sum.y += points[i].y;
      }
      centroids[donor] = {sum.x / counts[donor], sum.y / counts[donor]};
      ++repairs;
      break;
    }
  }
  return repairs;
}

}  // namespace

KMeansResult KMeans(std::span<const Point> points, int k, uint64_t seed, int max_iter) {
  if (points.empty()) throw Error(ErrorKind::kConfig, "k-means needs at least one point");
  if (k < 1) throw Error(ErrorKind::kConfig, "k must be positive");
  if (max_iter < 1) throw Error(ErrorKind::kConfig, "max_iter must be positive");
  const size_t distinct = CountDistinct(points);
  if (static_cast<size_t>(k) > distinct) {
    throw Error(ErrorKind::kConfig, "k exceeds the number of distinct points",
                "k=" + std::to_string(k) + " distinct=" + std::to_string(distinct));
  }

  Rng rng(seed);
  KMeansResult result;
  result.centroids = PlusPlusInit(points, k, rng);
  result.labels = Assign(points, result.centroids);
  result.inertia_history.push_back(Cost(points, result.labels, result.centroids));

  bool converged = false;
  std::vector<int> counts;
  for (int it = 1; it <= max_iter; ++it) {
    result.centroids = Means(points, result.labels, k, counts);
    result.empty_cluster_repairs += RepairEmpty(points, result.labels, result.centroids, counts);
    std::vector<int> next = Assign(points, result.centroids);
    result.inertia_history.push_back(Cost(points, next, result.centroids));
    result.iterations = it;
    const bool changed = next != result.labels;
    result.labels = std::move(next);
    if (!changed) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    result.centroids = Means(points, result.labels, k, counts);
    result.empty_cluster_repairs += RepairEmpty(points, result.labels, result.centroids, counts);
    result.inertia_history.push_back(Cost(points, result.labels, result.centroids));
  }
  result.inertia = result.inertia_history.back();
  return result;
}

}  // namespace flowx
