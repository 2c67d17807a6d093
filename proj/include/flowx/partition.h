#ifndef FLOWX_PARTITION_H_
#define FLOWX_PARTITION_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "flowx/geo.h"
#include <json.hpp>
#include "flowx/polygon.h"

namespace flowx {

inline constexpr int kDefaultClusterCount = 21;
inline constexpr int kDefaultGridRows = 20;
inline constexpr int kDefaultGridCols = 20;

// ---------------------------------------------------------------------------
// k-means

struct KMeansResult {
  std::vector<int> labels;
  std::vector<Point> centroids;
  double inertia = 0.0;
  // Within-cluster squared distance after the initial assignment and after
  // every Lloyd step. Non-increasing.
  std::vector<double> inertia_history;
  int iterations = 0;
  int empty_cluster_repairs = 0;
};

// Lloyd iterations from a seeded k-means++ start. Stops after max_iter steps
// or when assignments stop changing. An emptied cluster takes the point of the
// largest cluster farthest from its centroid.
KMeansResult KMeans(std::span<const Point> points, int k, uint64_t seed, int max_iter = 300);

// ---------------------------------------------------------------------------
// Voronoi

struct VoronoiDiagram {
  // cells[i] is the bbox-clipped region of site i. A site that repeats an
  // earlier one gets an empty polygon; canonical[i] names the first copy.
  std::vector<Polygon> cells;
  std::vector<int> canonical;
  int duplicates = 0;
};

// Half-plane intersection per site against the box.
VoronoiDiagram VoronoiRegions(std::span<const Point> sites, const Rect& box);

// ---------------------------------------------------------------------------
// Cluster regions

struct ClusterRegion {
  int cluster = 0;
  std::vector<int> members;      // site indices, ascending
  std::vector<Polygon> pieces;   // member Voronoi cells
  std::vector<Polygon> rings;    // merged boundary; outer rings CCW, holes CW
  double area = 0.0;             // sum of piece areas
};

// Region of cluster c = union of the Voronoi cells of its member sites.
std::vector<ClusterRegion> ClusterRegions(std::span<const int> labels, int k,
                                          const VoronoiDiagram& voronoi);

// Cluster id per cell (row-major) by containment of the cell centroid. A
// centroid on a shared edge goes to the cluster with the nearest member site,
// ties to the lower cluster id.
std::vector<int> AssignGrids(const GridSpec& grid, std::span<const ClusterRegion> regions,
                             std::span<const Point> sites);

// Symmetric, irreflexive neighbor sets: clusters whose regions share boundary
// longer than `min_shared_length` planar units.
std::vector<std::vector<int>> ClusterAdjacency(std::span<const ClusterRegion> regions,
                                               double min_shared_length = 1e-9);

// ---------------------------------------------------------------------------
// Full partition

struct Intersection {
  std::string id;
  double lon = 0.0;
  double lat = 0.0;
};

// Parses `node_id,lon,lat` lines; a non-numeric first line is a header.
std::vector<Intersection> ParseIntersections(std::istream& in);
std::vector<Intersection> LoadIntersections(const std::filesystem::path& path);

struct PartitionOptions {
  int k = kDefaultClusterCount;
  uint64_t seed = 0;
  int max_iter = 300;
};

struct ClusterPartition {
  int k = 0;
  std::vector<std::string> site_ids;
  std::vector<Point> sites;           // planar intersection coordinates
  std::vector<int> labels;            // per site
  std::vector<Point> centroids;       // per cluster
  double inertia = 0.0;
  std::vector<ClusterRegion> regions; // per cluster
  std::vector<int> grid_assignment;   // per cell, row-major
  std::vector<std::vector<int>> adjacency;

  int ClusterOfCell(size_t flat_cell) const { return grid_assignment[flat_cell]; }
  // Flat cell indices of cluster c, ascending.
  std::vector<int> CellsOfCluster(int c) const;
};

// Projects the intersections inside the grid box and builds clusters,
// regions, grid assignment and adjacency.
ClusterPartition BuildPartition(std::span<const Intersection> intersections,
                                const GridSpec& grid, const PartitionOptions& options);

nlohmann::json PartitionToJson(const ClusterPartition& partition, const GridSpec& grid);
// Restores everything except the per-site Voronoi pieces.
ClusterPartition PartitionFromJson(const nlohmann::json& doc);

void SavePartition(const ClusterPartition& partition, const GridSpec& grid,
                   const std::filesystem::path& path);
ClusterPartition LoadPartition(const std::filesystem::path& path);

}  // namespace flowx

#endif  // FLOWX_PARTITION_H_
