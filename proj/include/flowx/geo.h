#ifndef FLOWX_GEO_H_
#define FLOWX_GEO_H_

#include <compare>
#include <cstddef>
#include <utility>

namespace flowx {

// Planar coordinates in meters from the local projection origin.
struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

struct Rect {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  double Area() const { return (x_max - x_min) * (y_max - y_min); }
};

struct BoundingBox {
  double lon_min = 0.0;
  double lat_min = 0.0;
  double lon_max = 0.0;
  double lat_max = 0.0;
  bool operator==(const BoundingBox&) const = default;
};

// Equirectangular projection about a reference point:
//   x = R * dlon * cos(lat_c),  y = R * dlat   (angles in radians).
class LocalProjection {
 public:
  static constexpr double kEarthRadiusMeters = 6371008.8;

  LocalProjection() = default;
  LocalProjection(double lon_center, double lat_center);

  Point Forward(double lon, double lat) const;
  std::pair<double, double> Inverse(Point p) const;  // (lon, lat)

 private:
  double lon_c_ = 0.0;
  double lat_c_ = 0.0;
  double cos_lat_c_ = 1.0;
};

struct CellIndex {
  int row = 0;
  int col = 0;
  auto operator<=>(const CellIndex&) const = default;
};

// A rows x cols raster over a lon/lat box. Row 0 is the southern edge and
// col 0 the western edge; cells are half-open except on the northern and
// eastern box edges, which belong to the last row/col.
class GridSpec {
 public:
  // Throws Error(kConfig) for an empty box or non-positive dimensions.
  GridSpec(BoundingBox bbox, int rows, int cols);

  const BoundingBox& bbox() const { return bbox_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t cell_count() const { return static_cast<size_t>(rows_) * cols_; }
  const LocalProjection& projection() const { return projection_; }

  size_t Flat(CellIndex c) const { return static_cast<size_t>(c.row) * cols_ + c.col; }
  CellIndex Unflat(size_t i) const {
    return {static_cast<int>(i / cols_), static_cast<int>(i % cols_)};
  }
  bool Valid(CellIndex c) const {
    return c.row >= 0 && c.row < rows_ && c.col >= 0 && c.col < cols_;
  }

  // Continuous grid coordinates: u in [0, cols] spans lon, v in [0, rows]
  // spans lat for points inside the box.
  std::pair<double, double> ToGrid(double lon, double lat) const;
  bool Contains(double lon, double lat) const;

  Point ToPlanar(double lon, double lat) const { return projection_.Forward(lon, lat); }
  Rect PlanarBox() const;
  Point CellCenter(CellIndex c) const;
  std::pair<double, double> CellCenterLonLat(CellIndex c) const;

  bool operator==(const GridSpec& o) const {
    return bbox_ == o.bbox_ && rows_ == o.rows_ && cols_ == o.cols_;
  }

 private:
  BoundingBox bbox_;
  int rows_;
  int cols_;
  LocalProjection projection_;
};

}  // namespace flowx

#endif  // FLOWX_GEO_H_
