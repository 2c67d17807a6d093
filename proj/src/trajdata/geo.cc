#include "flowx/geo.h"

#include <cmath>
#include <numbers>
#include <string>

#include "flowx/error.h"

namespace flowx {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

LocalProjection::LocalProjection(double lon_center, double lat_center)
    : lon_c_(lon_center), lat_c_(lat_center), cos_lat_c_(std::cos(lat_center * kDegToRad)) {}

Point LocalProjection::Forward(double lon, double lat) const {
  return {kEarthRadiusMeters * (lon - lon_c_) * kDegToRad * cos_lat_c_,
          kEarthRadiusMeters * (lat - lat_c_) * kDegToRad};
}

std::pair<double, double> LocalProjection::Inverse(Point p) const {
  return {lon_c_ + p.x / (kEarthRadiusMeters * kDegToRad * cos_lat_c_),
          lat_c_ + p.y / (kEarthRadiusMeters * kDegToRad)};
}

GridSpec::GridSpec(BoundingBox bbox, int rows, int cols) : bbox_(bbox), rows_(rows), cols_(cols) {
  if (!(bbox.lon_min < bbox.lon_max) || !(bbox.lat_min < bbox.lat_max)) {
    throw Error(ErrorKind::kConfig, "grid bounding box has zero area",
                "lon [" + std::to_string(bbox.lon_min) + ", " + std::to_string(bbox.lon_max) +
                    "], lat [" + std::to_string(bbox.lat_min) + ", " +
                    std::to_string(bbox.lat_max) + "]");
  }
  if (bbox.lon_min < -180 || bbox.lon_max > 180 || bbox.lat_min < -90 || bbox.lat_max > 90) {
    throw Error(ErrorKind::kConfig, "grid bounding box outside lon/lat range");
  }
  if (rows < 1 || cols < 1) {
    throw Error(ErrorKind::kConfig, "grid needs at least one row and one column");
  }
  projection_ = LocalProjection(0.5 * (bbox.lon_min + bbox.lon_max),
                                0.5 * (bbox.lat_min + bbox.lat_max));
}

std::pair<double, double> GridSpec::ToGrid(double lon, double lat) const {
  return {(lon - bbox_.lon_min) / (bbox_.lon_max - bbox_.lon_min) * cols_,
          (lat - bbox_.lat_min) / (bbox_.lat_max - bbox_.lat_min) * rows_};
}

bool GridSpec::Contains(double lon, double lat) const {
  return lon >= bbox_.lon_min && lon <= bbox_.lon_max && lat >= bbox_.lat_min &&
         lat <= bbox_.lat_max;
}

Rect GridSpec::PlanarBox() const {
  const Point lo = ToPlanar(bbox_.lon_min, bbox_.lat_min);
  const Point hi = ToPlanar(bbox_.lon_max, bbox_.lat_max);
  return {lo.x, lo.y, hi.x, hi.y};
}

std::pair<double, double> GridSpec::CellCenterLonLat(CellIndex c) const {
  const double lon = bbox_.lon_min + (c.col + 0.5) / cols_ * (bbox_.lon_max - bbox_.lon_min);
  const double lat = bbox_.lat_min + (c.row + 0.5) / rows_ * (bbox_.lat_max - bbox_.lat_min);
  return {lon, lat};
}

Point GridSpec::CellCenter(CellIndex c) const {
  const auto [lon, lat] = CellCenterLonLat(c);
  return ToPlanar(lon, lat);
}

}  // namespace flowx
