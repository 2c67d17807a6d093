#ifndef FLOWX_TRAJDATA_H_
#define FLOWX_TRAJDATA_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "flowx/geo.h"

namespace flowx {

struct TrajectoryPoint {
  int64_t t = 0;  // epoch seconds
  double lon = 0.0;
  double lat = 0.0;
  bool operator==(const TrajectoryPoint&) const = default;
};

// One trip. Points are strictly increasing in time.
struct TrajectoryRecord {
  std::string vehicle_id;
  std::string order_id;
  std::vector<TrajectoryPoint> points;
  bool operator==(const TrajectoryRecord&) const = default;
};

struct TimeRange {
  int64_t t_min = 0;
  int64_t t_max = 0;
  bool operator==(const TimeRange&) const = default;
};

// Records sorted by order id. time_range is empty iff there are no points.
class TrajectoryStore {
 public:
  TrajectoryStore() = default;
  // Sorts records by order id and validates the record invariants.
  explicit TrajectoryStore(std::vector<TrajectoryRecord> records);

  const std::vector<TrajectoryRecord>& records() const { return records_; }
  size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::optional<TimeRange>& time_range() const { return time_range_; }

  // Index of the record with this order id, if present.
  std::optional<size_t> Find(const std::string& order_id) const;

 private:
  std::vector<TrajectoryRecord> records_;
  std::optional<TimeRange> time_range_;
};

struct ParseStats {
  size_t lines = 0;            // non-blank lines seen, header included
  size_t header_lines = 0;     // 0 or 1
  size_t malformed = 0;        // skipped lines
  size_t duplicate_points = 0; // same order id and timestamp; later one dropped
  std::string sample_malformed;
};

// Parses `driver_id,order_id,timestamp,lon,lat` lines. Malformed lines are
// skipped and counted; more than half malformed is a kFormat error.
TrajectoryStore ParseTrajectories(std::istream& in, ParseStats* stats = nullptr);
TrajectoryStore LoadTrajectories(const std::filesystem::path& path,
                                 ParseStats* stats = nullptr);
void WriteTrajectories(const TrajectoryStore& store, std::ostream& out);

// A maximal stay of a trajectory inside one grid cell.
struct CellVisit {
  CellIndex cell;
  double enter_t = 0.0;
  double exit_t = 0.0;
  bool entered_from_outside = false;  // the visit starts at a box crossing
  bool exits_to_outside = false;      // the visit ends at a box crossing
  bool operator==(const CellVisit&) const = default;
};

struct CellSequenceStats {
  size_t outside_points = 0;
  size_t outside_segments = 0;  // segments that never touch the box
};

// Walks the straight segments between consecutive fixes through the grid.
// Crossing times are linearly interpolated along each segment. Consecutive
// visits are in distinct cells unless separated by an excursion outside the
// box.
std::vector<CellVisit> CellSequence(const TrajectoryRecord& record, const GridSpec& grid,
                                    CellSequenceStats* stats = nullptr);

enum class FlowDirection { kIn, kOut };

struct CrossingEvent {
  CellIndex cell;
  double t = 0.0;
  FlowDirection direction = FlowDirection::kIn;
};

// Inflow/outflow events implied by a record's cell sequence, in time order.
// A cell-to-cell transition yields an out event for the departed cell and an
// in event for the entered cell; box entries and exits yield only the in-box
// side.
std::vector<CrossingEvent> CrossingEvents(const TrajectoryRecord& record, const GridSpec& grid);

}  // namespace flowx

#endif  // FLOWX_TRAJDATA_H_
