#ifndef FLOWX_FLOW_TENSOR_H_
#define FLOWX_FLOW_TENSOR_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "flowx/geo.h"
#include "flowx/trajdata.h"

namespace flowx {

inline constexpr int kDefaultIntervalSeconds = 600;

// In/out crossing counts per cell per interval. Interval i covers
// [t0 + i*interval_seconds, t0 + (i+1)*interval_seconds).
class FlowTensor {
 public:
  FlowTensor(GridSpec grid, int interval_seconds, int64_t t0, int n_intervals);

  const GridSpec& grid() const { return grid_; }
  int rows() const { return grid_.rows(); }
  int cols() const { return grid_.cols(); }
  int interval_seconds() const { return interval_seconds_; }
  int64_t t0() const { return t0_; }
  int n_intervals() const { return n_intervals_; }

  uint32_t inflow(int interval, CellIndex c) const { return inflow_[Index(interval, c)]; }
  uint32_t outflow(int interval, CellIndex c) const { return outflow_[Index(interval, c)]; }
  uint32_t& inflow(int interval, CellIndex c) { return inflow_[Index(interval, c)]; }
  uint32_t& outflow(int interval, CellIndex c) { return outflow_[Index(interval, c)]; }

  // Flat [interval][row][col] storage.
  const std::vector<uint32_t>& inflow_data() const { return inflow_; }
  const std::vector<uint32_t>& outflow_data() const { return outflow_; }

  // Interval containing time t, or nullopt outside [t0, t0 + n*interval).
  std::optional<int> IntervalOf(double t) const;
  int64_t IntervalStart(int interval) const {
    return t0_ + static_cast<int64_t>(interval) * interval_seconds_;
  }

  uint64_t TotalInflow() const;
  uint64_t TotalOutflow() const;

  bool operator==(const FlowTensor& o) const = default;

  // Flat binary layout: "TPFT", u32 version, u32 rows, u32 cols,
  // u32 n_intervals, u32 interval_seconds, i64 t0, then inflow and outflow as
  // little-endian u32 in [interval][row][col] order.
  void Write(std::ostream& out) const;
  void Save(const std::filesystem::path& path) const;
  // The header dimensions must match `grid`.
  static FlowTensor Read(std::istream& in, const GridSpec& grid);
  static FlowTensor Load(const std::filesystem::path& path, const GridSpec& grid);

 private:
  size_t Index(int interval, CellIndex c) const {
    return static_cast<size_t>(interval) * grid_.cell_count() + grid_.Flat(c);
  }

  GridSpec grid_;
  int interval_seconds_;
  int64_t t0_;
  int n_intervals_;
  std::vector<uint32_t> inflow_;
  std::vector<uint32_t> outflow_;
};

struct RasterStats {
  uint64_t in_events = 0;          // counted inflow events
  uint64_t out_events = 0;         // counted outflow events
  uint64_t entries_from_outside = 0;
  uint64_t exits_to_outside = 0;
  uint64_t dropped_out_of_range = 0;  // events outside the tensor time span
  uint64_t outside_segments = 0;
};

FlowTensor BuildFlowTensor(const TrajectoryStore& store, const GridSpec& grid,
                           int interval_seconds, int64_t t0, int n_intervals,
                           RasterStats* stats = nullptr);

}  // namespace flowx

#endif  // FLOWX_FLOW_TENSOR_H_
