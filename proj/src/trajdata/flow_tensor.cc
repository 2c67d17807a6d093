#include "flowx/flow_tensor.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include "flowx/error.h"

namespace flowx {
namespace {

constexpr char kMagic[4] = {'T', 'P', 'F', 'T'};
constexpr uint32_t kVersion = 1;

template <typename T>
void PutLE(std::ostream& out, T value) {
  using U = std::make_unsigned_t<T>;
  U u = static_cast<U>(value);
  char buf[sizeof(T)];
  for (size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<char>(u & 0xff);
    u = static_cast<U>(u >> 8);
  }
  out.write(buf, sizeof(T));
}

template <typename T>
T GetLE(std::istream& in) {
  using U = std::make_unsigned_t<T>;
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw Error(ErrorKind::kFormat, "truncated flow tensor file");
  }
  U u = 0;
  for (size_t i = sizeof(T); i-- > 0;) u = static_cast<U>((u << 8) | buf[i]);
  return static_cast<T>(u);
}

}  // namespace

FlowTensor::FlowTensor(GridSpec grid, int interval_seconds, int64_t t0, int n_intervals)
    : grid_(std::move(grid)),
      interval_seconds_(interval_seconds),
      t0_(t0),
      n_intervals_(n_intervals) {
  if (interval_seconds <= 0) throw Error(ErrorKind::kConfig, "interval_seconds must be positive");
  if (n_intervals < 1) throw Error(ErrorKind::kConfig, "n_intervals must be at least 1");
  const size_t n = static_cast<size_t>(n_intervals) * grid_.cell_count();
  inflow_.assign(n, 0);
  outflow_.assign(n, 0);
}

std::optional<int> FlowTensor::IntervalOf(double t) const {
  const double rel = (t - static_cast<double>(t0_)) / interval_seconds_;
  if (!(rel >= 0.0)) return std::nullopt;
  const double idx = std::floor(rel);
  if (idx >= n_intervals_) return std::nullopt;
  return static_cast<int>(idx);
}

uint64_t FlowTensor::TotalInflow() const {
  return std::accumulate(inflow_.begin(), inflow_.end(), uint64_t{0});
}

uint64_t FlowTensor::TotalOutflow() const {
  return std::accumulate(outflow_.begin(), outflow_.end(), uint64_t{0});
}

void FlowTensor::Write(std::ostream& out) const {
  out.write(kMagic, 4);
  PutLE<uint32_t>(out, kVersion);
  PutLE<uint32_t>(out, static_cast<uint32_t>(rows()));
  PutLE<uint32_t>(out, static_cast<uint32_t>(cols()));
  PutLE<uint32_t>(out, static_cast<uint32_t>(n_intervals_));
  PutLE<uint32_t>(out, static_cast<uint32_t>(interval_seconds_));
  PutLE<int64_t>(out, t0_);
  for (uint32_t v : inflow_) PutLE<uint32_t>(out, v);
  for (uint32_t v : outflow_) PutLE<uint32_t>(out, v);
}

void FlowTensor::Save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kInput, "cannot write flow tensor", path.string());
  Write(out);
}

FlowTensor FlowTensor::Read(std::istream& in, const GridSpec& grid) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorKind::kFormat, "not a flow tensor file (bad magic)");
  }
  const auto version = GetLE<uint32_t>(in);
  if (version != kVersion) {
    throw Error(ErrorKind::kFormat, "unsupported flow tensor version " + std::to_string(version));
  }
  const auto rows = GetLE<uint32_t>(in);
  const auto cols = GetLE<uint32_t>(in);
  const auto n = GetLE<uint32_t>(in);
  const auto interval = GetLE<uint32_t>(in);
  const auto t0 = GetLE<int64_t>(in);
  if (static_cast<int>(rows) != grid.rows() || static_cast<int>(cols) != grid.cols()) {
    throw Error(ErrorKind::kFormat, "flow tensor grid does not match the configured grid");
  }
  FlowTensor tensor(grid, static_cast<int>(interval), t0, static_cast<int>(n));
  for (uint32_t& v : tensor.inflow_) v = GetLE<uint32_t>(in);
  for (uint32_t& v : tensor.outflow_) v = GetLE<uint32_t>(in);
  return tensor;
}

FlowTensor FlowTensor::Load(const std::filesystem::path& path, const GridSpec& grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kMissingArtifact, "flow tensor not found", path.string());
  return Read(in, grid);
}

FlowTensor BuildFlowTensor(const TrajectoryStore& store, const GridSpec& grid,
                           int interval_seconds, int64_t t0, int n_intervals,
                           RasterStats* stats) {
  FlowTensor tensor(grid, interval_seconds, t0, n_intervals);
  RasterStats local;
  RasterStats& st = stats ? *stats : local;
  st = RasterStats{};
  for (const TrajectoryRecord& record : store.records()) {
    CellSequenceStats seq_stats;
    const std::vector<CellVisit> visits = CellSequence(record, grid, &seq_stats);
    st.outside_segments += seq_stats.outside_segments;
    for (const CellVisit& v : visits) {
      st.entries_from_outside += v.entered_from_outside;
      st.exits_to_outside += v.exits_to_outside;
    }
    for (const CrossingEvent& e : CrossingEvents(record, grid)) {
      const std::optional<int> interval = tensor.IntervalOf(e.t);
      if (!interval) {
        ++st.dropped_out_of_range;
        continue;
      }
      if (e.direction == FlowDirection::kIn) {
        ++tensor.inflow(*interval, e.cell);
        ++st.in_events;
      } else {
        ++tensor.outflow(*interval, e.cell);
        ++st.out_events;
      }
    }
  }
  return tensor;
}

}  // namespace flowx
