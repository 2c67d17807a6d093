#ifndef FLOWX_EXPLAIN_H_
#define FLOWX_EXPLAIN_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "flowx/predict.h"
#include "flowx/shapley.h"
#include "flowx/trajdata.h"

namespace flowx {

// ---------------------------------------------------------------------------
// Maskers: values substituted for the inputs of absent players.

class Masker {
 public:
  virtual ~Masker() = default;
  virtual std::string_view name() const = 0;
  // Baseline frame for interval `interval`.
  virtual const FlowFrame& Baseline(int64_t interval) const = 0;
};

class ZeroMasker final : public Masker {
 public:
  ZeroMasker(int rows, int cols) : zero_(rows, cols) {}
  std::string_view name() const override { return "zero"; }
  const FlowFrame& Baseline(int64_t) const override { return zero_; }

 private:
  FlowFrame zero_;
};

// Per-cell mean over the training intervals that fall on the same
// time-of-day slot. The baseline of an interval never includes that interval
// itself; when no other training interval shares the slot, the
// training-period mean is used.
class HistoricalMeanMasker final : public Masker {
 public:
  HistoricalMeanMasker(std::span<const FlowFrame> frames, IntervalRange training, int64_t t0,
                       int interval_seconds);
  std::string_view name() const override { return "historical_mean"; }
  const FlowFrame& Baseline(int64_t interval) const override;
  int SlotOf(int64_t interval) const;

 private:
  int64_t t0_;
  int interval_seconds_;
  int slots_per_day_;
  std::vector<FlowFrame> slot_means_;    // intervals outside the frame span
  std::vector<FlowFrame> per_interval_;  // leave-one-out baselines for the frame span
};

// ---------------------------------------------------------------------------
// Games

enum class FlowChannel { kInflow, kOutflow };

// Everything a value function needs; all referenced objects must outlive the
// games built from it.
struct ExplainModel {
  std::span<const FlowFrame> frames;  // observed series
  const ClusterPartition* partition = nullptr;
  const Predictor* predictor = nullptr;
  const Masker* masker = nullptr;
  int64_t t0 = 0;
  int interval_seconds = 600;
};

// Players are the clusters adjacent to `cluster` (ids as decimal strings,
// ascending). v(S) is the predicted `channel` total over the cluster's cells
// at `horizon` when the window inputs of neighbors outside S are replaced by
// the masker baseline. Throws kDegenerate when the cluster has no neighbors.
CoalitionGame MakeClusterGame(const ExplainModel& model, int cluster, int base_interval,
                              int horizon, FlowChannel channel = FlowChannel::kInflow);

// Crossing events per trajectory record, computed once per store.
struct TrajectoryIndex {
  const TrajectoryStore* store = nullptr;
  std::vector<std::vector<CrossingEvent>> events;  // parallel to store->records()

  static TrajectoryIndex Build(const TrajectoryStore& store, const GridSpec& grid);
};

struct TrajectoryCandidate {
  size_t record = 0;
  std::string order_id;
  std::string vehicle_id;
  int event_count = 0;        // events in the locality during the window
  double last_event_t = 0.0;  // latest such event
};

struct GridGame {
  CellIndex cell;
  int base_interval = 0;
  int horizon = 0;
  std::vector<TrajectoryCandidate> candidates;  // player order
  CoalitionGame game;
};

inline constexpr int kDefaultCandidateCap = 12;

// Players are the trajectories with crossing events in the predictor's input
// locality of `cell` during the window, ranked by event count (ties by order
// id) and capped at `candidate_cap`. v(S) is the predicted inflow of `cell`
// at `horizon` with the window re-rasterized from the coalition plus every
// non-candidate trajectory.
GridGame MakeGridGame(const ExplainModel& model, const TrajectoryIndex& index, CellIndex cell,
                      int base_interval, int horizon, int candidate_cap = kDefaultCandidateCap);

// ---------------------------------------------------------------------------
// Summaries

inline constexpr int kSectorCount = 8;
inline constexpr std::array<std::string_view, kSectorCount> kSectorNames = {
    "N", "NE", "E", "SE", "S", "SW", "W", "NW"};

struct SectorMagnitude {
  double positive = 0.0;
  double negative = 0.0;  // magnitude of the negative contributions
};
using Sectors = std::array<SectorMagnitude, kSectorCount>;

// Compass sector of `to` seen from `from`: round(bearing / 45deg) mod 8 with
// the bearing measured clockwise from north.
int SectorOf(Point from, Point to);

// Accumulates neighbor attributions (cluster id, phi) into compass sectors
// around the cluster centroid, keeping positive and negative parts apart.
Sectors SectorSummary(std::span<const std::pair<int, double>> neighbor_phi,
                      const ClusterPartition& partition, int cluster);

inline constexpr int kGlyphPoints = 5;
inline constexpr int kDefaultInterpretedHorizon = 2;

struct GlyphSummary {
  int cluster = 0;
  std::array<double, kGlyphPoints> forecast_points{};  // horizons 1..5
  int highlighted_horizon = kDefaultInterpretedHorizon;  // 1-based
  Sectors sectors{};
  bool degenerate = false;
};

// forecast_points[h] is the summed predicted inflow of the cluster's cells at
// horizon h+1. `attributions[c]` holds the neighbor attributions of cluster c;
// `degenerate[c]` marks clusters without neighbors. Throws kConfig when the
// forecast has fewer than five horizons.
std::vector<GlyphSummary> GlyphSummaries(
    const ClusterPartition& partition, const Forecast& forecast,
    const std::vector<std::vector<std::pair<int, double>>>& attributions,
    const std::vector<bool>& degenerate, int highlighted_horizon = kDefaultInterpretedHorizon);

inline constexpr int kTopTrajectories = 5;
inline constexpr int kTimeChannels = 5;

struct TimeChannel {
  int lookback_begin_min = 0;
  int lookback_end_min = 0;
  double positive = 0.0;
  double negative = 0.0;  // magnitude
};

struct TrajectoryAttribution {
  Attribution attribution;
  TrajectoryCandidate candidate;
  int channel = 0;  // lookback bucket of the last window event
};

struct TrajectoryAttributionReport {
  CellIndex cell;
  int base_interval = 0;
  int horizon = 0;
  std::vector<TrajectoryAttribution> top;  // <= 5, by |phi| desc, ties by order id
  std::array<TimeChannel, kTimeChannels> time_channels{};
};

// Buckets each top trajectory by how long before `window_end_t` its last
// window event happened (10-minute slots for the default interval) and sums
// positive and negative phi per bucket. Zero attributions are not listed.
TrajectoryAttributionReport TimeChannelReport(const GridGame& game, const ShapleyResult& result,
                                              double window_end_t, int interval_seconds);

// ---------------------------------------------------------------------------
// JSON documents

nlohmann::json AttributionToJson(const Attribution& a);
// {"attributions": [...], "empty_value", "full_value", "evaluations", ...}
nlohmann::json ShapleyResultToJson(const ShapleyResult& result);
nlohmann::json GlyphToJson(const GlyphSummary& glyph, const ClusterPartition& partition,
                           const GridSpec& grid);
nlohmann::json ReportToJson(const TrajectoryAttributionReport& report);

}  // namespace flowx

#endif  // FLOWX_EXPLAIN_H_
