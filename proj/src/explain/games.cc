#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "flowx/error.h"
#include "flowx/explain.h"
#include "flowx/parallel.h"

namespace flowx {
namespace {

void CheckModel(const ExplainModel& model) {
  if (model.partition == nullptr || model.predictor == nullptr) {
    throw Error(ErrorKind::kState, "explain model needs a partition and a predictor");
  }
  if (model.interval_seconds <= 0) {
    throw Error(ErrorKind::kConfig, "interval_seconds must be positive");
  }
}

void CheckQuery(const ExplainModel& model, int base_interval, int horizon) {
  if (base_interval < kWindowLength - 1 ||
      base_interval >= static_cast<int>(model.frames.size())) {
    throw Error(ErrorKind::kInput,
                "base interval needs " + std::to_string(kWindowLength - 1) +
                    " observed predecessors",
                "base=" + std::to_string(base_interval));
  }
  if (horizon < 1) {
    throw Error(ErrorKind::kInput, "horizon must be >= 1", "h=" + std::to_string(horizon));
  }
}

std::vector<FlowFrame> ObservedWindow(const ExplainModel& model, int base_interval) {
  return std::vector<FlowFrame>(model.frames.begin() + (base_interval - kWindowLength + 1),
                                model.frames.begin() + base_interval + 1);
}

// Cells whose window values can reach `cell` within `horizon` rollout steps.
std::vector<char> EffectiveLocality(const Predictor& predictor, int cell, int horizon) {
  const size_t cells = static_cast<size_t>(predictor.rows()) * predictor.cols();
  std::vector<char> current(cells, 0);
  current[cell] = 1;
  std::vector<char> reach(cells, 0);
  for (int step = 0; step < horizon; ++step) {
    std::vector<char> next(cells, 0);
    for (size_t c = 0; c < cells; ++c) {
      if (!current[c]) continue;
      for (int in : predictor.InputLocality(static_cast<int>(c))) next[in] = 1;
    }
    for (size_t c = 0; c < cells; ++c) reach[c] |= next[c];
    current = std::move(next);
  }
  return reach;
}

}  // namespace

CoalitionGame MakeClusterGame(const ExplainModel& model, int cluster, int base_interval,
                              int horizon, FlowChannel channel) {
  CheckModel(model);
  const ClusterPartition& partition = *model.partition;
  if (cluster < 0 || cluster >= partition.k) {
    throw Error(ErrorKind::kNotFound, "unknown cluster", "cluster=" + std::to_string(cluster));
  }
  CheckQuery(model, base_interval, horizon);
  if (model.masker == nullptr) throw Error(ErrorKind::kState, "cluster game needs a masker");

  const std::vector<int>& neighbors = partition.adjacency[cluster];
  if (neighbors.empty()) {
    throw Error(ErrorKind::kDegenerate, "cluster has no neighbors",
                "cluster=" + std::to_string(cluster));
  }

  struct Shared {
    std::vector<FlowFrame> window;
    std::vector<FlowFrame> baselines;  // masker frames for the window intervals
    std::vector<std::vector<int>> neighbor_cells;
    std::vector<int> own_cells;
    std::vector<char> target;
  };
  auto shared = std::make_shared<Shared>();
  shared->window = ObservedWindow(model, base_interval);
  for (int j = 0; j < kWindowLength; ++j) {
    shared->baselines.push_back(model.masker->Baseline(base_interval - kWindowLength + 1 + j));
  }
  for (int n : neighbors) shared->neighbor_cells.push_back(partition.CellsOfCluster(n));
  shared->own_cells = partition.CellsOfCluster(cluster);
  shared->target.assign(shared->window.front().size(), 0);
  for (int c : shared->own_cells) shared->target[c] = 1;

  CoalitionGame game;
  for (int n : neighbors) game.players.push_back(std::to_string(n));
  const Predictor* predictor = model.predictor;
  const std::span<const FlowFrame> frames = model.frames;
  game.value = [shared, predictor, frames, base_interval, horizon,
                channel](const Coalition& s) -> double {
    std::vector<FlowFrame> window = shared->window;
    for (size_t p = 0; p < shared->neighbor_cells.size(); ++p) {
      if (s.contains(p)) continue;
      for (int j = 0; j < kWindowLength; ++j) {
        for (int c : shared->neighbor_cells[p]) {
          window[j].inflow[c] = shared->baselines[j].inflow[c];
          window[j].outflow[c] = shared->baselines[j].outflow[c];
        }
      }
    }
    const Forecast f = RollForward(*predictor, std::move(window), FrameHistory(frames, base_interval),
                                   base_interval, horizon, &shared->target);
    const FlowFrame& last = f.frames.back();
    const std::vector<double>& values =
        channel == FlowChannel::kInflow ? last.inflow : last.outflow;
    double total = 0.0;
    for (int c : shared->own_cells) total += values[c];
    return total;
  };
  return game;
}

TrajectoryIndex TrajectoryIndex::Build(const TrajectoryStore& store, const GridSpec& grid) {
  TrajectoryIndex index;
  index.store = &store;
  index.events.resize(store.size());
  ParallelFor(store.size(), [&](size_t i) {
    index.events[i] = CrossingEvents(store.records()[i], grid);
  });
  return index;
}

GridGame MakeGridGame(const ExplainModel& model, const TrajectoryIndex& index, CellIndex cell,
                      int base_interval, int horizon, int candidate_cap) {
  CheckModel(model);
  const Predictor& predictor = *model.predictor;
  if (cell.row < 0 || cell.col < 0 || cell.row >= predictor.rows() ||
      cell.col >= predictor.cols()) {
    throw Error(ErrorKind::kNotFound, "unknown cell",
                "cell=" + std::to_string(cell.row) + "," + std::to_string(cell.col));
  }
  CheckQuery(model, base_interval, horizon);
  if (candidate_cap < 1) throw Error(ErrorKind::kConfig, "candidate_cap must be >= 1");
  if (index.store == nullptr) throw Error(ErrorKind::kState, "trajectory index not built");

  const int cols = predictor.cols();
  const int flat = cell.row * cols + cell.col;
  const std::vector<char> locality = EffectiveLocality(predictor, flat, horizon);
  const int first = base_interval - kWindowLength + 1;
  const double t0 = static_cast<double>(model.t0);
  const double step = model.interval_seconds;
  auto window_slot = [&](double t) -> std::optional<int> {
    const double rel = (t - t0) / step;
    if (!(rel >= 0.0)) return std::nullopt;
    const double idx = std::floor(rel);
    if (idx < first || idx > base_interval) return std::nullopt;
    return static_cast<int>(idx) - first;
  };

  // Per-record window events, flattened as (slot, flat cell, direction).
  struct WindowEvent {
    int slot;
    int cell;
    FlowDirection direction;
  };
  struct Scored {
    TrajectoryCandidate candidate;
    std::vector<WindowEvent> events;
  };
  std::vector<Scored> scored;
  const auto& records = index.store->records();
  for (size_t r = 0; r < records.size(); ++r) {
    Scored s;
    for (const CrossingEvent& e : index.events[r]) {
      const std::optional<int> slot = window_slot(e.t);
      if (!slot) continue;
      const int c = e.cell.row * cols + e.cell.col;
      s.events.push_back({*slot, c, e.direction});
      if (locality[c]) {
        ++s.candidate.event_count;
        s.candidate.last_event_t = std::max(s.candidate.last_event_t, e.t);
      }
    }
    if (s.candidate.event_count == 0) continue;
    s.candidate.record = r;
    s.candidate.order_id = records[r].order_id;
    s.candidate.vehicle_id = records[r].vehicle_id;
    scored.push_back(std::move(s));
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.candidate.event_count != b.candidate.event_count) {
      return a.candidate.event_count > b.candidate.event_count;
    }
    return a.candidate.order_id < b.candidate.order_id;
  });
  if (scored.size() > static_cast<size_t>(candidate_cap)) scored.resize(candidate_cap);

  struct Shared {
    std::vector<FlowFrame> window;
    std::vector<std::vector<WindowEvent>> contributions;
    std::vector<char> target;
  };
  auto shared = std::make_shared<Shared>();
  shared->window = ObservedWindow(model, base_interval);
  shared->target.assign(shared->window.front().size(), 0);
  shared->target[flat] = 1;

  GridGame out;
  out.cell = cell;
  out.base_interval = base_interval;
  out.horizon = horizon;
  for (Scored& s : scored) {
    out.game.players.push_back(s.candidate.order_id);
    out.candidates.push_back(std::move(s.candidate));
    shared->contributions.push_back(std::move(s.events));
  }
  const Predictor* pred = model.predictor;
  const std::span<const FlowFrame> frames = model.frames;
  out.game.value = [shared, pred, frames, base_interval, horizon,
                    flat](const Coalition& s) -> double {
    std::vector<FlowFrame> window = shared->window;
    for (size_t p = 0; p < shared->contributions.size(); ++p) {
      if (s.contains(p)) continue;
      for (const WindowEvent& e : shared->contributions[p]) {
        FlowFrame& f = window[e.slot];
        if (e.direction == FlowDirection::kIn) {
          f.inflow[e.cell] -= 1.0;
        } else {
          f.outflow[e.cell] -= 1.0;
        }
      }
    }
    const Forecast f = RollForward(*pred, std::move(window), FrameHistory(frames, base_interval),
                                   base_interval, horizon, &shared->target);
    return f.frames.back().inflow[flat];
  };
  return out;
}

}  // namespace flowx
