#ifndef FLOWX_SYNTH_H_
#define FLOWX_SYNTH_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowx/geo.h"
#include "flowx/partition.h"
#include "flowx/trajdata.h"

namespace flowx {

struct SynthParams {
  int vehicles = 300;
  int hours = 6;
  int congestion_events = 1;
  int vehicles_per_event = 8;
  uint64_t seed = 42;
  BoundingBox bbox{104.04, 30.65, 104.13, 30.73};
  int rows = 20;
  int cols = 20;
  int64_t t_start = 1475280000;  // aligned to the interval
  int interval_seconds = 600;
};

// Ground truth for one planted converging-flow event. Each contributing
// trajectory enters `cell` twice during `interval`, so the planted inflow at
// (cell, interval) is `boost` = 2 * contributing.size().
struct PlantedEvent {
  CellIndex cell;
  int interval = 0;
  int64_t time = 0;  // start of the interval
  std::vector<std::string> contributing;  // order ids, ascending
  int boost = 0;
};

struct SynthScenario {
  SynthParams params;
  TrajectoryStore trajectories;
  std::vector<Intersection> intersections;
  std::vector<PlantedEvent> events;
  int n_intervals = 0;
};

// Background vehicles run non-backtracking random walks between adjacent
// cells, 4-8 minutes per step, split into trips of 3-10 steps. Because a walk
// needs at least four steps to come back to a cell, a background trajectory
// enters any cell at most once per interval. Throws kConfig for negative
// counts or when events are requested on a timeline shorter than 9 intervals.
SynthScenario GenerateSynth(const SynthParams& params);

nlohmann::json SynthManifest(const SynthScenario& scenario);

// Writes trajectories.csv, intersections.csv, manifest.json and scenario.conf
// into `dir`.
void WriteSynthScenario(const SynthScenario& scenario, const std::filesystem::path& dir);

}  // namespace flowx

#endif  // FLOWX_SYNTH_H_
