#include "flowx/synth.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "flowx/error.h"
#include "flowx/random.h"

namespace flowx {
namespace {

constexpr int kPointSpacingSeconds = 60;
constexpr int kApproachSeconds = 1800;

constexpr CellIndex kSteps[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};

double Round6(double v) { return std::round(v * 1e6) / 1e6; }

class PathBuilder {
 public:
  PathBuilder(const SynthParams& p, Rng& rng) : p_(p), rng_(rng) {}

  // Interior point of a cell, away from its edges.
  std::pair<double, double> PointIn(CellIndex c, double lo = 0.2, double hi = 0.8) {
    const double u = c.col + rng_.Uniform(lo, hi);
    const double v = c.row + rng_.Uniform(lo, hi);
    return {Round6(p_.bbox.lon_min + u * (p_.bbox.lon_max - p_.bbox.lon_min) / p_.cols),
            Round6(p_.bbox.lat_min + v * (p_.bbox.lat_max - p_.bbox.lat_min) / p_.rows)};
  }

  // Appends points from the last point to (lon, lat) at time t, one per
  // kPointSpacingSeconds, ending exactly at (t, lon, lat).
  static void MoveTo(std::vector<TrajectoryPoint>& pts, int64_t t, double lon, double lat) {
    const TrajectoryPoint from = pts.back();
    const int64_t span = t - from.t;
    for (int64_t s = kPointSpacingSeconds; s < span; s += kPointSpacingSeconds) {
      const double f = static_cast<double>(s) / static_cast<double>(span);
      pts.push_back({from.t + s, Round6(from.lon + f * (lon - from.lon)),
                     Round6(from.lat + f * (lat - from.lat))});
    }
    pts.push_back({t, lon, lat});
  }

 private:
  const SynthParams& p_;
  Rng& rng_;
};

bool InGrid(CellIndex c, const SynthParams& p) {
  return c.row >= 0 && c.row < p.rows && c.col >= 0 && c.col < p.cols;
}

CellIndex Add(CellIndex a, CellIndex d, int times = 1) {
  return {a.row + d.row * times, a.col + d.col * times};
}

std::vector<Intersection> MakeIntersections(const SynthParams& p, Rng& rng) {
  std::vector<Intersection> out;
  const double w = p.bbox.lon_max - p.bbox.lon_min;
  const double h = p.bbox.lat_max - p.bbox.lat_min;
  constexpr int kLattice = 20;
  auto clamp_in = [&](double lon, double lat) {
    return std::pair{std::clamp(lon, p.bbox.lon_min, p.bbox.lon_max),
                     std::clamp(lat, p.bbox.lat_min, p.bbox.lat_max)};
  };
  for (int i = 0; i < kLattice; ++i) {
    for (int j = 0; j < kLattice; ++j) {
      const double lon = p.bbox.lon_min + w * (j + 0.5 + rng.Uniform(-0.3, 0.3)) / kLattice;
      const double lat = p.bbox.lat_min + h * (i + 0.5 + rng.Uniform(-0.3, 0.3)) / kLattice;
      const auto [x, y] = clamp_in(lon, lat);
      out.push_back({fmt::format("n{:04d}", out.size()), Round6(x), Round6(y)});
    }
  }
  // Denser downtown core.
  for (int i = 0; i < 100; ++i) {
    const double lon = p.bbox.lon_min + w * (0.5 + 0.15 * rng.Normal());
    const double lat = p.bbox.lat_min + h * (0.5 + 0.15 * rng.Normal());
    const auto [x, y] = clamp_in(lon, lat);
    out.push_back({fmt::format("n{:04d}", out.size()), Round6(x), Round6(y)});
  }
  return out;
}

void AddBackgroundVehicle(const SynthParams& p, int v, int64_t t_end, Rng& rng,
                          std::vector<TrajectoryRecord>& out) {
  PathBuilder path(p, rng);
  CellIndex cell{static_cast<int>(rng.UniformIndex(p.rows)),
                 static_cast<int>(rng.UniformIndex(p.cols))};
  CellIndex previous{-1, -1};
  int64_t t = p.t_start + static_cast<int64_t>(rng.UniformIndex(p.interval_seconds));
  auto [lon, lat] = path.PointIn(cell);
  const std::string driver = fmt::format("d{:05d}", v);
  for (int trip = 0; t < t_end; ++trip) {
    TrajectoryRecord rec;
    rec.vehicle_id = driver;
    rec.order_id = fmt::format("o{:05d}_{:03d}", v, trip);
    rec.points.push_back({t, lon, lat});
    const int steps = 3 + static_cast<int>(rng.UniformIndex(8));
    for (int s = 0; s < steps && t < t_end; ++s) {
      std::vector<CellIndex> options;
      for (CellIndex d : kSteps) {
        const CellIndex next = Add(cell, d);
        if (InGrid(next, p) && next != previous) options.push_back(next);
      }
      const CellIndex next = options[rng.UniformIndex(options.size())];
      t += 240 + static_cast<int64_t>(rng.UniformIndex(241));
      std::tie(lon, lat) = path.PointIn(next);
      PathBuilder::MoveTo(rec.points, t, lon, lat);
      previous = cell;
      cell = next;
    }
    out.push_back(std::move(rec));
    t += static_cast<int64_t>(rng.UniformIndex(601));  // idle between orders
  }
}

// Approaches `target` straight from three cells out along `dir`, then enters
// it, leaves to a random neighbor and comes back, all inside the interval
// starting at `s`.
TrajectoryRecord PlantedTrajectory(const SynthParams& p, CellIndex target, int64_t s,
                                   std::string driver, std::string order, Rng& rng) {
  PathBuilder path(p, rng);
  const CellIndex dir = kSteps[rng.UniformIndex(4)];
  TrajectoryRecord rec;
  rec.vehicle_id = std::move(driver);
  rec.order_id = std::move(order);
  int64_t t = s - kApproachSeconds + static_cast<int64_t>(rng.UniformIndex(301));
  auto [lon, lat] = path.PointIn(Add(target, dir, 3));
  rec.points.push_back({t, lon, lat});
  std::tie(lon, lat) = path.PointIn(Add(target, dir, 2));
  PathBuilder::MoveTo(rec.points, s - 900 + static_cast<int64_t>(rng.UniformIndex(121)), lon, lat);
  const CellIndex approach = Add(target, dir, 1);
  std::tie(lon, lat) = path.PointIn(approach);
  PathBuilder::MoveTo(rec.points, s - 300 + static_cast<int64_t>(rng.UniformIndex(121)), lon, lat);
  t = s + 20 + static_cast<int64_t>(rng.UniformIndex(41));
  std::tie(lon, lat) = path.PointIn(approach);
  PathBuilder::MoveTo(rec.points, t, lon, lat);

  std::tie(lon, lat) = path.PointIn(target);
  t += 60;
  PathBuilder::MoveTo(rec.points, t, lon, lat);
  t += 120;
  std::tie(lon, lat) = path.PointIn(target);
  PathBuilder::MoveTo(rec.points, t, lon, lat);
  const CellIndex detour = Add(target, kSteps[rng.UniformIndex(4)]);
  std::tie(lon, lat) = path.PointIn(detour);
  t += 60;
  PathBuilder::MoveTo(rec.points, t, lon, lat);
  std::tie(lon, lat) = path.PointIn(target);
  t += 120;
  PathBuilder::MoveTo(rec.points, t, lon, lat);
  std::tie(lon, lat) = path.PointIn(target);
  PathBuilder::MoveTo(rec.points, s + 540, lon, lat);
  return rec;
}

}  // namespace

SynthScenario GenerateSynth(const SynthParams& params) {
  if (params.vehicles < 0 || params.hours < 0 || params.congestion_events < 0 ||
      params.vehicles_per_event < 0) {
    throw Error(ErrorKind::kConfig, "synthetic counts must be non-negative");
  }
  if (params.interval_seconds <= 0 || params.rows < 1 || params.cols < 1) {
    throw Error(ErrorKind::kConfig, "invalid synthetic grid or interval");
  }
  SynthScenario sc;
  sc.params = params;
  sc.n_intervals = static_cast<int>(static_cast<int64_t>(params.hours) * 3600 /
                                    params.interval_seconds);
  if (params.congestion_events > 0) {
    if (sc.n_intervals < 9) {
      throw Error(ErrorKind::kConfig, "planted events need at least 9 intervals of timeline");
    }
    if (params.rows < 7 || params.cols < 7) {
      throw Error(ErrorKind::kConfig, "planted events need a grid of at least 7x7");
    }
    if (params.interval_seconds < 600) {
      throw Error(ErrorKind::kConfig, "planted events need intervals of at least 600 s");
    }
  }

  Rng rng(MixSeed(params.seed, 0));
  sc.intersections = MakeIntersections(params, rng);

  std::vector<TrajectoryRecord> records;
  const int64_t t_end =
      params.t_start + static_cast<int64_t>(sc.n_intervals) * params.interval_seconds;
  for (int v = 0; v < params.vehicles; ++v) {
    Rng vrng(MixSeed(params.seed, 1000 + static_cast<uint64_t>(v)));
    AddBackgroundVehicle(params, v, t_end, vrng, records);
  }

  std::set<std::pair<int, int>> used_cells;
  for (int e = 0; e < params.congestion_events; ++e) {
    Rng erng(MixSeed(params.seed, 1'000'000 + static_cast<uint64_t>(e)));
    PlantedEvent ev;
    do {
      ev.cell = {3 + static_cast<int>(erng.UniformIndex(params.rows - 6)),
                 3 + static_cast<int>(erng.UniformIndex(params.cols - 6))};
    } while (used_cells.size() < static_cast<size_t>((params.rows - 6) * (params.cols - 6)) &&
             used_cells.count({ev.cell.row, ev.cell.col}));
    used_cells.insert({ev.cell.row, ev.cell.col});
    ev.interval = 6 + static_cast<int>(erng.UniformIndex(sc.n_intervals - 8));
    ev.time = params.t_start + static_cast<int64_t>(ev.interval) * params.interval_seconds;
    for (int k = 0; k < params.vehicles_per_event; ++k) {
      std::string order = fmt::format("e{:02d}_{:03d}", e, k);
      records.push_back(PlantedTrajectory(params, ev.cell, ev.time,
                                          fmt::format("p{:02d}_{:03d}", e, k), order, erng));
      ev.contributing.push_back(std::move(order));
    }
    ev.boost = 2 * params.vehicles_per_event;
    sc.events.push_back(std::move(ev));
  }
  sc.trajectories = TrajectoryStore(std::move(records));
  return sc;
}

nlohmann::json SynthManifest(const SynthScenario& sc) {
  const SynthParams& p = sc.params;
  nlohmann::json events = nlohmann::json::array();
  for (const PlantedEvent& ev : sc.events) {
    events.push_back({{"cell", {{"row", ev.cell.row}, {"col", ev.cell.col}}},
                      {"interval", ev.interval},
                      {"time", ev.time},
                      {"contributing", ev.contributing},
                      {"boost", ev.boost}});
  }
  return {{"params",
           {{"vehicles", p.vehicles},
            {"hours", p.hours},
            {"congestion_events", p.congestion_events},
            {"vehicles_per_event", p.vehicles_per_event},
            {"seed", p.seed},
            {"bbox", {p.bbox.lon_min, p.bbox.lat_min, p.bbox.lon_max, p.bbox.lat_max}},
            {"rows", p.rows},
            {"cols", p.cols},
            {"t0", p.t_start},
            {"interval_seconds", p.interval_seconds},
            {"n_intervals", sc.n_intervals}}},
          {"events", std::move(events)}};
}

void WriteSynthScenario(const SynthScenario& sc, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kInput, "cannot create output directory", dir.string());
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kInput, "cannot write output file", (dir / name).string());
    return out;
  };
  {
    std::ofstream out = open("trajectories.csv");
    out << "driver_id,order_id,timestamp,lon,lat\n";
    WriteTrajectories(sc.trajectories, out);
  }
  {
    std::ofstream out = open("intersections.csv");
    out << "id,lon,lat\n";
    for (const Intersection& n : sc.intersections) {
      out << fmt::format("{},{:.6f},{:.6f}\n", n.id, n.lon, n.lat);
    }
  }
  {
    std::ofstream out = open("manifest.json");
    out << SynthManifest(sc).dump(2) << '\n';
  }
  {
    const SynthParams& p = sc.params;
    std::ofstream out = open("scenario.conf");
    out << "# generated by flowx gen-synth\n";
    out << "trajectories = trajectories.csv\n";
    out << "intersections = intersections.csv\n";
    out << fmt::format("bbox = {:.6f},{:.6f},{:.6f},{:.6f}\n", p.bbox.lon_min, p.bbox.lat_min,
                       p.bbox.lon_max, p.bbox.lat_max);
    out << fmt::format("grid_rows = {}\ngrid_cols = {}\n", p.rows, p.cols);
    out << fmt::format("interval_seconds = {}\nt0 = {}\nn_intervals = {}\n",
                       p.interval_seconds, p.t_start, sc.n_intervals);
    out << fmt::format("seed = {}\n", p.seed);
    out << "predictor = persistence\n";
    if (!sc.events.empty()) {
      const int i = sc.events.front().interval;
      out << fmt::format("demo_range = {}:{}\n", std::max(4, i - 2), i + 1);
    }
  }
}

}  // namespace flowx
