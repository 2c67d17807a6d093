#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <spdlog/spdlog.h>

#include "flowx/error.h"
#include "flowx/explain.h"

namespace flowx {

int SectorOf(Point from, Point to) {
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  if (dx == 0.0 && dy == 0.0) return -1;
  double bearing = std::atan2(dx, dy) * 180.0 / std::numbers::pi;
  if (bearing < 0.0) bearing += 360.0;
  return static_cast<int>(std::lround(bearing / 45.0)) % kSectorCount;
}

Sectors SectorSummary(std::span<const std::pair<int, double>> neighbor_phi,
                      const ClusterPartition& partition, int cluster) {
  if (cluster < 0 || cluster >= partition.k) {
    throw Error(ErrorKind::kNotFound, "unknown cluster", "cluster=" + std::to_string(cluster));
  }
  Sectors sectors{};
  const Point origin = partition.centroids[cluster];
  for (const auto& [neighbor, phi] : neighbor_phi) {
    if (neighbor < 0 || neighbor >= partition.k) {
      throw Error(ErrorKind::kInput, "attribution for unknown cluster",
                  "cluster=" + std::to_string(neighbor));
    }
    int sector = SectorOf(origin, partition.centroids[neighbor]);
    if (sector < 0) {
      spdlog::warn("cluster {} and neighbor {} share a centroid; using sector N", cluster,
                   neighbor);
      sector = 0;
    }
    if (phi >= 0.0) {
      sectors[sector].positive += phi;
    } else {
      sectors[sector].negative -= phi;
    }
  }
  return sectors;
}

std::vector<GlyphSummary> GlyphSummaries(
    const ClusterPartition& partition, const Forecast& forecast,
    const std::vector<std::vector<std::pair<int, double>>>& attributions,
    const std::vector<bool>& degenerate, int highlighted_horizon) {
  if (forecast.frames.size() < static_cast<size_t>(kGlyphPoints)) {
    throw Error(ErrorKind::kConfig,
                "glyphs need a forecast of at least " + std::to_string(kGlyphPoints) +
                    " horizons",
                "H=" + std::to_string(forecast.frames.size()));
  }
  if (highlighted_horizon < 1 || highlighted_horizon > kGlyphPoints) {
    throw Error(ErrorKind::kConfig, "highlighted horizon must be in 1..5");
  }
  if (attributions.size() != static_cast<size_t>(partition.k) ||
      degenerate.size() != static_cast<size_t>(partition.k)) {
    throw Error(ErrorKind::kInput, "one attribution list per cluster is required");
  }
  std::vector<GlyphSummary> glyphs;
  glyphs.reserve(partition.k);
  for (int c = 0; c < partition.k; ++c) {
    GlyphSummary g;
    g.cluster = c;
    g.highlighted_horizon = highlighted_horizon;
    const std::vector<int> cells = partition.CellsOfCluster(c);
    for (int h = 0; h < kGlyphPoints; ++h) {
      double total = 0.0;
      for (int cell : cells) total += forecast.frames[h].inflow[cell];
      g.forecast_points[h] = total;
    }
    g.degenerate = degenerate[c];
    g.sectors = SectorSummary(attributions[c], partition, c);
    glyphs.push_back(g);
  }
  return glyphs;
}

TrajectoryAttributionReport TimeChannelReport(const GridGame& game, const ShapleyResult& result,
                                              double window_end_t, int interval_seconds) {
  if (interval_seconds <= 0) throw Error(ErrorKind::kConfig, "interval_seconds must be positive");
  if (result.attributions.size() != game.candidates.size()) {
    throw Error(ErrorKind::kInput, "attributions do not match the game's players");
  }
  TrajectoryAttributionReport report;
  report.cell = game.cell;
  report.base_interval = game.base_interval;
  report.horizon = game.horizon;
  for (int b = 0; b < kTimeChannels; ++b) {
    report.time_channels[b].lookback_begin_min = b * interval_seconds / 60;
    report.time_channels[b].lookback_end_min = (b + 1) * interval_seconds / 60;
  }

  std::vector<TrajectoryAttribution> all;
  for (size_t i = 0; i < game.candidates.size(); ++i) {
    if (result.attributions[i].phi == 0.0) continue;
    TrajectoryAttribution t;
    t.attribution = result.attributions[i];
    t.candidate = game.candidates[i];
    const double lookback = window_end_t - t.candidate.last_event_t;
    t.channel = std::clamp(static_cast<int>(std::floor(lookback / interval_seconds)), 0,
                           kTimeChannels - 1);
    all.push_back(std::move(t));
  }
  std::sort(all.begin(), all.end(),
            [](const TrajectoryAttribution& a, const TrajectoryAttribution& b) {
              const double ma = std::abs(a.attribution.phi);
              const double mb = std::abs(b.attribution.phi);
              if (ma != mb) return ma > mb;
              return a.candidate.order_id < b.candidate.order_id;
            });
  if (all.size() > static_cast<size_t>(kTopTrajectories)) all.resize(kTopTrajectories);
  for (const TrajectoryAttribution& t : all) {
    TimeChannel& ch = report.time_channels[t.channel];
    if (t.attribution.phi > 0.0) {
      ch.positive += t.attribution.phi;
    } else {
      ch.negative -= t.attribution.phi;
    }
  }
  report.top = std::move(all);
  return report;
}

}  // namespace flowx
