#include "flowx/explain.h"

namespace flowx {

using nlohmann::json;

json AttributionToJson(const Attribution& a) {
  return {{"player", a.player},
          {"phi", a.phi},
          {"stderr", a.std_error},
          {"method", std::string(AttributionMethodName(a.method))}};
}

json ShapleyResultToJson(const ShapleyResult& result) {
  json list = json::array();
  for (const Attribution& a : result.attributions) list.push_back(AttributionToJson(a));
  return {{"attributions", std::move(list)},
          {"empty_value", result.empty_value},
          {"full_value", result.full_value},
          {"evaluations", result.evaluations},
          {"baseline_evaluations", result.baseline_evaluations}};
}

json GlyphToJson(const GlyphSummary& glyph, const ClusterPartition& partition,
                 const GridSpec& grid) {
  json sectors = json::array();
  for (int s = 0; s < kSectorCount; ++s) {
    sectors.push_back({{"dir", std::string(kSectorNames[s])},
                       {"pos", glyph.sectors[s].positive},
                       {"neg", glyph.sectors[s].negative}});
  }
  const auto [lon, lat] = grid.projection().Inverse(partition.centroids[glyph.cluster]);
  return {{"cluster", glyph.cluster},
          {"forecast_points", glyph.forecast_points},
          {"highlighted", glyph.highlighted_horizon},
          {"sectors", std::move(sectors)},
          {"degenerate", glyph.degenerate},
          {"centroid", {{"lon", lon}, {"lat", lat}}}};
}

json ReportToJson(const TrajectoryAttributionReport& report) {
  json top = json::array();
  for (const TrajectoryAttribution& t : report.top) {
    json entry = AttributionToJson(t.attribution);
    entry["vehicle_id"] = t.candidate.vehicle_id;
    entry["event_count"] = t.candidate.event_count;
    entry["last_event_t"] = t.candidate.last_event_t;
    entry["channel"] = t.channel;
    top.push_back(std::move(entry));
  }
  json channels = json::array();
  for (const TimeChannel& ch : report.time_channels) {
    channels.push_back({{"lookback_min", {ch.lookback_begin_min, ch.lookback_end_min}},
                        {"pos", ch.positive},
                        {"neg", ch.negative}});
  }
  return {{"cell", {{"row", report.cell.row}, {"col", report.cell.col}}},
          {"base", report.base_interval},
          {"horizon", report.horizon},
          {"top", std::move(top)},
          {"time_channels", std::move(channels)}};
}

}  // namespace flowx
