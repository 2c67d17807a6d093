#include <algorithm>

#include <fmt/format.h>

#include "flowx/error.h"
#include "flowx/random.h"
#include "flowx/service.h"

namespace flowx {

using nlohmann::json;

namespace {

void CheckInterval(const Scenario& s, int t) {
  if (t < 0 || t >= s.tensor().n_intervals()) {
    throw Error(ErrorKind::kNotFound, "interval out of range",
                fmt::format("t={} n_intervals={}", t, s.tensor().n_intervals()));
  }
}

void CheckBase(const Scenario& s, int base) {
  CheckInterval(s, base);
  if (base < kWindowLength - 1) {
    throw Error(ErrorKind::kInput,
                fmt::format("base needs {} observed predecessors", kWindowLength - 1),
                fmt::format("base={}", base));
  }
}

void CheckHorizon(const Scenario& s, int h) {
  if (h < 1 || h > s.config().horizons) {
    throw Error(ErrorKind::kInput, "horizon out of range",
                fmt::format("h={} horizons={}", h, s.config().horizons));
  }
}

json Matrix(const std::vector<double>& flat, int rows, int cols) {
  json m = json::array();
  for (int r = 0; r < rows; ++r) {
    m.push_back(std::vector<double>(flat.begin() + static_cast<ptrdiff_t>(r) * cols,
                                    flat.begin() + static_cast<ptrdiff_t>(r + 1) * cols));
  }
  return m;
}

json ClusterAttributions(const Scenario& s, int cluster, int base, int horizon) {
  if (cluster < 0 || cluster >= s.partition().k) {
    throw Error(ErrorKind::kNotFound, "unknown cluster", fmt::format("cluster={}", cluster));
  }
  CheckBase(s, base);
  CheckHorizon(s, horizon);
  json doc = {{"cluster", cluster},
              {"base", base},
              {"horizon", horizon},
              {"channel", s.config().explain_channel == FlowChannel::kInflow ? "inflow" : "outflow"},
              {"masker", std::string(s.masker().name())}};
  if (s.partition().adjacency[cluster].empty()) {
    doc["degenerate"] = true;
    doc["attributions"] = json::array();
    return doc;
  }
  const CoalitionGame game =
      MakeClusterGame(s.model(), cluster, base, horizon, s.config().explain_channel);
  const ShapleyResult r = Attribute(game, s.config().mc_permutations,
                                    AttributionSeed(s, "cluster", std::to_string(cluster), base));
  doc.update(ShapleyResultToJson(r));
  doc["degenerate"] = false;
  return doc;
}

}  // namespace

std::string DumpJson(const json& doc) { return doc.dump(); }

uint64_t AttributionSeed(const Scenario& s, std::string_view kind, std::string_view id, int base) {
  return MixSeed(s.config().seed, Fnv1a(fmt::format("{}/{}/{}", kind, id, base)));
}

ShapleyResult Attribute(const CoalitionGame& game, int permutations, uint64_t seed) {
  if (game.size() <= static_cast<size_t>(kMaxExactPlayers)) return ShapleyExact(game);
  return ShapleyMonteCarlo(game, permutations, seed);
}

json MetaDocument(const Scenario& s) {
  const ServiceConfig& c = s.config();
  const BoundingBox& b = s.grid().bbox();
  json doc = {
      {"grid", {{"bbox", {b.lon_min, b.lat_min, b.lon_max, b.lat_max}},
                {"rows", s.grid().rows()},
                {"cols", s.grid().cols()}}},
      {"interval_seconds", s.tensor().interval_seconds()},
      {"t0", s.tensor().t0()},
      {"n_intervals", s.tensor().n_intervals()},
      {"k", s.partition().k},
      {"horizons", c.horizons},
      {"interpreted_horizon", c.interpreted_horizon},
      {"predictor", std::string(PredictorKindName(s.predictor().kind()))},
      {"masker", std::string(s.masker().name())},
      {"trajectories", s.store().size()},
  };
  if (const auto& r = s.store().time_range()) {
    doc["time_range"] = {r->t_min, r->t_max};
  } else {
    doc["time_range"] = nullptr;
  }
  if (c.demo_range) {
    doc["demo_range"] = {c.demo_range->begin, c.demo_range->end};
  } else {
    doc["demo_range"] = nullptr;
  }
  return doc;
}

json FlowsDocument(const Scenario& s, int t) {
  CheckInterval(s, t);
  const FlowFrame& f = s.frames()[t];
  return {{"t", t},
          {"start", s.tensor().IntervalStart(t)},
          {"inflow", Matrix(f.inflow, f.rows, f.cols)},
          {"outflow", Matrix(f.outflow, f.rows, f.cols)}};
}

json TrajectoriesDocument(const Scenario& s, int t) {
  CheckInterval(s, t);
  const int64_t start = s.tensor().IntervalStart(t);
  const int64_t end = start + s.tensor().interval_seconds();
  json list = json::array();
  for (const TrajectoryRecord& r : s.store().records()) {  // ordered by order id
    json points = json::array();
    for (const TrajectoryPoint& p : r.points) {
      if (p.t >= start && p.t < end) points.push_back({p.t, p.lon, p.lat});
    }
    if (points.empty()) continue;
    list.push_back({{"order_id", r.order_id}, {"vehicle_id", r.vehicle_id}, {"points", points}});
  }
  return {{"t", t}, {"start", start}, {"end", end}, {"trajectories", std::move(list)}};
}

json ForecastDocument(const Scenario& s, int base) {
  CheckBase(s, base);
  const Forecast f = RollingForecast(s.predictor(), s.frames(), base, s.config().horizons);
  json horizons = json::array();
  for (size_t h = 0; h < f.frames.size(); ++h) {
    const FlowFrame& fr = f.frames[h];
    horizons.push_back({{"h", h + 1},
                        {"inflow", Matrix(fr.inflow, fr.rows, fr.cols)},
                        {"outflow", Matrix(fr.outflow, fr.rows, fr.cols)}});
  }
  return {{"base", base}, {"clamp_count", f.clamp_count}, {"horizons", std::move(horizons)}};
}

json ClustersDocument(const Scenario& s) { return PartitionToJson(s.partition(), s.grid()); }

json GlyphsDocument(const Scenario& s, int base) {
  CheckBase(s, base);
  const int k = s.partition().k;
  const int h = s.config().interpreted_horizon;
  std::vector<std::vector<std::pair<int, double>>> attributions(k);
  std::vector<bool> degenerate(k, false);
  for (int c = 0; c < k; ++c) {
    const json doc = ClusterAttributions(s, c, base, h);
    degenerate[c] = doc["degenerate"].get<bool>();
    for (const json& a : doc["attributions"]) {
      attributions[c].emplace_back(std::stoi(a["player"].get<std::string>()),
                                   a["phi"].get<double>());
    }
  }
  const Forecast f = RollingForecast(s.predictor(), s.frames(), base, s.config().horizons);
  const std::vector<GlyphSummary> glyphs =
      GlyphSummaries(s.partition(), f, attributions, degenerate, h);
  json list = json::array();
  for (const GlyphSummary& g : glyphs) list.push_back(GlyphToJson(g, s.partition(), s.grid()));
  return {{"base", base}, {"horizon", h}, {"glyphs", std::move(list)}};
}

json ClusterAttributionDocument(const Scenario& s, int cluster, int base, int horizon) {
  return ClusterAttributions(s, cluster, base, horizon);
}

json GridAttributionDocument(const Scenario& s, CellIndex cell, int base, int horizon) {
  if (!s.grid().Valid(cell)) {
    throw Error(ErrorKind::kNotFound, "unknown cell", fmt::format("cell={},{}", cell.row, cell.col));
  }
  CheckBase(s, base);
  CheckHorizon(s, horizon);
  const GridGame game = MakeGridGame(s.model(), s.trajectory_index(), cell, base, horizon,
                                     s.config().candidate_cap);
  const ShapleyResult r =
      Attribute(game.game, s.config().mc_permutations,
                AttributionSeed(s, "grid", fmt::format("{},{}", cell.row, cell.col), base));
  const double window_end = static_cast<double>(s.tensor().IntervalStart(base + 1));
  json doc = ReportToJson(TimeChannelReport(game, r, window_end, s.tensor().interval_seconds()));
  doc["candidates"] = game.candidates.size();
  doc["empty_value"] = r.empty_value;
  doc["full_value"] = r.full_value;
  doc["method"] = std::string(AttributionMethodName(r.attributions.empty()
                                                        ? AttributionMethod::kExact
                                                        : r.attributions.front().method));
  return doc;
}

}  // namespace flowx
