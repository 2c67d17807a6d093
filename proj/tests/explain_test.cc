#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "flowx/error.h"
#include "flowx/explain.h"
#include "flowx/flow_tensor.h"
#include "flowx/random.h"
#include "game_util.h"
#include "test_util.h"

namespace flowx {
namespace {

using testing::At;
using testing::Record;

// Every cell is its own cluster; centroids at cell centers in grid units;
// 4-neighbor adjacency.
ClusterPartition OneCellPartition(int rows, int cols) {
  ClusterPartition p;
  p.k = rows * cols;
  p.adjacency.resize(p.k);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int i = r * cols + c;
      p.grid_assignment.push_back(i);
      p.centroids.push_back({c + 0.5, r + 0.5});
      if (r > 0) p.adjacency[i].push_back(i - cols);
      if (c > 0) p.adjacency[i].push_back(i - 1);
      if (c + 1 < cols) p.adjacency[i].push_back(i + 1);
      if (r + 1 < rows) p.adjacency[i].push_back(i + cols);
    }
  }
  return p;
}

LocalLinearMap WholeGridMap(int cells) {
  LocalLinearMap m;
  for (int c = 0; c < cells; ++c) {
    m.input_cells.push_back(c);
    m.output_cells.push_back(c);
  }
  m.weights = Eigen::MatrixXd::Zero(2 * cells, kWindowLength * 2 * cells);
  return m;
}

std::vector<FlowFrame> RandomFrames(int n, int rows, int cols, Rng& rng) {
  std::vector<FlowFrame> frames;
  for (int i = 0; i < n; ++i) {
    FlowFrame f(rows, cols);
    for (size_t c = 0; c < f.size(); ++c) {
      f.inflow[c] = std::floor(rng.Uniform(0, 20));
      f.outflow[c] = std::floor(rng.Uniform(0, 20));
    }
    frames.push_back(f);
  }
  return frames;
}

template <typename F>
ErrorKind KindOf(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kInput;
}

TEST(ClusterGameTest, PersistenceGivesZeroAttributions) {
  Rng rng(1);
  const auto frames = RandomFrames(8, 2, 3, rng);
  const ClusterPartition p = OneCellPartition(2, 3);
  const PersistencePredictor pred(2, 3);
  const ZeroMasker masker(2, 3);
  const ExplainModel model{frames, &p, &pred, &masker, 0, 600};
  for (int h = 1; h <= 3; ++h) {
    const CoalitionGame g = MakeClusterGame(model, 4, 6, h);
    EXPECT_EQ(g.players, (std::vector<std::string>{"1", "3", "5"}));
    const ShapleyResult r = ShapleyExact(g);
    for (const auto& a : r.attributions) EXPECT_EQ(a.phi, 0.0);
    EXPECT_EQ(r.full_value, frames[6].inflow[4]);
  }
}

TEST(ClusterGameTest, OnlyTheFeedingNeighborCarriesValue) {
  // Cell 1's next inflow is twice cell 0's last outflow.
  LocalLinearMap m = WholeGridMap(3);
  const int last = (kWindowLength - 1) * 6;
  m.weights(0 * 3 + 1, last + 1 * 3 + 0) = 2.0;
  const RidgePredictor pred(1, 3, 0.0, {m});
  std::vector<FlowFrame> frames(6, FlowFrame(1, 3));
  frames[4].outflow = {5.0, 7.0, 11.0};
  const ClusterPartition p = OneCellPartition(1, 3);
  const ZeroMasker masker(1, 3);
  const ExplainModel model{frames, &p, &pred, &masker, 0, 600};
  const ShapleyResult r = ShapleyExact(MakeClusterGame(model, 1, 4, 1));
  ASSERT_EQ(r.attributions.size(), 2u);
  EXPECT_EQ(r.attributions[0].player, "0");
  EXPECT_NEAR(r.attributions[0].phi, 10.0, 1e-12);
  EXPECT_NEAR(r.attributions[1].phi, 0.0, 1e-12);
  EXPECT_NEAR(r.empty_value, 0.0, 1e-12);
}

TEST(ClusterGameTest, LinearPredictorGivesSingletonMarginals) {
  Rng rng(4);
  const int rows = 3, cols = 3, cells = 9;
  LocalLinearMap m = WholeGridMap(cells);
  for (Eigen::Index i = 0; i < m.weights.size(); ++i) {
    m.weights.data()[i] = rng.Uniform(0.0, 1.0) / 90.0;
  }
  const RidgePredictor pred(rows, cols, 0.0, {m});
  const auto frames = RandomFrames(10, rows, cols, rng);
  const ClusterPartition p = OneCellPartition(rows, cols);
  const ZeroMasker masker(rows, cols);
  const ExplainModel model{frames, &p, &pred, &masker, 0, 600};
  for (int h : {1, 3}) {
    for (int cluster : {0, 4, 7}) {
      const CoalitionGame g = MakeClusterGame(model, cluster, 8, h, FlowChannel::kOutflow);
      const ShapleyResult r = ShapleyExact(g);
      const double empty = g.value(Coalition(g.size()));
      double total = 0.0;
      for (size_t i = 0; i < g.size(); ++i) {
        Coalition single(g.size());
        single.insert(i);
        EXPECT_NEAR(r.attributions[i].phi, g.value(single) - empty, 1e-9);
        total += r.attributions[i].phi;
      }
      EXPECT_NEAR(total, r.full_value - r.empty_value, 1e-9);
    }
  }
}

TEST(ClusterGameTest, FullCoalitionEqualsUnmaskedForecast) {
  Rng rng(6);
  LocalLinearMap m = WholeGridMap(4);
  for (Eigen::Index i = 0; i < m.weights.size(); ++i) m.weights.data()[i] = rng.Uniform(-0.1, 0.2);
  const RidgePredictor pred(2, 2, 0.0, {m});
  const auto frames = RandomFrames(9, 2, 2, rng);
  const ClusterPartition p = OneCellPartition(2, 2);
  const ZeroMasker masker(2, 2);
  const ExplainModel model{frames, &p, &pred, &masker, 0, 600};
  const Forecast f = RollingForecast(pred, frames, 7, 4);
  const CoalitionGame g = MakeClusterGame(model, 3, 7, 4);
  EXPECT_NEAR(g.value(Coalition::Full(g.size())), f.frames[3].inflow[3], 1e-9);
}

TEST(ClusterGameTest, Errors) {
  std::vector<FlowFrame> frames(6, FlowFrame(1, 2));
  ClusterPartition p = OneCellPartition(1, 2);
  p.adjacency[1].clear();
  const PersistencePredictor pred(1, 2);
  const ZeroMasker masker(1, 2);
  const ExplainModel model{frames, &p, &pred, &masker, 0, 600};
  EXPECT_EQ(KindOf([&] { MakeClusterGame(model, 1, 4, 1); }), ErrorKind::kDegenerate);
  EXPECT_EQ(KindOf([&] { MakeClusterGame(model, 5, 4, 1); }), ErrorKind::kNotFound);
  EXPECT_EQ(KindOf([&] { MakeClusterGame(model, 0, 3, 1); }), ErrorKind::kInput);
  EXPECT_EQ(KindOf([&] { MakeClusterGame(model, 0, 6, 1); }), ErrorKind::kInput);
  EXPECT_EQ(KindOf([&] { MakeClusterGame(model, 0, 4, 0); }), ErrorKind::kInput);
  ExplainModel no_masker = model;
  no_masker.masker = nullptr;
  EXPECT_EQ(KindOf([&] { MakeClusterGame(no_masker, 0, 4, 1); }), ErrorKind::kState);
}

TEST(HistoricalMeanMaskerTest, AveragesPerTimeOfDaySlot) {
  std::vector<FlowFrame> frames;
  for (int i = 0; i < 6; ++i) {
    FlowFrame f(1, 1);
    f.inflow[0] = i + 1;
    f.outflow[0] = 10 * (i + 1);
    frames.push_back(f);
  }
  // Half-day slots: intervals 0 and 2 share slot 0, 1 and 3 share slot 1.
  const HistoricalMeanMasker half_days(frames, {0, 4}, 0, 43200);
  EXPECT_DOUBLE_EQ(half_days.Baseline(0).inflow[0], 3.0);  // the other slot-0 interval
  EXPECT_DOUBLE_EQ(half_days.Baseline(2).inflow[0], 1.0);
  EXPECT_DOUBLE_EQ(half_days.Baseline(4).inflow[0], 2.0);  // untrained: full slot mean
  EXPECT_DOUBLE_EQ(half_days.Baseline(5).inflow[0], 3.0);
  EXPECT_DOUBLE_EQ(half_days.Baseline(5).outflow[0], 30.0);
  EXPECT_DOUBLE_EQ(half_days.Baseline(-1).inflow[0], 3.0);
  EXPECT_EQ(HistoricalMeanMasker(frames, {0, 4}, 43200, 43200).SlotOf(0), 1);

  // Third-day slots with one training interval each: the training mean stands
  // in whenever no other interval shares the slot.
  const HistoricalMeanMasker thirds(frames, {0, 2}, 0, 28800);
  EXPECT_DOUBLE_EQ(thirds.Baseline(2).inflow[0], 1.5);
  EXPECT_DOUBLE_EQ(thirds.Baseline(1).inflow[0], 1.5);
  EXPECT_DOUBLE_EQ(thirds.Baseline(4).inflow[0], 2.0);
  EXPECT_DOUBLE_EQ(thirds.Baseline(3).inflow[0], 1.0);
  EXPECT_THROW(HistoricalMeanMasker(frames, {0, 9}, 0, 600), Error);
}

// Grid-game fixture on a 3x3 unit grid with 10-minute intervals from t = 0.
struct GridFixture {
  GridSpec grid = testing::UnitGrid(3, 3);
  TrajectoryStore store;
  std::vector<FlowFrame> frames;

  GridFixture() {
    store = TrajectoryStore({
        Record("a", {At(2500, 0.5, 1.5), At(2700, 2.5, 1.5)}),
        Record("b", {At(2600, 0.5, 1.5), At(2800, 2.5, 1.5)}),
        Record("c", {At(2400, 1.5, 0.5), At(2600, 1.5, 2.5)}),
        Record("d", {At(100, 0.5, 1.5), At(300, 2.5, 1.5)}),
        Record("e", {At(2800, 0.5, 1.5), At(2900, 1.5, 1.5)}),
        Record("f", {At(2500, 0.5, 0.5), At(2700, 2.5, 0.5)}),
        Record("g", {At(3000, 0.5, 1.5), At(3100, 1.5, 1.5)}),
    });
    frames = Rasterize(store);
  }

  std::vector<FlowFrame> Rasterize(const TrajectoryStore& s) const {
    return FramesFromTensor(BuildFlowTensor(s, grid, 600, 0, 6));
  }

  // Frames re-rasterized without the given order ids.
  std::vector<FlowFrame> Without(const std::set<std::string>& absent) const {
    std::vector<TrajectoryRecord> kept;
    for (const auto& r : store.records()) {
      if (!absent.count(r.order_id)) kept.push_back(r);
    }
    return Rasterize(TrajectoryStore(std::move(kept)));
  }
};

TEST(GridGameTest, CandidatesAreRankedLocalityVisitors) {
  GridFixture fx;
  const PersistencePredictor pred(3, 3);
  const ClusterPartition p = OneCellPartition(3, 3);
  const ExplainModel model{fx.frames, &p, &pred, nullptr, 0, 600};
  const TrajectoryIndex index = TrajectoryIndex::Build(fx.store, fx.grid);
  const GridGame gg = MakeGridGame(model, index, {1, 1}, 4, 2);
  EXPECT_EQ(gg.game.players, (std::vector<std::string>{"a", "b", "c", "d", "e"}));
  EXPECT_EQ(gg.candidates[0].event_count, 2);
  EXPECT_EQ(gg.candidates[4].event_count, 1);
  EXPECT_DOUBLE_EQ(gg.candidates[0].last_event_t, 2650.0);
  EXPECT_DOUBLE_EQ(gg.candidates[3].last_event_t, 250.0);

  const ShapleyResult r = ShapleyExact(gg.game);
  const std::vector<double> want{1, 1, 1, 0, 1};
  for (size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(r.attributions[i].phi, want[i], 1e-12);
  EXPECT_NEAR(r.full_value, 4.0, 1e-12);
  EXPECT_NEAR(r.empty_value, 0.0, 1e-12);

  const GridGame capped = MakeGridGame(model, index, {1, 1}, 4, 2, 1);
  EXPECT_EQ(capped.game.players, (std::vector<std::string>{"a"}));
  const ShapleyResult single = ShapleyExact(capped.game);
  EXPECT_NEAR(single.attributions[0].phi, single.full_value - single.empty_value, 1e-12);
}

TEST(GridGameTest, ValueMatchesReRasterizationForEveryCoalition) {
  GridFixture fx;
  Rng rng(9);
  LocalLinearMap m = WholeGridMap(9);
  for (Eigen::Index i = 0; i < m.weights.size(); ++i) m.weights.data()[i] = rng.Uniform(-0.2, 0.4);
  const RidgePredictor pred(3, 3, 0.0, {m});
  const ClusterPartition p = OneCellPartition(3, 3);
  const ExplainModel model{fx.frames, &p, &pred, nullptr, 0, 600};
  const TrajectoryIndex index = TrajectoryIndex::Build(fx.store, fx.grid);
  for (int h : {1, 2}) {
    const GridGame gg = MakeGridGame(model, index, {1, 2}, 4, h, 20);
    // Whole-grid inputs: every trajectory with a window event is a player.
    ASSERT_EQ(gg.game.size(), 6u);
    const size_t n = gg.game.size();
    for (uint64_t mask = 0; mask < (uint64_t{1} << n); ++mask) {
      std::set<std::string> absent;
      for (size_t i = 0; i < n; ++i) {
        if (!(mask >> i & 1)) absent.insert(gg.game.players[i]);
      }
      const auto frames = fx.Without(absent);
      const Forecast f = RollingForecast(pred, frames, 4, h);
      EXPECT_NEAR(gg.game.value(Coalition::FromMask(n, mask)), f.frames.back().inflow[5], 1e-9);
    }
  }
}

TEST(GridGameTest, NoCandidatesGivesEmptyGame) {
  GridFixture fx;
  const PersistencePredictor pred(3, 3);
  const ClusterPartition p = OneCellPartition(3, 3);
  const ExplainModel model{fx.frames, &p, &pred, nullptr, 0, 600};
  const TrajectoryIndex index = TrajectoryIndex::Build(fx.store, fx.grid);
  const GridGame gg = MakeGridGame(model, index, {2, 2}, 4, 1);
  EXPECT_TRUE(gg.candidates.empty());
  EXPECT_EQ(gg.game.size(), 0u);
  EXPECT_EQ(gg.game.value(Coalition(0)), 0.0);
  EXPECT_EQ(KindOf([&] { MakeGridGame(model, index, {3, 0}, 4, 1); }), ErrorKind::kNotFound);
  EXPECT_EQ(KindOf([&] { MakeGridGame(model, index, {1, 1}, 2, 1); }), ErrorKind::kInput);
}

TEST(SectorTest, CompassDirections) {
  const Point o{0, 0};
  EXPECT_EQ(SectorOf(o, {0, 1}), 0);
  EXPECT_EQ(SectorOf(o, {1, 1}), 1);
  EXPECT_EQ(SectorOf(o, {1, 0}), 2);
  EXPECT_EQ(SectorOf(o, {1, -1}), 3);
  EXPECT_EQ(SectorOf(o, {0, -1}), 4);
  EXPECT_EQ(SectorOf(o, {-1, -1}), 5);
  EXPECT_EQ(SectorOf(o, {-1, 0}), 6);
  EXPECT_EQ(SectorOf(o, {-1, 1}), 7);
  EXPECT_EQ(SectorOf(o, {-0.1, 1}), 0);  // wraps to N
  EXPECT_EQ(SectorOf(o, o), -1);
}

TEST(SectorTest, SplitsSignsPerSector) {
  ClusterPartition p;
  p.k = 4;
  p.centroids = {{0, 0}, {2, 0}, {3, 0.1}, {0, 0}};
  const std::vector<std::pair<int, double>> east{{1, 3.0}};
  Sectors s = SectorSummary(east, p, 0);
  EXPECT_EQ(s[2].positive, 3.0);
  EXPECT_EQ(s[2].negative, 0.0);

  const std::vector<std::pair<int, double>> mixed{{1, 2.0}, {2, -1.0}};
  s = SectorSummary(mixed, p, 0);
  EXPECT_EQ(s[2].positive, 2.0);
  EXPECT_EQ(s[2].negative, 1.0);

  const std::vector<std::pair<int, double>> same{{3, 1.5}};
  s = SectorSummary(same, p, 0);  // coincident centroid falls back to N
  EXPECT_EQ(s[0].positive, 1.5);
}

TEST(SectorTest, ReconcilesWithAttributions) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    ClusterPartition p;
    p.k = 12;
    for (int i = 0; i < p.k; ++i) p.centroids.push_back({rng.Uniform(-5, 5), rng.Uniform(-5, 5)});
    std::vector<std::pair<int, double>> phi;
    double sum = 0.0, abs_sum = 0.0;
    for (int i = 1; i < p.k; ++i) {
      const double v = rng.Uniform(-4, 4);
      phi.push_back({i, v});
      sum += v;
      abs_sum += std::abs(v);
    }
    const Sectors s = SectorSummary(phi, p, 0);
    double pos = 0.0, neg = 0.0;
    for (const auto& m : s) {
      EXPECT_GE(m.positive, 0.0);
      EXPECT_GE(m.negative, 0.0);
      pos += m.positive;
      neg += m.negative;
    }
    EXPECT_NEAR(pos - neg, sum, 1e-9);
    EXPECT_NEAR(pos + neg, abs_sum, 1e-9);
  }
}

TEST(GlyphTest, ForecastPointsAndSectors) {
  const ClusterPartition p = OneCellPartition(1, 3);
  Forecast f;
  for (int h = 0; h < 6; ++h) {
    FlowFrame fr(1, 3);
    fr.inflow = {1.0 * h, 10.0 * h, 100.0 * h};
    f.frames.push_back(fr);
  }
  const std::vector<std::vector<std::pair<int, double>>> attr{{{1, 0.5}}, {{0, 2.0}, {2, -1.0}}, {}};
  const std::vector<bool> degenerate{false, false, true};
  const auto glyphs = GlyphSummaries(p, f, attr, degenerate, 2);
  ASSERT_EQ(glyphs.size(), 3u);
  EXPECT_EQ(glyphs[1].forecast_points, (std::array<double, 5>{0, 10, 20, 30, 40}));
  EXPECT_EQ(glyphs[1].highlighted_horizon, 2);
  EXPECT_EQ(glyphs[1].sectors[6].positive, 2.0);  // W
  EXPECT_EQ(glyphs[1].sectors[2].negative, 1.0);  // E
  EXPECT_EQ(glyphs[0].sectors[2].positive, 0.5);
  EXPECT_TRUE(glyphs[2].degenerate);

  const GridSpec grid = testing::UnitGrid(1, 3);
  const nlohmann::json j = GlyphToJson(glyphs[1], p, grid);
  EXPECT_EQ(j["cluster"], 1);
  EXPECT_EQ(j["highlighted"], 2);
  EXPECT_EQ(j["sectors"].size(), 8u);
  EXPECT_EQ(j["sectors"][6]["dir"], "W");
  EXPECT_EQ(j["sectors"][6]["pos"], 2.0);
  EXPECT_EQ(j["forecast_points"][4], 40.0);
  EXPECT_TRUE(j["centroid"].contains("lon"));

  Forecast short_f;
  short_f.frames.assign(4, FlowFrame(1, 3));
  EXPECT_EQ(KindOf([&] { GlyphSummaries(p, short_f, attr, degenerate); }), ErrorKind::kConfig);
  EXPECT_EQ(KindOf([&] { GlyphSummaries(p, f, attr, degenerate, 6); }), ErrorKind::kConfig);
}

TEST(TimeChannelTest, TopFiveAndLookbackBuckets) {
  GridGame gg;
  gg.cell = {2, 3};
  gg.base_interval = 4;
  gg.horizon = 2;
  const std::vector<double> phi{3, -3, 0, 1, -0.5, 2, 0.25};
  const std::vector<double> last{2950, 2300, 2990, 3000, 1500, 100, 2990};
  ShapleyResult r;
  for (size_t i = 0; i < phi.size(); ++i) {
    TrajectoryCandidate c;
    c.order_id = "t" + std::to_string(i);
    c.vehicle_id = "v" + std::to_string(i);
    c.last_event_t = last[i];
    c.event_count = 1;
    gg.candidates.push_back(c);
    gg.game.players.push_back(c.order_id);
    r.attributions.push_back({c.order_id, phi[i], 0.0, AttributionMethod::kExact});
  }
  const TrajectoryAttributionReport rep = TimeChannelReport(gg, r, 3000.0, 600);
  ASSERT_EQ(rep.top.size(), 5u);
  std::vector<std::string> order;
  std::vector<int> channels;
  for (const auto& t : rep.top) {
    order.push_back(t.candidate.order_id);
    channels.push_back(t.channel);
  }
  EXPECT_EQ(order, (std::vector<std::string>{"t0", "t1", "t5", "t3", "t4"}));
  EXPECT_EQ(channels, (std::vector<int>{0, 1, 4, 0, 2}));
  EXPECT_DOUBLE_EQ(rep.time_channels[0].positive, 4.0);
  EXPECT_DOUBLE_EQ(rep.time_channels[1].negative, 3.0);
  EXPECT_DOUBLE_EQ(rep.time_channels[2].negative, 0.5);
  EXPECT_DOUBLE_EQ(rep.time_channels[4].positive, 2.0);
  EXPECT_EQ(rep.time_channels[3].lookback_begin_min, 30);
  EXPECT_EQ(rep.time_channels[3].lookback_end_min, 40);

  const nlohmann::json j = ReportToJson(rep);
  EXPECT_EQ(j["cell"]["row"], 2);
  EXPECT_EQ(j["top"][2]["vehicle_id"], "v5");
  EXPECT_EQ(j["top"][2]["channel"], 4);
  EXPECT_EQ(j["time_channels"][1]["lookback_min"], nlohmann::json::array({10, 20}));
  EXPECT_EQ(j["top"][0]["stderr"], 0.0);
}

TEST(SerializeTest, ShapleyResultDocument) {
  const ShapleyResult r = ShapleyExact(testing::TableGame({0, 1, 2, 4}, 2));
  const nlohmann::json j = ShapleyResultToJson(r);
  EXPECT_EQ(j["attributions"][1]["player"], "p1");
  EXPECT_EQ(j["attributions"][1]["method"], "exact");
  EXPECT_EQ(j["evaluations"], 4);
  EXPECT_EQ(j["full_value"], 4.0);
}

}  // namespace
}  // namespace flowx
