#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "flowx/error.h"
#include "flowx/flow_tensor.h"
#include "flowx/random.h"
#include "flowx/trajdata.h"
#include "test_util.h"

namespace flowx {
namespace {

using testing::At;
using testing::Record;
using testing::UnitGrid;

std::vector<std::tuple<int, int, FlowDirection>> Events(const TrajectoryRecord& r,
                                                        const GridSpec& g) {
  std::vector<std::tuple<int, int, FlowDirection>> out;
  for (const CrossingEvent& e : CrossingEvents(r, g)) out.emplace_back(e.cell.row, e.cell.col, e.direction);
  return out;
}

constexpr FlowDirection kIn = FlowDirection::kIn;
constexpr FlowDirection kOut = FlowDirection::kOut;

TEST(ParseTest, HeaderMalformedAndDuplicates) {
  std::istringstream in(
      "driver_id,order_id,timestamp,lon,lat\n"
      "d2,o1,100,104.05,30.66\n"
      "d1,o1,50,104.04,30.65\n"
      "d1,o1,100,104.06,30.67\n"
      "garbage line\n"
      "d3,o2,70,104.10,30.70\n");
  ParseStats st;
  const TrajectoryStore store = ParseTrajectories(in, &st);
  EXPECT_EQ(st.header_lines, 1u);
  EXPECT_EQ(st.malformed, 1u);
  EXPECT_EQ(st.duplicate_points, 1u);
  EXPECT_EQ(st.sample_malformed, "garbage line");
  ASSERT_EQ(store.size(), 2u);
  const TrajectoryRecord& o1 = store.records()[0];
  EXPECT_EQ(o1.order_id, "o1");
  EXPECT_EQ(o1.vehicle_id, "d1");
  ASSERT_EQ(o1.points.size(), 2u);
  EXPECT_EQ(o1.points[0].t, 50);
  // Same timestamp: the point that sorts first by (lon, lat) is kept.
  EXPECT_DOUBLE_EQ(o1.points[1].lon, 104.05);
  ASSERT_TRUE(store.time_range().has_value());
  EXPECT_EQ(store.time_range()->t_min, 50);
  EXPECT_EQ(store.time_range()->t_max, 100);
}

TEST(ParseTest, MostlyMalformedIsFormatError) {
  std::istringstream in("a,b,1,2,3\nx\ny\nz\n");
  try {
    ParseTrajectories(in);
    FAIL() << "expected a format error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
    EXPECT_EQ(e.detail(), "x");
  }
}

TEST(ParseTest, EmptyInputGivesEmptyStore) {
  std::istringstream in("");
  const TrajectoryStore store = ParseTrajectories(in);
  EXPECT_TRUE(store.empty());
  EXPECT_FALSE(store.time_range().has_value());
}

TEST(ParseTest, LineOrderDoesNotMatter) {
  std::vector<std::string> lines;
  Rng rng(5);
  for (int o = 0; o < 20; ++o) {
    for (int p = 0; p < 10; ++p) {
      lines.push_back("d" + std::to_string(o % 3) + ",o" + std::to_string(o) + "," +
                      std::to_string(p * 30) + "," + std::to_string(104.0 + rng.Uniform() * 0.1) +
                      "," + std::to_string(30.6 + rng.Uniform() * 0.1));
    }
  }
  auto parse = [](const std::vector<std::string>& ls) {
    std::string text;
    for (const auto& l : ls) text += l + "\n";
    std::istringstream in(text);
    std::ostringstream out;
    WriteTrajectories(ParseTrajectories(in), out);
    return out.str();
  };
  const std::string reference = parse(lines);
  std::mt19937 shuffle_rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(lines.begin(), lines.end(), shuffle_rng);
    EXPECT_EQ(parse(lines), reference);
  }
}

TEST(GridSpecTest, RejectsBadGeometry) {
  EXPECT_THROW(GridSpec(BoundingBox{1, 0, 0, 1}, 2, 2), Error);
  EXPECT_THROW(GridSpec(BoundingBox{0, 0, 1, 1}, 0, 2), Error);
}

TEST(GridSpecTest, ProjectionRoundTrip) {
  const GridSpec g(BoundingBox{104.04, 30.65, 104.13, 30.73}, 20, 20);
  const Point p = g.ToPlanar(104.1, 30.7);
  const auto [lon, lat] = g.projection().Inverse(p);
  EXPECT_NEAR(lon, 104.1, 1e-12);
  EXPECT_NEAR(lat, 30.7, 1e-12);
  // About 111 km per degree of latitude.
  EXPECT_NEAR(g.ToPlanar(104.085, 30.70).y - g.ToPlanar(104.085, 30.69).y, 1111.95, 0.1);
}

TEST(CrossingEventsTest, HorizontalWalk) {
  const GridSpec g = UnitGrid(3, 3);
  const auto r = Record("o", {At(0, 0.5, 1.5), At(10, 1.5, 1.5), At(20, 2.5, 1.5)});
  const std::vector<std::tuple<int, int, FlowDirection>> want = {
      {1, 0, kOut}, {1, 1, kIn}, {1, 1, kOut}, {1, 2, kIn}};
  EXPECT_EQ(Events(r, g), want);
}

TEST(CrossingEventsTest, CornerCrossingIsOneDiagonalStep) {
  const GridSpec g = UnitGrid(3, 3);
  const auto r = Record("o", {At(0, 0.5, 0.5), At(10, 1.5, 1.5)});
  const std::vector<std::tuple<int, int, FlowDirection>> want = {{0, 0, kOut}, {1, 1, kIn}};
  EXPECT_EQ(Events(r, g), want);
}

TEST(CrossingEventsTest, BoxEntryAndExitCountOnlyInsideSide) {
  const GridSpec g = UnitGrid(3, 3);
  const auto r = Record("o", {At(0, -0.5, 0.5), At(40, 3.5, 0.5)});
  const std::vector<std::tuple<int, int, FlowDirection>> want = {
      {0, 0, kIn}, {0, 0, kOut}, {0, 1, kIn}, {0, 1, kOut}, {0, 2, kIn}, {0, 2, kOut}};
  EXPECT_EQ(Events(r, g), want);
  CellSequenceStats st;
  const auto visits = CellSequence(r, g, &st);
  ASSERT_EQ(visits.size(), 3u);
  EXPECT_TRUE(visits.front().entered_from_outside);
  EXPECT_TRUE(visits.back().exits_to_outside);
  EXPECT_NEAR(visits.front().enter_t, 5.0, 1e-9);
  EXPECT_NEAR(visits.back().exit_t, 35.0, 1e-9);
}

TEST(CrossingEventsTest, SegmentMissingTheBox) {
  const GridSpec g = UnitGrid(3, 3);
  CellSequenceStats st;
  const auto r = Record("o", {At(0, -1, -1), At(10, -1, 4)});
  EXPECT_TRUE(CellSequence(r, g, &st).empty());
  EXPECT_EQ(st.outside_segments, 1u);
  EXPECT_EQ(st.outside_points, 2u);
}

TEST(CrossingEventsTest, StartOnGridLineBelongsToHeadingCell) {
  const GridSpec g = UnitGrid(3, 3);
  const auto east = CellSequence(Record("o", {At(0, 1.0, 1.5), At(10, 1.5, 1.5)}), g);
  ASSERT_EQ(east.size(), 1u);
  EXPECT_EQ(east[0].cell, (CellIndex{1, 1}));
  const auto west = CellSequence(Record("o", {At(0, 1.0, 1.5), At(10, 0.5, 1.5)}), g);
  ASSERT_EQ(west.size(), 1u);
  EXPECT_EQ(west[0].cell, (CellIndex{1, 0}));
}

TEST(CrossingEventsTest, NorthAndEastEdgesBelongToLastCell) {
  const GridSpec g = UnitGrid(3, 3);
  const auto visits = CellSequence(Record("o", {At(0, 3.0, 3.0), At(10, 2.5, 2.5)}), g);
  ASSERT_EQ(visits.size(), 1u);
  EXPECT_EQ(visits[0].cell, (CellIndex{2, 2}));
}

TEST(FlowTensorTest, HandCountedTwoByTwo) {
  // Two trajectories on a 2x2 grid over two 600 s intervals.
  const GridSpec g = UnitGrid(2, 2);
  TrajectoryStore store({
      Record("a", {At(0, 0.5, 0.5), At(1200, 1.5, 0.5)}),    // crosses at t=600
      Record("b", {At(100, 1.5, 1.5), At(300, 1.5, 0.5)}),   // crosses at t=200
  });
  RasterStats st;
  const FlowTensor t = BuildFlowTensor(store, g, 600, 0, 2, &st);
  EXPECT_EQ(t.outflow(0, {1, 1}), 1u);
  EXPECT_EQ(t.inflow(0, {0, 1}), 1u);
  EXPECT_EQ(t.outflow(1, {0, 0}), 1u);
  EXPECT_EQ(t.inflow(1, {0, 1}), 1u);
  EXPECT_EQ(t.TotalInflow(), 2u);
  EXPECT_EQ(t.TotalOutflow(), 2u);
  EXPECT_EQ(st.dropped_out_of_range, 0u);
}

TEST(FlowTensorTest, EventsOutsideTimeSpanAreDropped) {
  const GridSpec g = UnitGrid(1, 2);
  TrajectoryStore store({Record("a", {At(0, 0.5, 0.5), At(2000, 1.5, 0.5)})});
  RasterStats st;
  const FlowTensor t = BuildFlowTensor(store, g, 600, 0, 1, &st);
  EXPECT_EQ(t.TotalInflow(), 0u);
  EXPECT_EQ(st.dropped_out_of_range, 2u);
}

TEST(FlowTensorTest, BinaryRoundTrip) {
  const GridSpec g = UnitGrid(3, 4);
  FlowTensor t(g, 600, -1200, 5);
  Rng rng(9);
  for (int i = 0; i < 5; ++i) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) {
        t.inflow(i, {r, c}) = static_cast<uint32_t>(rng.UniformIndex(100));
        t.outflow(i, {r, c}) = static_cast<uint32_t>(rng.UniformIndex(100));
      }
    }
  }
  std::stringstream buf;
  t.Write(buf);
  EXPECT_EQ(buf.str().substr(0, 4), "TPFT");
  const FlowTensor back = FlowTensor::Read(buf, g);
  EXPECT_EQ(back, t);
  std::stringstream again;
  back.Write(again);
  EXPECT_EQ(again.str().size(), 4 + 4 * 5 + 8 + 2 * 4 * 5 * 12u);
}

TEST(FlowTensorTest, ReadRejectsMismatchedGridAndMissingFile) {
  const GridSpec g = UnitGrid(3, 4);
  std::stringstream buf;
  FlowTensor(g, 600, 0, 1).Write(buf);
  EXPECT_THROW(FlowTensor::Read(buf, UnitGrid(4, 3)), Error);
  try {
    FlowTensor::Load("/nonexistent/flows.tpft", g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingArtifact);
  }
}

// Per cell, entries minus exits equals [ends in cell] - [starts in cell],
// summed over trajectories. Points may lie outside the box.
TEST(FlowTensorTest, PerCellConservationOnRandomWalks) {
  const GridSpec g = UnitGrid(5, 7);
  Rng rng(17);
  std::vector<TrajectoryRecord> records;
  std::map<int, long> expected;  // flat cell -> last-in minus first-in
  auto cell_of = [&](const TrajectoryPoint& p) -> std::optional<int> {
    if (p.lon < 0 || p.lon > 7 || p.lat < 0 || p.lat > 5) return std::nullopt;
    const int c = std::min(static_cast<int>(p.lon), 6);
    const int r = std::min(static_cast<int>(p.lat), 4);
    return r * 7 + c;
  };
  for (int i = 0; i < 300; ++i) {
    std::vector<TrajectoryPoint> pts;
    const int n = 2 + static_cast<int>(rng.UniformIndex(12));
    for (int k = 0; k < n; ++k) pts.push_back(At(k * 37, rng.Uniform(-1, 8), rng.Uniform(-1, 6)));
    if (auto c = cell_of(pts.back())) ++expected[*c];
    if (auto c = cell_of(pts.front())) --expected[*c];
    records.push_back(Record("o" + std::to_string(i), std::move(pts)));
  }
  const FlowTensor t = BuildFlowTensor(TrajectoryStore(std::move(records)), g, 600, 0, 1);
  for (int cell = 0; cell < 35; ++cell) {
    const CellIndex ci = g.Unflat(cell);
    const long net = static_cast<long>(t.inflow(0, ci)) - static_cast<long>(t.outflow(0, ci));
    EXPECT_EQ(net, expected[cell]) << "cell " << cell;
  }
}

}  // namespace
}  // namespace flowx
