#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "flowx/error.h"
#include "flowx/flow_tensor.h"
#include "flowx/synth.h"
#include "test_util.h"

namespace flowx {
namespace {

std::string ReadFile(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SynthParams Small(uint64_t seed) {
  SynthParams p;
  p.vehicles = 80;
  p.hours = 3;
  p.seed = seed;
  return p;
}

TEST(SynthTest, NoVehiclesNoEvents) {
  SynthParams p = Small(1);
  p.vehicles = 0;
  p.congestion_events = 0;
  const SynthScenario s = GenerateSynth(p);
  EXPECT_TRUE(s.trajectories.empty());
  EXPECT_TRUE(s.events.empty());
  EXPECT_EQ(s.intersections.size(), 500u);
  const auto dir = testing::TempDir("synth_empty");
  WriteSynthScenario(s, dir);
  EXPECT_EQ(ReadFile(dir / "trajectories.csv"), "driver_id,order_id,timestamp,lon,lat\n");
  const auto manifest = nlohmann::json::parse(ReadFile(dir / "manifest.json"));
  EXPECT_TRUE(manifest["events"].empty());
  EXPECT_TRUE(std::filesystem::exists(dir / "scenario.conf"));
}

TEST(SynthTest, SameSeedSameBytes) {
  const auto a = testing::TempDir("synth_a");
  const auto b = testing::TempDir("synth_b");
  const auto c = testing::TempDir("synth_c");
  WriteSynthScenario(GenerateSynth(Small(5)), a);
  WriteSynthScenario(GenerateSynth(Small(5)), b);
  WriteSynthScenario(GenerateSynth(Small(6)), c);
  for (const char* f : {"trajectories.csv", "intersections.csv", "manifest.json", "scenario.conf"}) {
    EXPECT_EQ(ReadFile(a / f), ReadFile(b / f)) << f;
  }
  EXPECT_NE(ReadFile(a / "trajectories.csv"), ReadFile(c / "trajectories.csv"));
}

TEST(SynthTest, PointsAndIntersectionsStayInTheBox) {
  const SynthScenario s = GenerateSynth(Small(7));
  const BoundingBox& bb = s.params.bbox;
  for (const auto& r : s.trajectories.records()) {
    ASSERT_GE(r.points.size(), 2u);
    for (const auto& pt : r.points) {
      EXPECT_GE(pt.lon, bb.lon_min);
      EXPECT_LE(pt.lon, bb.lon_max);
      EXPECT_GE(pt.lat, bb.lat_min);
      EXPECT_LE(pt.lat, bb.lat_max);
      EXPECT_GE(pt.t, s.params.t_start);
    }
  }
  std::set<std::string> ids;
  for (const auto& in : s.intersections) {
    ids.insert(in.id);
    EXPECT_GE(in.lon, bb.lon_min);
    EXPECT_LE(in.lat, bb.lat_max);
  }
  EXPECT_EQ(ids.size(), s.intersections.size());
  EXPECT_EQ(s.n_intervals, 3 * 6);
}

TEST(SynthTest, PlantedEventsAreRecoverableFromTheRaster) {
  SynthParams p = Small(11);
  p.vehicles = 300;
  p.hours = 6;
  p.congestion_events = 2;
  const SynthScenario s = GenerateSynth(p);
  ASSERT_EQ(s.events.size(), 2u);
  const GridSpec grid(p.bbox, p.rows, p.cols);
  const FlowTensor all = BuildFlowTensor(s.trajectories, grid, p.interval_seconds, p.t_start,
                                         s.n_intervals);
  for (const PlantedEvent& e : s.events) {
    ASSERT_EQ(e.contributing.size(), static_cast<size_t>(p.vehicles_per_event));
    EXPECT_EQ(e.boost, 2 * p.vehicles_per_event);
    EXPECT_EQ(e.time, p.t_start + static_cast<int64_t>(e.interval) * p.interval_seconds);
    EXPECT_TRUE(std::is_sorted(e.contributing.begin(), e.contributing.end()));

    std::vector<TrajectoryRecord> planted;
    for (const std::string& id : e.contributing) {
      const auto idx = s.trajectories.Find(id);
      ASSERT_TRUE(idx.has_value()) << id;
      planted.push_back(s.trajectories.records()[*idx]);
    }
    const FlowTensor only = BuildFlowTensor(TrajectoryStore(planted), grid, p.interval_seconds,
                                            p.t_start, s.n_intervals);
    EXPECT_EQ(only.inflow(e.interval, e.cell), static_cast<uint32_t>(e.boost));

    // The event stands out against the cell's own history.
    const double total = all.inflow(e.interval, e.cell);
    EXPECT_GE(total, e.boost);
    double sum = 0.0, sq = 0.0;
    int n = 0;
    for (int t = 0; t < s.n_intervals; ++t) {
      if (t == e.interval) continue;
      const double v = all.inflow(t, e.cell);
      sum += v;
      sq += v * v;
      ++n;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(std::max(0.0, sq / n - mean * mean));
    EXPECT_GT(total, mean + 3 * sd);
  }
}

TEST(SynthTest, ConfigErrors) {
  SynthParams p = Small(1);
  p.vehicles = -1;
  EXPECT_THROW(GenerateSynth(p), Error);
  p = Small(1);
  p.hours = 1;  // 6 intervals
  try {
    GenerateSynth(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
  p.congestion_events = 0;
  EXPECT_NO_THROW(GenerateSynth(p));
}

}  // namespace
}  // namespace flowx
