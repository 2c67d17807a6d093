#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "flowx/trajdata.h"

namespace flowx {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Cell index along one axis for coordinate `u`, looking in direction `du`.
// A coordinate sitting exactly on a grid line belongs to the cell the motion
// is heading into.
int AxisCell(double u, double du, int n) {
  int c = (du < 0.0) ? static_cast<int>(std::ceil(u)) - 1 : static_cast<int>(std::floor(u));
  return std::clamp(c, 0, n - 1);
}

// Liang-Barsky entry parameter of the segment a + s*d, s in [0,1], into
// [0,w]x[0,h]. Returns nullopt when the segment misses the box.
std::optional<double> ClipEntry(double ax, double ay, double dx, double dy, double w, double h) {
  double s0 = 0.0;
  double s1 = 1.0;
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {ax, w - ax, ay, h - ay};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return std::nullopt;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) {
      s0 = std::max(s0, r);
    } else {
      s1 = std::min(s1, r);
    }
    if (s0 > s1) return std::nullopt;
  }
  return s0;
}

class Walker {
 public:
  Walker(const GridSpec& grid, std::vector<CellVisit>& out) : grid_(grid), out_(out) {}

  void Open(CellIndex cell, double t, bool from_outside) {
    current_ = CellVisit{cell, t, t, from_outside, false};
  }
  bool is_open() const { return current_.has_value(); }
  CellIndex cell() const { return current_->cell; }

  void Close(double t, bool to_outside) {
    current_->exit_t = std::max(t, current_->enter_t);
    current_->exits_to_outside = to_outside;
    out_.push_back(*current_);
    current_.reset();
  }

  void Move(CellIndex next, double t) {
    Close(t, false);
    Open(next, t, false);
  }

 private:
  const GridSpec& grid_;
  std::vector<CellVisit>& out_;
  std::optional<CellVisit> current_;
};

}  // namespace

std::vector<CellVisit> CellSequence(const TrajectoryRecord& record, const GridSpec& grid,
                                    CellSequenceStats* stats) {
  CellSequenceStats local;
  CellSequenceStats& st = stats ? *stats : local;
  std::vector<CellVisit> visits;
  const auto& pts = record.points;
  if (pts.empty()) return visits;

  const int cols = grid.cols();
  const int rows = grid.rows();
  std::vector<std::pair<double, double>> uv(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    uv[i] = grid.ToGrid(pts[i].lon, pts[i].lat);
    if (!grid.Contains(pts[i].lon, pts[i].lat)) ++st.outside_points;
  }
  auto inside = [&](size_t i) { return grid.Contains(pts[i].lon, pts[i].lat); };

  Walker walker(grid, visits);
  if (inside(0)) {
    double du = 0.0;
    double dv = 0.0;
    if (pts.size() > 1) {
      du = uv[1].first - uv[0].first;
      dv = uv[1].second - uv[0].second;
    }
    walker.Open({AxisCell(uv[0].second, dv, rows), AxisCell(uv[0].first, du, cols)},
                static_cast<double>(pts[0].t), false);
  }

  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto [u0, v0] = uv[i];
    const double du = uv[i + 1].first - u0;
    const double dv = uv[i + 1].second - v0;
    const double t0 = static_cast<double>(pts[i].t);
    const double dt = static_cast<double>(pts[i + 1].t - pts[i].t);
    auto time_at = [&](double s) { return t0 + s * dt; };

    double s_start = 0.0;
    if (!walker.is_open()) {
      const std::optional<double> entry = ClipEntry(u0, v0, du, dv, cols, rows);
      if (!entry) {
        ++st.outside_segments;
        continue;
      }
      s_start = *entry;
      const double ue = u0 + s_start * du;
      const double ve = v0 + s_start * dv;
      walker.Open({AxisCell(ve, dv, rows), AxisCell(ue, du, cols)}, time_at(s_start), true);
    }

    // Grid-line traversal from the open cell until the segment ends or leaves.
    int col = walker.cell().col;
    int row = walker.cell().row;
    auto next_u = [&] {
      if (du > 0.0) return (col + 1 - u0) / du;
      if (du < 0.0) return (col - u0) / du;
      return kInf;
    };
    auto next_v = [&] {
      if (dv > 0.0) return (row + 1 - v0) / dv;
      if (dv < 0.0) return (row - v0) / dv;
      return kInf;
    };
    double su = next_u();
    double sv = next_v();
    while (true) {
      const double s = std::max(std::min(su, sv), s_start);
      if (!(s < 1.0)) break;
      const bool step_u = su <= sv;
      const bool step_v = sv <= su;
      if (step_u) col += du > 0.0 ? 1 : -1;
      if (step_v) row += dv > 0.0 ? 1 : -1;
      if (col < 0 || col >= cols || row < 0 || row >= rows) {
        walker.Close(time_at(s), true);
        break;
      }
      walker.Move({row, col}, time_at(s));
      if (step_u) su = next_u();
      if (step_v) sv = next_v();
    }
  }
  if (walker.is_open()) walker.Close(static_cast<double>(pts.back().t), false);
  return visits;
}

std::vector<CrossingEvent> CrossingEvents(const TrajectoryRecord& record, const GridSpec& grid) {
  const std::vector<CellVisit> visits = CellSequence(record, grid);
  std::vector<CrossingEvent> events;
  for (size_t i = 0; i < visits.size(); ++i) {
    const CellVisit& v = visits[i];
    const bool continues_from_prev = i > 0 && !visits[i - 1].exits_to_outside &&
                                     !v.entered_from_outside;
    if (v.entered_from_outside || continues_from_prev) {
      events.push_back({v.cell, v.enter_t, FlowDirection::kIn});
    }
    const bool continues_to_next = i + 1 < visits.size() && !v.exits_to_outside &&
                                   !visits[i + 1].entered_from_outside;
    if (v.exits_to_outside || continues_to_next) {
      events.push_back({v.cell, v.exit_t, FlowDirection::kOut});
    }
  }
  // Out events of a transition precede the matching in event at equal times.
  std::stable_sort(events.begin(), events.end(),
                   [](const CrossingEvent& a, const CrossingEvent& b) { return a.t < b.t; });
  return events;
}

}  // namespace flowx
