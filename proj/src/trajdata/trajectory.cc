#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string_view>
#include <tuple>

#include "flowx/error.h"
#include "flowx/trajdata.h"

namespace flowx {
namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

// Splits on commas; returns false unless there are exactly `n` fields.
bool SplitFields(std::string_view line, std::string_view* out, size_t n) {
  size_t count = 0;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (count == n) return false;
    out[count++] = Trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return count == n;
}

template <typename T>
bool ParseNumber(std::string_view s, T& value) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size();
}

struct RawPoint {
  std::string vehicle;
  TrajectoryPoint point;
};

}  // namespace

TrajectoryStore::TrajectoryStore(std::vector<TrajectoryRecord> records)
    : records_(std::move(records)) {
  std::sort(records_.begin(), records_.end(),
            [](const TrajectoryRecord& a, const TrajectoryRecord& b) {
              return a.order_id < b.order_id;
            });
  for (const TrajectoryRecord& r : records_) {
    if (r.points.empty()) {
      throw Error(ErrorKind::kInput, "trajectory record without points", r.order_id);
    }
    for (size_t i = 0; i < r.points.size(); ++i) {
      const TrajectoryPoint& p = r.points[i];
      if (p.lon < -180 || p.lon > 180 || p.lat < -90 || p.lat > 90) {
        throw Error(ErrorKind::kInput, "coordinate out of range", r.order_id);
      }
      if (i > 0 && p.t <= r.points[i - 1].t) {
        throw Error(ErrorKind::kInput, "timestamps not strictly increasing", r.order_id);
      }
    }
    const int64_t lo = r.points.front().t;
    const int64_t hi = r.points.back().t;
    if (!time_range_) {
      time_range_ = TimeRange{lo, hi};
    } else {
      time_range_->t_min = std::min(time_range_->t_min, lo);
      time_range_->t_max = std::max(time_range_->t_max, hi);
    }
  }
}

std::optional<size_t> TrajectoryStore::Find(const std::string& order_id) const {
  auto it = std::lower_bound(
      records_.begin(), records_.end(), order_id,
      [](const TrajectoryRecord& r, const std::string& id) { return r.order_id < id; });
  if (it == records_.end() || it->order_id != order_id) return std::nullopt;
  return static_cast<size_t>(it - records_.begin());
}

TrajectoryStore ParseTrajectories(std::istream& in, ParseStats* stats) {
  if (!in) throw Error(ErrorKind::kInput, "trajectory source is not readable");
  ParseStats local;
  ParseStats& st = stats ? *stats : local;
  st = ParseStats{};

  std::map<std::string, std::vector<RawPoint>> by_order;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    const std::string_view view = Trim(line);
    if (view.empty()) continue;
    ++st.lines;
    std::string_view f[5];
    const bool split = SplitFields(view, f, 5);
    int64_t t = 0;
    double lon = 0.0;
    double lat = 0.0;
    const bool t_ok = split && ParseNumber(f[2], t);
    if (first) {
      first = false;
      if (split && !t_ok) {
        ++st.header_lines;
        continue;
      }
    }
    const bool ok = t_ok && ParseNumber(f[3], lon) && ParseNumber(f[4], lat) &&
                    lon >= -180 && lon <= 180 && lat >= -90 && lat <= 90 &&
                    !f[1].empty();
    if (!ok) {
      if (st.malformed++ == 0) st.sample_malformed = std::string(view);
      continue;
    }
    by_order[std::string(f[1])].push_back({std::string(f[0]), {t, lon, lat}});
  }
  if (in.bad()) throw Error(ErrorKind::kInput, "error while reading trajectory source");

  const size_t data_lines = st.lines - st.header_lines;
  if (data_lines > 0 && st.malformed * 2 > data_lines) {
    throw Error(ErrorKind::kFormat,
                "more than half of the trajectory lines are malformed (" +
                    std::to_string(st.malformed) + " of " + std::to_string(data_lines) + ")",
                st.sample_malformed);
  }

  std::vector<TrajectoryRecord> records;
  records.reserve(by_order.size());
  for (auto& [order, raw] : by_order) {
    // Full ordering so the result does not depend on line order.
    std::sort(raw.begin(), raw.end(), [](const RawPoint& a, const RawPoint& b) {
      return std::tie(a.point.t, a.point.lon, a.point.lat, a.vehicle) <
             std::tie(b.point.t, b.point.lon, b.point.lat, b.vehicle);
    });
    TrajectoryRecord rec;
    rec.order_id = order;
    rec.vehicle_id = raw.front().vehicle;
    for (const RawPoint& rp : raw) {
      rec.vehicle_id = std::min(rec.vehicle_id, rp.vehicle);
      if (!rec.points.empty() && rec.points.back().t == rp.point.t) {
        ++st.duplicate_points;
        continue;
      }
      rec.points.push_back(rp.point);
    }
    records.push_back(std::move(rec));
  }
  return TrajectoryStore(std::move(records));
}

TrajectoryStore LoadTrajectories(const std::filesystem::path& path, ParseStats* stats) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kInput, "cannot open trajectory file", path.string());
  return ParseTrajectories(in, stats);
}

void WriteTrajectories(const TrajectoryStore& store, std::ostream& out) {
  char buf[64];
  for (const TrajectoryRecord& r : store.records()) {
    for (const TrajectoryPoint& p : r.points) {
      out << r.vehicle_id << ',' << r.order_id << ',' << p.t << ',';
      auto res = std::to_chars(buf, buf + sizeof(buf), p.lon, std::chars_format::fixed, 6);
      out.write(buf, res.ptr - buf);
      out << ',';
      res = std::to_chars(buf, buf + sizeof(buf), p.lat, std::chars_format::fixed, 6);
      out.write(buf, res.ptr - buf);
      out << '\n';
    }
  }
}

}  // namespace flowx
