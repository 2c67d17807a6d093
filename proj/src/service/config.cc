#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "flowx/error.h"
#include "flowx/service.h"

namespace flowx {
namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename T>
bool ParseInt(std::string_view s, T& out) {
  s = Trim(s);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

bool ParseReal(std::string_view s, double& out) {
  s = Trim(s);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

std::vector<std::string_view> Split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t pos = s.find(sep, start);
    out.push_back(Trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<IntervalRange> ParseRange(std::string_view s) {
  const auto parts = Split(s, ':');
  IntervalRange r;
  if (parts.size() != 2 || !ParseInt(parts[0], r.begin) || !ParseInt(parts[1], r.end)) {
    return std::nullopt;
  }
  return r;
}

constexpr std::string_view kKeys[] = {
    "artifacts",     "bbox",          "bind_address",     "candidate_cap", "demo_range",
    "explain_channel", "grid_cols",   "grid_rows",        "ha_period",     "horizons",
    "interpreted_horizon", "interval_seconds", "intersections", "k",       "kmeans_max_iter",
    "masker",        "mc_permutations", "n_intervals",    "port",          "predictor",
    "ridge_lambda",  "seed",          "t0",               "train_range",   "trajectories",
};

class Builder {
 public:
  Builder(const std::filesystem::path& base_dir) : base_dir_(base_dir) {}

  void Set(const std::string& key, std::string_view value, std::string_view origin) {
    auto bad = [&](std::string_view what) {
      problems_.push_back(fmt::format("{}: {} = '{}': {}", origin, key, value, what));
    };
    auto integer = [&](auto& field) {
      if (!ParseInt(value, field)) bad("expected an integer");
    };
    ServiceConfig& c = config_;
    if (key == "trajectories") {
      c.trajectories = Path(value);
    } else if (key == "intersections") {
      c.intersections = Path(value);
    } else if (key == "artifacts") {
      c.artifacts = Path(value);
    } else if (key == "bbox") {
      const auto parts = Split(value, ',');
      BoundingBox b;
      if (parts.size() != 4 || !ParseReal(parts[0], b.lon_min) || !ParseReal(parts[1], b.lat_min) ||
          !ParseReal(parts[2], b.lon_max) || !ParseReal(parts[3], b.lat_max)) {
        bad("expected lon_min,lat_min,lon_max,lat_max");
      } else {
        c.bbox = b;
      }
    } else if (key == "grid_rows") {
      integer(c.grid_rows);
    } else if (key == "grid_cols") {
      integer(c.grid_cols);
    } else if (key == "k") {
      integer(c.k);
    } else if (key == "kmeans_max_iter") {
      integer(c.kmeans_max_iter);
    } else if (key == "interval_seconds") {
      integer(c.interval_seconds);
    } else if (key == "t0") {
      int64_t v = 0;
      if (ParseInt(value, v)) c.t0 = v; else bad("expected an integer");
    } else if (key == "n_intervals") {
      int v = 0;
      if (ParseInt(value, v)) c.n_intervals = v; else bad("expected an integer");
    } else if (key == "predictor") {
      const auto kind = ParsePredictorKind(Trim(value));
      if (kind) c.predictor.kind = *kind; else bad("expected persistence, historical_average or ridge");
    } else if (key == "ridge_lambda") {
      if (!ParseReal(value, c.predictor.lambda)) bad("expected a number");
    } else if (key == "ha_period") {
      integer(c.predictor.period_intervals);
    } else if (key == "train_range") {
      const auto r = ParseRange(value);
      if (r) c.train_range = r; else bad("expected begin:end");
    } else if (key == "horizons") {
      integer(c.horizons);
    } else if (key == "interpreted_horizon") {
      integer(c.interpreted_horizon);
    } else if (key == "mc_permutations") {
      integer(c.mc_permutations);
    } else if (key == "candidate_cap") {
      integer(c.candidate_cap);
    } else if (key == "masker") {
      c.masker = std::string(Trim(value));
    } else if (key == "explain_channel") {
      const std::string_view v = Trim(value);
      if (v == "inflow") {
        c.explain_channel = FlowChannel::kInflow;
      } else if (v == "outflow") {
        c.explain_channel = FlowChannel::kOutflow;
      } else {
        bad("expected inflow or outflow");
      }
    } else if (key == "demo_range") {
      const auto r = ParseRange(value);
      if (r) c.demo_range = r; else bad("expected begin:end");
    } else if (key == "bind_address") {
      c.bind_address = std::string(Trim(value));
    } else if (key == "port") {
      integer(c.port);
    } else if (key == "seed") {
      integer(c.seed);
    } else {
      problems_.push_back(fmt::format("{}: unknown key '{}'", origin, key));
    }
  }

  void ApplyEnvironment(const EnvLookup& env) {
    for (std::string_view key : kKeys) {
      std::string name = "FLOWX_";
      for (char ch : key) name += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
      if (auto v = env(name)) Set(std::string(key), *v, name);
    }
  }

  ServiceConfig Finish() {
    const ServiceConfig& c = config_;
    auto check = [&](bool ok, std::string msg) {
      if (!ok) problems_.push_back(std::move(msg));
    };
    check(c.grid_rows >= 1 && c.grid_cols >= 1, "grid_rows and grid_cols must be >= 1");
    check(c.k >= 1, "k must be >= 1");
    check(c.kmeans_max_iter >= 1, "kmeans_max_iter must be >= 1");
    check(c.interval_seconds > 0, "interval_seconds must be positive");
    check(!c.n_intervals || *c.n_intervals >= 1, "n_intervals must be >= 1");
    check(c.predictor.lambda >= 0.0, "ridge_lambda must be >= 0");
    check(c.predictor.period_intervals >= 1, "ha_period must be >= 1");
    check(!c.train_range || c.train_range->begin < c.train_range->end,
          "train_range must be non-empty");
    check(c.horizons >= kGlyphPoints,
          fmt::format("horizons must be >= {} for the glyph forecast line", kGlyphPoints));
    check(c.interpreted_horizon >= 1 && c.interpreted_horizon <= std::min(c.horizons, kGlyphPoints),
          "interpreted_horizon must lie within the glyph horizons");
    check(c.mc_permutations >= 1, "mc_permutations must be >= 1");
    check(c.candidate_cap >= 1 && c.candidate_cap <= kMaxExactPlayers,
          fmt::format("candidate_cap must be in 1..{}", kMaxExactPlayers));
    check(c.masker == "historical_mean" || c.masker == "zero",
          "masker must be historical_mean or zero");
    check(!c.demo_range || c.demo_range->begin < c.demo_range->end,
          "demo_range must be non-empty");
    check(c.port >= 0 && c.port <= 65535, "port must be in 0..65535");
    if (c.bbox) {
      check(c.bbox->lon_min < c.bbox->lon_max && c.bbox->lat_min < c.bbox->lat_max,
            "bbox must have lon_min < lon_max and lat_min < lat_max");
    }
    if (!problems_.empty()) {
      std::string detail;
      for (const std::string& p : problems_) {
        if (!detail.empty()) detail += '\n';
        detail += p;
      }
      throw Error(ErrorKind::kConfig,
                  fmt::format("invalid configuration ({} problem{})", problems_.size(),
                              problems_.size() == 1 ? "" : "s"),
                  detail);
    }
    return config_;
  }

  void Problem(std::string p) { problems_.push_back(std::move(p)); }

 private:
  std::filesystem::path Path(std::string_view value) const {
    std::filesystem::path p{std::string(Trim(value))};
    if (p.is_relative() && !p.empty()) p = base_dir_ / p;
    return p.lexically_normal();
  }

  std::filesystem::path base_dir_;
  ServiceConfig config_;
  std::vector<std::string> problems_;
};

ServiceConfig Resolve(std::string_view text, const std::filesystem::path& base_dir,
                      const EnvLookup& env) {
  Builder b(base_dir);
  b.Set("artifacts", "artifacts", "default");
  size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    const std::string_view body = Trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const size_t eq = body.find('=');
    if (eq == std::string_view::npos) {
      b.Problem(fmt::format("line {}: expected key = value", line_no));
      continue;
    }
    b.Set(std::string(Trim(body.substr(0, eq))), Trim(body.substr(eq + 1)),
          fmt::format("line {}", line_no));
  }
  b.ApplyEnvironment(env);
  return b.Finish();
}

}  // namespace

EnvLookup ProcessEnvironment() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (v == nullptr) return std::nullopt;
    return std::string(v);
  };
}

uint64_t Fnv1a(std::string_view data) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ServiceConfig ParseConfig(std::string_view text, const std::filesystem::path& base_dir,
                          const EnvLookup& env) {
  return Resolve(text, base_dir, env);
}

ServiceConfig LoadConfig(const std::filesystem::path& path, const EnvLookup& env) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kConfig, "cannot read config file", path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return Resolve(text.str(), path.parent_path(), env);
}

ServiceConfig DefaultConfig(const EnvLookup& env) {
  return Resolve("", std::filesystem::current_path(), env);
}

std::string ServiceConfig::Canonical() const {
  auto opt_range = [](const std::optional<IntervalRange>& r) {
    return r ? fmt::format("{}:{}", r->begin, r->end) : std::string("auto");
  };
  std::map<std::string, std::string> kv;
  kv["trajectories"] = trajectories.string();
  kv["intersections"] = intersections.string();
  kv["artifacts"] = artifacts.string();
  kv["bbox"] = bbox ? fmt::format("{:.9f},{:.9f},{:.9f},{:.9f}", bbox->lon_min, bbox->lat_min,
                                  bbox->lon_max, bbox->lat_max)
                    : "auto";
  kv["grid_rows"] = std::to_string(grid_rows);
  kv["grid_cols"] = std::to_string(grid_cols);
  kv["k"] = std::to_string(k);
  kv["kmeans_max_iter"] = std::to_string(kmeans_max_iter);
  kv["interval_seconds"] = std::to_string(interval_seconds);
  kv["t0"] = t0 ? std::to_string(*t0) : "auto";
  kv["n_intervals"] = n_intervals ? std::to_string(*n_intervals) : "auto";
  kv["predictor"] = std::string(PredictorKindName(predictor.kind));
  kv["ridge_lambda"] = fmt::format("{}", predictor.lambda);
  kv["ha_period"] = std::to_string(predictor.period_intervals);
  kv["train_range"] = opt_range(train_range);
  kv["horizons"] = std::to_string(horizons);
  kv["interpreted_horizon"] = std::to_string(interpreted_horizon);
  kv["mc_permutations"] = std::to_string(mc_permutations);
  kv["candidate_cap"] = std::to_string(candidate_cap);
  kv["masker"] = masker;
  kv["explain_channel"] = explain_channel == FlowChannel::kInflow ? "inflow" : "outflow";
  kv["demo_range"] = opt_range(demo_range);
  kv["bind_address"] = bind_address;
  kv["port"] = std::to_string(port);
  kv["seed"] = std::to_string(seed);
  std::string out;
  for (const auto& [key, value] : kv) out += key + "=" + value + "\n";
  return out;
}

uint64_t ServiceConfig::Hash() const { return Fnv1a(Canonical()); }

}  // namespace flowx
