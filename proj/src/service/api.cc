#include <charconv>
#include <regex>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "flowx/error.h"
#include "flowx/service.h"

namespace flowx {
namespace {

const std::map<std::string, std::string> kCorsHeaders = {
    {"Access-Control-Allow-Origin", "*"},
    {"Access-Control-Allow-Methods", "GET, OPTIONS"},
    {"Access-Control-Allow-Headers", "Content-Type"},
};

int StatusFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kInput:
    case ErrorKind::kCapacity:
    case ErrorKind::kDegenerate: return 422;
    case ErrorKind::kState: return 503;
    default: return 500;
  }
}

// Missing or malformed query parameters.
struct BadRequest {
  std::string message;
};

int IntParam(const std::map<std::string, std::string>& query, const std::string& name,
             std::optional<int> fallback = std::nullopt) {
  const auto it = query.find(name);
  if (it == query.end()) {
    if (fallback) return *fallback;
    throw BadRequest{fmt::format("missing query parameter '{}'", name)};
  }
  int v = 0;
  const std::string& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw BadRequest{fmt::format("query parameter '{}' must be an integer", name)};
  }
  return v;
}

int PathInt(const std::string& s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::kNotFound, "path component is not an integer", s);
  }
  return v;
}

ApiResponse WithCors(ApiResponse r) {
  r.headers.insert(kCorsHeaders.begin(), kCorsHeaders.end());
  r.headers.emplace("Content-Type", "application/json");
  return r;
}

}  // namespace

ApiResponse ErrorResponse(int status, std::string_view code, std::string_view message,
                          std::string_view detail) {
  ApiResponse r;
  r.status = status;
  r.body = DumpJson({{"code", code}, {"message", message}, {"detail", detail}});
  return r;
}

ApiHandler::ApiHandler(std::chrono::milliseconds async_threshold)
    : async_threshold_(async_threshold) {}

void ApiHandler::Initialize(std::shared_ptr<const Scenario> scenario) {
  scenario_ = std::move(scenario);
  const ServiceConfig& c = scenario_->config();
  if (c.demo_range) {
    const int lo = std::max(c.demo_range->begin, kWindowLength - 1);
    const int hi = std::min(c.demo_range->end, scenario_->tensor().n_intervals());
    for (int base = lo; base < hi; ++base) {
      std::map<std::string, std::string> q{{"base", std::to_string(base)}};
      const ApiResponse r = Route("GET", "/api/glyphs", q);
      if (r.status != 200) spdlog::warn("glyph precompute for base {} returned {}", base, r.status);
    }
    spdlog::info("precomputed glyphs for bases {}..{}", lo, hi - 1);
  }
  ready_.store(true);
}

ApiResponse ApiHandler::Cached(const std::string& key, ResultCache::Producer produce,
                               bool async) {
  const std::string full_key = fmt::format("{:016x}|{}", scenario_->config_hash(), key);
  std::shared_future<std::string> f = cache_.Get(full_key, std::move(produce));
  if (async && f.wait_for(async_threshold_) != std::future_status::ready) {
    const std::string token = fmt::format("{:016x}", Fnv1a(full_key));
    {
      std::lock_guard lock(jobs_mu_);
      jobs_[token] = full_key;
    }
    ApiResponse r;
    r.status = 202;
    r.body = DumpJson({{"status", "pending"}, {"token", token}, {"poll", "/api/jobs/" + token}});
    r.headers["Retry-After"] = "1";
    return r;
  }
  try {
    return ApiResponse{200, f.get(), {}};
  } catch (const Error& e) {
    return ErrorResponse(StatusFor(e.kind()), ErrorKindName(e.kind()), e.what(), e.detail());
  } catch (const std::exception& e) {
    return ErrorResponse(500, "internal", e.what());
  }
}

ApiResponse ApiHandler::Job(const std::string& token) {
  std::string key;
  {
    std::lock_guard lock(jobs_mu_);
    const auto it = jobs_.find(token);
    if (it == jobs_.end()) return ErrorResponse(404, "not_found", "unknown job token", token);
    key = it->second;
  }
  const auto f = cache_.Find(key);
  if (!f) return ErrorResponse(404, "not_found", "unknown job token", token);
  if (f->wait_for(std::chrono::milliseconds(0)) != std::future_status::ready) {
    ApiResponse r;
    r.status = 202;
    r.body = DumpJson({{"status", "pending"}, {"token", token}, {"poll", "/api/jobs/" + token}});
    r.headers["Retry-After"] = "1";
    return r;
  }
  try {
    return ApiResponse{200, f->get(), {}};
  } catch (const Error& e) {
    return ErrorResponse(StatusFor(e.kind()), ErrorKindName(e.kind()), e.what(), e.detail());
  } catch (const std::exception& e) {
    return ErrorResponse(500, "internal", e.what());
  }
}

ApiResponse ApiHandler::Handle(std::string_view method, std::string_view path,
                               const std::map<std::string, std::string>& query) {
  if (method == "OPTIONS") return WithCors(ApiResponse{204, "", {}});
  if (!ready_.load()) {
    ApiResponse r = ErrorResponse(503, "initializing", "scenario is still loading");
    r.headers["Retry-After"] = "1";
    return WithCors(std::move(r));
  }
  return Route(method, path, query);
}

ApiResponse ApiHandler::Route(std::string_view method, std::string_view path_view,
                              const std::map<std::string, std::string>& query) {
  if (method != "GET") {
    return WithCors(ErrorResponse(405, "method_not_allowed", "only GET is supported"));
  }
  const std::string path(path_view);
  static const std::regex kCluster(R"(^/api/attributions/cluster/([^/]+)$)");
  static const std::regex kGrid(R"(^/api/attributions/grid/([^/]+)/([^/]+)$)");
  static const std::regex kJob(R"(^/api/jobs/([0-9a-f]+)$)");
  std::smatch m;
  const std::shared_ptr<const Scenario> s = scenario_;
  try {
    if (path == "/api/meta") {
      return WithCors(Cached("meta", [s] { return DumpJson(MetaDocument(*s)); }, false));
    }
    if (path == "/api/clusters") {
      return WithCors(Cached("clusters", [s] { return DumpJson(ClustersDocument(*s)); }, false));
    }
    if (path == "/api/flows") {
      const int t = IntParam(query, "t");
      return WithCors(Cached(fmt::format("flows/{}", t),
                             [s, t] { return DumpJson(FlowsDocument(*s, t)); }, false));
    }
    if (path == "/api/trajectories") {
      const int t = IntParam(query, "t");
      return WithCors(Cached(fmt::format("trajectories/{}", t),
                             [s, t] { return DumpJson(TrajectoriesDocument(*s, t)); }, false));
    }
    if (path == "/api/forecast") {
      const int base = IntParam(query, "base");
      return WithCors(Cached(fmt::format("forecast/{}", base),
                             [s, base] { return DumpJson(ForecastDocument(*s, base)); }, false));
    }
    if (path == "/api/glyphs") {
      const int base = IntParam(query, "base");
      return WithCors(Cached(fmt::format("glyphs/{}", base),
                             [s, base] { return DumpJson(GlyphsDocument(*s, base)); }, true));
    }
    if (std::regex_match(path, m, kCluster)) {
      const int c = PathInt(m[1]);
      const int base = IntParam(query, "base");
      const int h = IntParam(query, "h", s->config().interpreted_horizon);
      return WithCors(Cached(fmt::format("cluster/{}/{}/{}", c, base, h), [s, c, base, h] {
        return DumpJson(ClusterAttributionDocument(*s, c, base, h));
      }, true));
    }
    if (std::regex_match(path, m, kGrid)) {
      const CellIndex cell{PathInt(m[1]), PathInt(m[2])};
      const int base = IntParam(query, "base");
      const int h = IntParam(query, "h", s->config().interpreted_horizon);
      return WithCors(Cached(fmt::format("grid/{}/{}/{}/{}", cell.row, cell.col, base, h),
                             [s, cell, base, h] {
                               return DumpJson(GridAttributionDocument(*s, cell, base, h));
                             },
                             true));
    }
    if (std::regex_match(path, m, kJob)) return WithCors(Job(m[1]));
    return WithCors(ErrorResponse(404, "not_found", "unknown endpoint", path));
  } catch (const BadRequest& e) {
    return WithCors(ErrorResponse(400, "bad_request", e.message));
  } catch (const Error& e) {
    return WithCors(ErrorResponse(StatusFor(e.kind()), ErrorKindName(e.kind()), e.what(), e.detail()));
  }
}

}  // namespace flowx
