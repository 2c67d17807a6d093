#ifndef FLOWX_SERVICE_H_
#define FLOWX_SERVICE_H_

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flowx/explain.h"
#include "flowx/flow_tensor.h"
#include "flowx/partition.h"
#include "flowx/predict.h"
#include "flowx/trajdata.h"

namespace flowx {

// ---------------------------------------------------------------------------
// Configuration

// Key/value text file, one `key = value` per line, '#' starts a comment.
// Environment variables FLOWX_<KEY> (upper case) override file values.
// Relative paths resolve against the config file's directory.
struct ServiceConfig {
  std::filesystem::path trajectories;
  std::filesystem::path intersections;
  std::filesystem::path artifacts = "artifacts";
  std::optional<BoundingBox> bbox;  // default: intersection extent padded by 1%
  int grid_rows = 20;
  int grid_cols = 20;
  int k = kDefaultClusterCount;
  int kmeans_max_iter = 300;
  int interval_seconds = kDefaultIntervalSeconds;
  std::optional<int64_t> t0;          // default: first interval boundary <= t_min
  std::optional<int> n_intervals;     // default: covers t_max
  PredictorSpec predictor;
  std::optional<IntervalRange> train_range;  // default: all intervals
  int horizons = 6;
  int interpreted_horizon = kDefaultInterpretedHorizon;
  int mc_permutations = 200;
  int candidate_cap = kDefaultCandidateCap;
  std::string masker = "historical_mean";
  FlowChannel explain_channel = FlowChannel::kInflow;
  std::optional<IntervalRange> demo_range;  // glyph bases precomputed at startup
  std::string bind_address = "127.0.0.1";
  int port = 8080;
  uint64_t seed = 42;

  // Sorted `key=value` lines covering every field.
  std::string Canonical() const;
  // FNV-1a of Canonical(); part of every cache key.
  uint64_t Hash() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup ProcessEnvironment();

// All problems are reported together in one kConfig error whose detail lists
// one problem per line.
ServiceConfig ParseConfig(std::string_view text, const std::filesystem::path& base_dir,
                          const EnvLookup& env = ProcessEnvironment());
ServiceConfig LoadConfig(const std::filesystem::path& path,
                         const EnvLookup& env = ProcessEnvironment());
// Defaults only, with environment overrides applied.
ServiceConfig DefaultConfig(const EnvLookup& env = ProcessEnvironment());

uint64_t Fnv1a(std::string_view data);

// ---------------------------------------------------------------------------
// Scenario: immutable loaded state shared by the CLI and the service.

inline constexpr const char* kFlowsArtifact = "flows.tpft";
inline constexpr const char* kPartitionArtifact = "partition.json";
inline constexpr const char* kModelArtifact = "model.tprm";

struct IngestResult {
  GridSpec grid;
  FlowTensor tensor;
  ParseStats parse;
  RasterStats raster;
};

GridSpec ResolveGrid(const ServiceConfig& config);
IngestResult Ingest(const ServiceConfig& config, const TrajectoryStore& store);
ClusterPartition PartitionStage(const ServiceConfig& config, const GridSpec& grid);
std::shared_ptr<const Predictor> TrainStage(const ServiceConfig& config, const FlowTensor& tensor,
                                            const ClusterPartition& partition);
IntervalRange ResolveTrainRange(const ServiceConfig& config, int n_intervals);

class Scenario {
 public:
  Scenario(ServiceConfig config, GridSpec grid, TrajectoryStore store, FlowTensor tensor,
           ClusterPartition partition, std::shared_ptr<const Predictor> predictor);
  Scenario(const Scenario&) = delete;
  Scenario& operator=(const Scenario&) = delete;

  // Runs every stage from the raw inputs named in the config.
  static std::shared_ptr<const Scenario> Build(const ServiceConfig& config);
  // Loads the stage artifacts from `dir` plus the raw trajectories. Throws
  // kMissingArtifact naming the stage that produces a missing file.
  static std::shared_ptr<const Scenario> FromArtifacts(const ServiceConfig& config,
                                                       const std::filesystem::path& dir);

  const ServiceConfig& config() const { return config_; }
  uint64_t config_hash() const { return config_hash_; }
  const GridSpec& grid() const { return grid_; }
  const TrajectoryStore& store() const { return store_; }
  const FlowTensor& tensor() const { return tensor_; }
  const std::vector<FlowFrame>& frames() const { return frames_; }
  const ClusterPartition& partition() const { return partition_; }
  const Predictor& predictor() const { return *predictor_; }
  const Masker& masker() const { return *masker_; }
  const TrajectoryIndex& trajectory_index() const { return index_; }
  ExplainModel model() const;

 private:
  ServiceConfig config_;
  uint64_t config_hash_;
  GridSpec grid_;
  TrajectoryStore store_;
  FlowTensor tensor_;
  std::vector<FlowFrame> frames_;
  ClusterPartition partition_;
  std::shared_ptr<const Predictor> predictor_;
  std::unique_ptr<Masker> masker_;
  TrajectoryIndex index_;
};

// ---------------------------------------------------------------------------
// Documents: JSON bodies shared by the HTTP API and the CLI. All throw
// flowx::Error; kNotFound for out-of-range times, clusters and cells, kInput
// for invalid horizons and bases without enough predecessors.

std::string DumpJson(const nlohmann::json& doc);

// Seed for a Monte Carlo attribution derived from the config seed and the
// query identity.
uint64_t AttributionSeed(const Scenario& s, std::string_view kind, std::string_view id, int base);

nlohmann::json MetaDocument(const Scenario& s);
nlohmann::json FlowsDocument(const Scenario& s, int t);
nlohmann::json TrajectoriesDocument(const Scenario& s, int t);
nlohmann::json ForecastDocument(const Scenario& s, int base);
nlohmann::json ClustersDocument(const Scenario& s);
nlohmann::json GlyphsDocument(const Scenario& s, int base);
nlohmann::json ClusterAttributionDocument(const Scenario& s, int cluster, int base, int horizon);
nlohmann::json GridAttributionDocument(const Scenario& s, CellIndex cell, int base, int horizon);

// Exact below or at kMaxExactPlayers players, Monte Carlo above.
ShapleyResult Attribute(const CoalitionGame& game, int permutations, uint64_t seed);

// ---------------------------------------------------------------------------
// Result cache: one computation per key, shared by all readers.

class ResultCache {
 public:
  using Producer = std::function<std::string()>;

  // Returns the future for `key`, launching `produce` on a new thread when
  // the key is new. Exceptions are stored in the future.
  std::shared_future<std::string> Get(const std::string& key, Producer produce);
  std::optional<std::shared_future<std::string>> Find(const std::string& key) const;
  size_t size() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_future<std::string>> entries_;
};

// ---------------------------------------------------------------------------
// HTTP API

struct ApiResponse {
  int status = 200;
  std::string body;
  std::map<std::string, std::string> headers;
};

class ApiHandler {
 public:
  explicit ApiHandler(std::chrono::milliseconds async_threshold = std::chrono::seconds(2));

  // Installs the scenario and precomputes glyphs for the configured demo
  // range; requests are answered with 503 until this returns.
  void Initialize(std::shared_ptr<const Scenario> scenario);
  bool ready() const { return ready_.load(); }

  ApiResponse Handle(std::string_view method, std::string_view path,
                     const std::map<std::string, std::string>& query);

 private:
  ApiResponse Route(std::string_view method, std::string_view path,
                    const std::map<std::string, std::string>& query);
  ApiResponse Cached(const std::string& key, ResultCache::Producer produce, bool async);
  ApiResponse Job(const std::string& token);

  std::chrono::milliseconds async_threshold_;
  std::shared_ptr<const Scenario> scenario_;
  std::atomic<bool> ready_{false};
  ResultCache cache_;
  std::mutex jobs_mu_;
  std::map<std::string, std::string> jobs_;  // token -> cache key
};

ApiResponse ErrorResponse(int status, std::string_view code, std::string_view message,
                          std::string_view detail = {});

// Thin cpp-httplib front end over ApiHandler.
class HttpServer {
 public:
  explicit HttpServer(ApiHandler& handler);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and serves on a background thread; port 0 picks a free port.
  // Returns the bound port. Throws kConfig when binding fails.
  int Start(const std::string& address, int port);
  void Stop();
  // Blocks until Stop() is called or the server fails.
  void Wait();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace flowx

#endif  // FLOWX_SERVICE_H_
