#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "flowx/error.h"
#include "flowx/service.h"

namespace flowx {
namespace {

int64_t FloorDiv(int64_t a, int64_t b) {
  const int64_t q = a / b;
  return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

void RequireArtifact(const std::filesystem::path& path, std::string_view stage) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::kMissingArtifact,
                fmt::format("missing {}; run `flowx {}` first", path.filename().string(), stage),
                path.string());
  }
}

}  // namespace

GridSpec ResolveGrid(const ServiceConfig& config) {
  if (config.bbox) return GridSpec(*config.bbox, config.grid_rows, config.grid_cols);
  if (config.intersections.empty()) {
    throw Error(ErrorKind::kConfig, "bbox is not set and there is no intersections file to derive it");
  }
  const std::vector<Intersection> nodes = LoadIntersections(config.intersections);
  if (nodes.empty()) throw Error(ErrorKind::kInput, "intersections file has no rows");
  BoundingBox b{nodes.front().lon, nodes.front().lat, nodes.front().lon, nodes.front().lat};
  for (const Intersection& n : nodes) {
    b.lon_min = std::min(b.lon_min, n.lon);
    b.lon_max = std::max(b.lon_max, n.lon);
    b.lat_min = std::min(b.lat_min, n.lat);
    b.lat_max = std::max(b.lat_max, n.lat);
  }
  const double pad_lon = std::max(0.01 * (b.lon_max - b.lon_min), 1e-6);
  const double pad_lat = std::max(0.01 * (b.lat_max - b.lat_min), 1e-6);
  b.lon_min -= pad_lon;
  b.lon_max += pad_lon;
  b.lat_min -= pad_lat;
  b.lat_max += pad_lat;
  return GridSpec(b, config.grid_rows, config.grid_cols);
}

IngestResult Ingest(const ServiceConfig& config, const TrajectoryStore& store) {
  const GridSpec grid = ResolveGrid(config);
  const int64_t step = config.interval_seconds;
  const auto& range = store.time_range();
  int64_t t0 = 0;
  if (config.t0) {
    t0 = *config.t0;
  } else if (range) {
    t0 = FloorDiv(range->t_min, step) * step;
  }
  int n = 1;
  if (config.n_intervals) {
    n = *config.n_intervals;
  } else if (range) {
    n = static_cast<int>(std::max<int64_t>(1, FloorDiv(range->t_max + 1 - t0 + step - 1, step)));
  }
  IngestResult result{grid, FlowTensor(grid, config.interval_seconds, t0, n), {}, {}};
  result.tensor = BuildFlowTensor(store, grid, config.interval_seconds, t0, n, &result.raster);
  return result;
}

ClusterPartition PartitionStage(const ServiceConfig& config, const GridSpec& grid) {
  if (config.intersections.empty()) {
    throw Error(ErrorKind::kConfig, "intersections path is not configured");
  }
  const std::vector<Intersection> nodes = LoadIntersections(config.intersections);
  PartitionOptions options;
  options.k = config.k;
  options.seed = config.seed;
  options.max_iter = config.kmeans_max_iter;
  return BuildPartition(nodes, grid, options);
}

IntervalRange ResolveTrainRange(const ServiceConfig& config, int n_intervals) {
  const IntervalRange r = config.train_range.value_or(IntervalRange{0, n_intervals});
  if (r.begin < 0 || r.end > n_intervals || r.begin >= r.end) {
    throw Error(ErrorKind::kConfig, "train_range lies outside the flow tensor",
                fmt::format("train_range={}:{} n_intervals={}", r.begin, r.end, n_intervals));
  }
  return r;
}

std::shared_ptr<const Predictor> TrainStage(const ServiceConfig& config, const FlowTensor& tensor,
                                            const ClusterPartition& partition) {
  const std::vector<FlowFrame> frames = FramesFromTensor(tensor);
  return Train(config.predictor, frames, ResolveTrainRange(config, tensor.n_intervals()),
               &partition);
}

Scenario::Scenario(ServiceConfig config, GridSpec grid, TrajectoryStore store, FlowTensor tensor,
                   ClusterPartition partition, std::shared_ptr<const Predictor> predictor)
    : config_(std::move(config)),
      config_hash_(config_.Hash()),
      grid_(std::move(grid)),
      store_(std::move(store)),
      tensor_(std::move(tensor)),
      frames_(FramesFromTensor(tensor_)),
      partition_(std::move(partition)),
      predictor_(std::move(predictor)) {
  if (!(tensor_.grid() == grid_)) throw Error(ErrorKind::kConfig, "flow tensor grid mismatch");
  if (partition_.grid_assignment.size() != grid_.cell_count()) {
    throw Error(ErrorKind::kConfig, "partition does not match the configured grid; re-run `flowx partition`");
  }
  if (predictor_ == nullptr || predictor_->rows() != grid_.rows() ||
      predictor_->cols() != grid_.cols()) {
    throw Error(ErrorKind::kConfig, "model does not match the configured grid; re-run `flowx train`");
  }
  if (predictor_->kind() != config_.predictor.kind) {
    throw Error(ErrorKind::kConfig, "model kind differs from the configured predictor; re-run `flowx train`");
  }
  if (config_.masker == "zero") {
    masker_ = std::make_unique<ZeroMasker>(grid_.rows(), grid_.cols());
  } else {
    masker_ = std::make_unique<HistoricalMeanMasker>(
        frames_, ResolveTrainRange(config_, tensor_.n_intervals()), tensor_.t0(),
        tensor_.interval_seconds());
  }
  index_ = TrajectoryIndex::Build(store_, grid_);
}

ExplainModel Scenario::model() const {
  ExplainModel m;
  m.frames = frames_;
  m.partition = &partition_;
  m.predictor = predictor_.get();
  m.masker = masker_.get();
  m.t0 = tensor_.t0();
  m.interval_seconds = tensor_.interval_seconds();
  return m;
}

std::shared_ptr<const Scenario> Scenario::Build(const ServiceConfig& config) {
  if (config.trajectories.empty()) {
    throw Error(ErrorKind::kConfig, "trajectories path is not configured");
  }
  ParseStats parse;
  TrajectoryStore store = LoadTrajectories(config.trajectories, &parse);
  IngestResult ingest = Ingest(config, store);
  spdlog::info("ingested {} trajectories into {} intervals", store.size(),
               ingest.tensor.n_intervals());
  ClusterPartition partition = PartitionStage(config, ingest.grid);
  auto predictor = TrainStage(config, ingest.tensor, partition);
  return std::make_shared<const Scenario>(config, ingest.grid, std::move(store),
                                          std::move(ingest.tensor), std::move(partition),
                                          std::move(predictor));
}

std::shared_ptr<const Scenario> Scenario::FromArtifacts(const ServiceConfig& config,
                                                        const std::filesystem::path& dir) {
  const auto flows = dir / kFlowsArtifact;
  const auto part = dir / kPartitionArtifact;
  const auto model = dir / kModelArtifact;
  RequireArtifact(flows, "ingest");
  RequireArtifact(part, "partition");
  RequireArtifact(model, "train");
  if (config.trajectories.empty()) {
    throw Error(ErrorKind::kConfig, "trajectories path is not configured");
  }
  const GridSpec grid = ResolveGrid(config);
  FlowTensor tensor = FlowTensor::Load(flows, grid);
  ClusterPartition partition = LoadPartition(part);
  auto predictor = LoadPredictor(model);
  TrajectoryStore store = LoadTrajectories(config.trajectories);
  return std::make_shared<const Scenario>(config, grid, std::move(store), std::move(tensor),
                                          std::move(partition), std::move(predictor));
}

}  // namespace flowx
