#ifndef FLOWX_PREDICT_H_
#define FLOWX_PREDICT_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "flowx/flow_tensor.h"
#include "flowx/partition.h"

namespace flowx {

// Number of observed frames a prediction consumes.
inline constexpr int kWindowLength = 5;

// One time slice of real-valued flows, row-major over the grid.
struct FlowFrame {
  int rows = 0;
  int cols = 0;
  std::vector<double> inflow;
  std::vector<double> outflow;

  FlowFrame() = default;
  FlowFrame(int rows, int cols)
      : rows(rows), cols(cols), inflow(static_cast<size_t>(rows) * cols, 0.0),
        outflow(static_cast<size_t>(rows) * cols, 0.0) {}

  size_t size() const { return inflow.size(); }
  bool SameShape(const FlowFrame& o) const { return rows == o.rows && cols == o.cols; }
  bool operator==(const FlowFrame&) const = default;
};

std::vector<FlowFrame> FramesFromTensor(const FlowTensor& tensor);

enum class PredictorKind { kPersistence = 0, kHistoricalAverage = 1, kRidge = 2 };

std::string_view PredictorKindName(PredictorKind kind);
std::optional<PredictorKind> ParsePredictorKind(std::string_view name);

struct PredictorSpec {
  PredictorKind kind = PredictorKind::kPersistence;
  double lambda = 1.0;            // ridge regularization
  int period_intervals = 1008;    // historical average period (one week of 10-min slots)
  void Validate() const;          // throws kConfig
};

// Observed frames visible to a predictor: indices [0, last_observed].
class FrameHistory {
 public:
  FrameHistory(std::span<const FlowFrame> frames, int64_t last_observed)
      : frames_(frames), last_observed_(last_observed) {}
  const FlowFrame* At(int64_t index) const {
    if (index < 0 || index > last_observed_ || index >= static_cast<int64_t>(frames_.size())) {
      return nullptr;
    }
    return &frames_[static_cast<size_t>(index)];
  }
  int64_t last_observed() const { return last_observed_; }

 private:
  std::span<const FlowFrame> frames_;
  int64_t last_observed_;
};

// Next-frame predictor. Implementations are immutable after construction and
// safe to call concurrently.
class Predictor {
 public:
  Predictor(int rows, int cols) : rows_(rows), cols_(cols) {}
  virtual ~Predictor() = default;

  virtual PredictorKind kind() const = 0;
  int rows() const { return rows_; }
  int cols() const { return cols_; }

  // Unclamped prediction of frame `target` from the kWindowLength frames that
  // precede it (oldest first). When `needed` is given, only cells with a
  // non-zero mask entry are guaranteed to be filled in.
  virtual FlowFrame PredictRaw(std::span<const FlowFrame> window, const FrameHistory& history,
                               int64_t target, const std::vector<char>* needed = nullptr) const = 0;

  // Flat cells whose window values the prediction for `cell` reads, ascending.
  virtual std::vector<int> InputLocality(int cell) const = 0;

 private:
  int rows_;
  int cols_;
};

class PersistencePredictor final : public Predictor {
 public:
  using Predictor::Predictor;
  PredictorKind kind() const override { return PredictorKind::kPersistence; }
  FlowFrame PredictRaw(std::span<const FlowFrame> window, const FrameHistory& history,
                       int64_t target, const std::vector<char>* needed) const override;
  std::vector<int> InputLocality(int cell) const override { return {cell}; }
};

// Mean of the frames one, two, ... periods before the target that are
// observed; the last window frame when there are none.
class HistoricalAveragePredictor final : public Predictor {
 public:
  HistoricalAveragePredictor(int rows, int cols, int period_intervals);
  PredictorKind kind() const override { return PredictorKind::kHistoricalAverage; }
  int period_intervals() const { return period_; }
  FlowFrame PredictRaw(std::span<const FlowFrame> window, const FrameHistory& history,
                       int64_t target, const std::vector<char>* needed) const override;
  std::vector<int> InputLocality(int cell) const override { return {cell}; }

 private:
  int period_;
};

// Linear map from a flattened window restricted to `input_cells` onto the
// next frame at `output_cells`. Feature order: window frame (oldest first),
// then channel (inflow, outflow), then input cell. Output order: channel,
// then output cell.
struct LocalLinearMap {
  std::vector<int> input_cells;
  std::vector<int> output_cells;
  Eigen::MatrixXd weights;  // (2 * outputs) x (kWindowLength * 2 * inputs)

  Eigen::Index feature_count() const {
    return static_cast<Eigen::Index>(kWindowLength * 2 * input_cells.size());
  }
  Eigen::Index output_count() const { return static_cast<Eigen::Index>(2 * output_cells.size()); }
};

// One map per cluster: outputs are the cluster's cells, inputs the cells of
// the cluster and of its adjacent clusters.
std::vector<LocalLinearMap> ClusterLocalMaps(const ClusterPartition& partition);

struct TrainingSample {
  std::vector<FlowFrame> window;  // kWindowLength frames, oldest first
  FlowFrame target;
};

// Solves min ||X W^T - Y||^2 + lambda ||W||^2 and returns W. lambda == 0
// gives the minimum-norm least-squares solution.
Eigen::MatrixXd SolveRidge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda);

class RidgePredictor final : public Predictor {
 public:
  // `maps` must cover every cell exactly once as an output. Maps with empty
  // weights leave the predictor untrained.
  RidgePredictor(int rows, int cols, double lambda, std::vector<LocalLinearMap> maps);

  static RidgePredictor Fit(int rows, int cols, double lambda, std::vector<LocalLinearMap> maps,
                            std::span<const TrainingSample> samples);

  PredictorKind kind() const override { return PredictorKind::kRidge; }
  double lambda() const { return lambda_; }
  bool trained() const;
  const std::vector<LocalLinearMap>& maps() const { return maps_; }

  FlowFrame PredictRaw(std::span<const FlowFrame> window, const FrameHistory& history,
                       int64_t target, const std::vector<char>* needed) const override;
  std::vector<int> InputLocality(int cell) const override;

 private:
  double lambda_;
  std::vector<LocalLinearMap> maps_;
  std::vector<int> map_of_cell_;
};

// Half-open interval index range used for training.
struct IntervalRange {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
};

// `partition` is required for ridge. Throws kConfig when the range is too
// short (ridge needs kWindowLength + 1 intervals).
std::shared_ptr<const Predictor> Train(const PredictorSpec& spec, std::span<const FlowFrame> frames,
                                       IntervalRange range, const ClusterPartition* partition);

// Flat binary layout: "TPRM", u32 version, u32 kind, u32 rows, u32 cols,
// f64 lambda, u32 period, u32 map count, then per map u32 inputs, u32 outputs,
// u32 input cells, u32 output cells and f64 weights row-major; little-endian.
void SavePredictor(const Predictor& predictor, const std::filesystem::path& path);
std::shared_ptr<const Predictor> LoadPredictor(const std::filesystem::path& path);

struct Prediction {
  FlowFrame frame;
  int clamped = 0;  // negative raw outputs set to zero
};

// Validates the window and clamps the raw prediction at zero.
Prediction PredictNext(const Predictor& predictor, std::span<const FlowFrame> window,
                       const FrameHistory& history, int64_t target);

struct Forecast {
  int base_interval = 0;
  std::vector<FlowFrame> frames;  // horizons 1..H
  int clamp_count = 0;
};

// Closed-loop rollout: horizon h reads the last kWindowLength frames, using
// earlier predictions in place of frames after base_interval.
Forecast RollingForecast(const Predictor& predictor, std::span<const FlowFrame> frames,
                         int base_interval, int horizons);

// Rollout from an explicit window ending at `base_interval`. With
// `target_cells`, only the cells needed to get those cells right at the final
// horizon are computed; the other cells of the returned frames are
// unspecified.
Forecast RollForward(const Predictor& predictor, std::vector<FlowFrame> window,
                     const FrameHistory& history, int base_interval, int horizons,
                     const std::vector<char>* target_cells = nullptr);

}  // namespace flowx

#endif  // FLOWX_PREDICT_H_
