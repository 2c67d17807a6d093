#include <cstring>
#include <fstream>

#include "flowx/error.h"
#include "flowx/predict.h"

namespace flowx {
namespace {

constexpr char kMagic[4] = {'T', 'P', 'R', 'M'};
constexpr uint32_t kVersion = 1;

void PutU32(std::ostream& out, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void PutF64(std::ostream& out, double d) {
  uint64_t v;
  std::memcpy(&v, &d, sizeof v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

uint64_t GetBytes(std::istream& in, int n) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), n)) {
    throw Error(ErrorKind::kFormat, "truncated predictor model file");
  }
  uint64_t v = 0;
  for (int i = n - 1; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

uint32_t GetU32(std::istream& in) { return static_cast<uint32_t>(GetBytes(in, 4)); }

double GetF64(std::istream& in) {
  const uint64_t v = GetBytes(in, 8);
  double d;
  std::memcpy(&d, &v, sizeof d);
  return d;
}

}  // namespace

FlowFrame PersistencePredictor::PredictRaw(std::span<const FlowFrame> window,
                                           const FrameHistory&, int64_t,
                                           const std::vector<char>*) const {
  return window.back();
}

HistoricalAveragePredictor::HistoricalAveragePredictor(int rows, int cols, int period_intervals)
    : Predictor(rows, cols), period_(period_intervals) {
  if (period_ < 1) throw Error(ErrorKind::kConfig, "historical average period must be >= 1");
}

FlowFrame HistoricalAveragePredictor::PredictRaw(std::span<const FlowFrame> window,
                                                 const FrameHistory& history, int64_t target,
                                                 const std::vector<char>*) const {
  FlowFrame sum(rows(), cols());
  int count = 0;
  for (int64_t idx = target - period_; idx >= 0; idx -= period_) {
    const FlowFrame* f = history.At(idx);
    if (f == nullptr) continue;
    for (size_t c = 0; c < sum.size(); ++c) {
      sum.inflow[c] += f->inflow[c];
      sum.outflow[c] += f->outflow[c];
    }
    ++count;
  }
  if (count == 0) return window.back();
  for (size_t c = 0; c < sum.size(); ++c) {
    sum.inflow[c] /= count;
    sum.outflow[c] /= count;
  }
  return sum;
}

std::shared_ptr<const Predictor> Train(const PredictorSpec& spec, std::span<const FlowFrame> frames,
                                       IntervalRange range, const ClusterPartition* partition) {
  spec.Validate();
  if (frames.empty()) throw Error(ErrorKind::kConfig, "no frames to train on");
  if (range.begin < 0 || range.end > static_cast<int>(frames.size()) || range.begin >= range.end) {
    throw Error(ErrorKind::kConfig, "training range outside the available intervals");
  }
  const int rows = frames.front().rows;
  const int cols = frames.front().cols;
  switch (spec.kind) {
    case PredictorKind::kPersistence:
      return std::make_shared<PersistencePredictor>(rows, cols);
    case PredictorKind::kHistoricalAverage:
      return std::make_shared<HistoricalAveragePredictor>(rows, cols, spec.period_intervals);
    case PredictorKind::kRidge: {
      if (range.size() < kWindowLength + 1) {
        throw Error(ErrorKind::kConfig,
                    "ridge training needs at least " + std::to_string(kWindowLength + 1) +
                        " intervals",
                    "got " + std::to_string(range.size()));
      }
      if (partition == nullptr) {
        throw Error(ErrorKind::kConfig, "ridge training needs a cluster partition");
      }
      std::vector<TrainingSample> samples;
      samples.reserve(range.size() - kWindowLength);
      for (int t = range.begin + kWindowLength; t < range.end; ++t) {
        TrainingSample s;
        s.window.assign(frames.begin() + (t - kWindowLength), frames.begin() + t);
        s.target = frames[t];
        samples.push_back(std::move(s));
      }
      return std::make_shared<RidgePredictor>(
          RidgePredictor::Fit(rows, cols, spec.lambda, ClusterLocalMaps(*partition), samples));
    }
  }
  throw Error(ErrorKind::kConfig, "unknown predictor kind");
}

Prediction PredictNext(const Predictor& predictor, std::span<const FlowFrame> window,
                       const FrameHistory& history, int64_t target) {
  if (window.size() != static_cast<size_t>(kWindowLength)) {
    throw Error(ErrorKind::kInput, "prediction window must hold exactly " +
                                       std::to_string(kWindowLength) + " frames");
  }
  for (const FlowFrame& f : window) {
    if (f.rows != predictor.rows() || f.cols != predictor.cols() ||
        f.inflow.size() != f.size() || f.outflow.size() != f.size()) {
      throw Error(ErrorKind::kInput, "window frame shape does not match the predictor grid");
    }
  }
  Prediction p{predictor.PredictRaw(window, history, target), 0};
  for (size_t c = 0; c < p.frame.size(); ++c) {
    if (p.frame.inflow[c] < 0.0) {
      p.frame.inflow[c] = 0.0;
      ++p.clamped;
    }
    if (p.frame.outflow[c] < 0.0) {
      p.frame.outflow[c] = 0.0;
      ++p.clamped;
    }
  }
  return p;
}

void SavePredictor(const Predictor& predictor, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kInput, "cannot write predictor model", path.string());
  out.write(kMagic, 4);
  PutU32(out, kVersion);
  PutU32(out, static_cast<uint32_t>(predictor.kind()));
  PutU32(out, static_cast<uint32_t>(predictor.rows()));
  PutU32(out, static_cast<uint32_t>(predictor.cols()));
  double lambda = 0.0;
  uint32_t period = 0;
  const std::vector<LocalLinearMap>* maps = nullptr;
  if (auto* ha = dynamic_cast<const HistoricalAveragePredictor*>(&predictor)) {
    period = static_cast<uint32_t>(ha->period_intervals());
  }
  if (auto* ridge = dynamic_cast<const RidgePredictor*>(&predictor)) {
    lambda = ridge->lambda();
    maps = &ridge->maps();
  }
  PutF64(out, lambda);
  PutU32(out, period);
  PutU32(out, maps ? static_cast<uint32_t>(maps->size()) : 0u);
  if (maps) {
    for (const LocalLinearMap& m : *maps) {
      PutU32(out, static_cast<uint32_t>(m.input_cells.size()));
      PutU32(out, static_cast<uint32_t>(m.output_cells.size()));
      for (int c : m.input_cells) PutU32(out, static_cast<uint32_t>(c));
      for (int c : m.output_cells) PutU32(out, static_cast<uint32_t>(c));
      for (Eigen::Index r = 0; r < m.weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.weights.cols(); ++c) PutF64(out, m.weights(r, c));
      }
    }
  }
}

std::shared_ptr<const Predictor> LoadPredictor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kMissingArtifact, "predictor model not found", path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorKind::kFormat, "not a predictor model file (bad magic)");
  }
  if (GetU32(in) != kVersion) throw Error(ErrorKind::kFormat, "unsupported model version");
  const uint32_t kind = GetU32(in);
  const int rows = static_cast<int>(GetU32(in));
  const int cols = static_cast<int>(GetU32(in));
  const double lambda = GetF64(in);
  const uint32_t period = GetU32(in);
  const uint32_t n_maps = GetU32(in);
  switch (static_cast<PredictorKind>(kind)) {
    case PredictorKind::kPersistence:
      return std::make_shared<PersistencePredictor>(rows, cols);
    case PredictorKind::kHistoricalAverage:
      return std::make_shared<HistoricalAveragePredictor>(rows, cols, static_cast<int>(period));
    case PredictorKind::kRidge: {
      std::vector<LocalLinearMap> maps(n_maps);
      for (LocalLinearMap& m : maps) {
        const uint32_t n_in = GetU32(in);
        const uint32_t n_out = GetU32(in);
        m.input_cells.resize(n_in);
        m.output_cells.resize(n_out);
        for (int& c : m.input_cells) c = static_cast<int>(GetU32(in));
        for (int& c : m.output_cells) c = static_cast<int>(GetU32(in));
        m.weights.resize(m.output_count(), m.feature_count());
        for (Eigen::Index r = 0; r < m.weights.rows(); ++r) {
          for (Eigen::Index c = 0; c < m.weights.cols(); ++c) m.weights(r, c) = GetF64(in);
        }
      }
      return std::make_shared<RidgePredictor>(rows, cols, lambda, std::move(maps));
    }
  }
  throw Error(ErrorKind::kFormat, "unknown predictor kind in model file");
}

}  // namespace flowx
