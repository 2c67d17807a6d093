#include <cmath>
#include <string>

#include "flowx/error.h"
#include "flowx/predict.h"

namespace flowx {

std::vector<FlowFrame> FramesFromTensor(const FlowTensor& tensor) {
  std::vector<FlowFrame> frames;
  frames.reserve(tensor.n_intervals());
  const size_t cells = tensor.grid().cell_count();
  for (int i = 0; i < tensor.n_intervals(); ++i) {
    FlowFrame f(tensor.rows(), tensor.cols());
    const size_t offset = static_cast<size_t>(i) * cells;
    for (size_t c = 0; c < cells; ++c) {
      f.inflow[c] = tensor.inflow_data()[offset + c];
      f.outflow[c] = tensor.outflow_data()[offset + c];
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

std::string_view PredictorKindName(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::kPersistence: return "persistence";
    case PredictorKind::kHistoricalAverage: return "historical_average";
    case PredictorKind::kRidge: return "ridge";
  }
  return "unknown";
}

std::optional<PredictorKind> ParsePredictorKind(std::string_view name) {
  if (name == "persistence") return PredictorKind::kPersistence;
  if (name == "historical_average") return PredictorKind::kHistoricalAverage;
  if (name == "ridge") return PredictorKind::kRidge;
  return std::nullopt;
}

void PredictorSpec::Validate() const {
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw Error(ErrorKind::kConfig, "ridge lambda must be finite and >= 0",
                "lambda=" + std::to_string(lambda));
  }
  if (period_intervals < 1) {
    throw Error(ErrorKind::kConfig, "historical average period must be >= 1 interval");
  }
}

}  // namespace flowx
