#include <algorithm>
#include <string>

#include "flowx/error.h"
#include "flowx/predict.h"

namespace flowx {

Forecast RollForward(const Predictor& predictor, std::vector<FlowFrame> window,
                     const FrameHistory& history, int base_interval, int horizons,
                     const std::vector<char>* target_cells) {
  if (horizons < 1) throw Error(ErrorKind::kConfig, "forecast horizon count must be >= 1");
  if (window.size() != static_cast<size_t>(kWindowLength)) {
    throw Error(ErrorKind::kInput, "prediction window must hold exactly " +
                                       std::to_string(kWindowLength) + " frames");
  }

  // needed[h] marks the cells that must be exact at horizon h (1-based).
  std::vector<std::vector<char>> needed;
  if (target_cells != nullptr) {
    const size_t cells = window.front().size();
    needed.assign(horizons + 1, std::vector<char>(cells, 0));
    needed[horizons] = *target_cells;
    for (int h = horizons; h >= 2; --h) {
      std::vector<char> inputs(cells, 0);
      for (size_t c = 0; c < cells; ++c) {
        if (!needed[h][c]) continue;
        for (int in : predictor.InputLocality(static_cast<int>(c))) inputs[in] = 1;
      }
      for (int j = std::max(1, h - kWindowLength); j < h; ++j) {
        for (size_t c = 0; c < cells; ++c) needed[j][c] |= inputs[c];
      }
    }
  }

  Forecast forecast;
  forecast.base_interval = base_interval;
  forecast.frames.reserve(horizons);
  for (int h = 1; h <= horizons; ++h) {
    const std::vector<char>* mask = needed.empty() ? nullptr : &needed[h];
    FlowFrame next = predictor.PredictRaw(window, history, base_interval + h, mask);
    for (size_t c = 0; c < next.size(); ++c) {
      if (next.inflow[c] < 0.0) {
        next.inflow[c] = 0.0;
        ++forecast.clamp_count;
      }
      if (next.outflow[c] < 0.0) {
        next.outflow[c] = 0.0;
        ++forecast.clamp_count;
      }
    }
    std::rotate(window.begin(), window.begin() + 1, window.end());
    window.back() = next;
    forecast.frames.push_back(std::move(next));
  }
  return forecast;
}

Forecast RollingForecast(const Predictor& predictor, std::span<const FlowFrame> frames,
                         int base_interval, int horizons) {
  if (horizons < 1) throw Error(ErrorKind::kConfig, "forecast horizon count must be >= 1");
  if (base_interval < kWindowLength - 1 || base_interval >= static_cast<int>(frames.size())) {
    throw Error(ErrorKind::kInput,
                "base interval needs " + std::to_string(kWindowLength - 1) +
                    " observed predecessors",
                "base=" + std::to_string(base_interval));
  }
  std::vector<FlowFrame> window(frames.begin() + (base_interval - kWindowLength + 1),
                                frames.begin() + base_interval + 1);
  for (const FlowFrame& f : window) {
    if (f.rows != predictor.rows() || f.cols != predictor.cols()) {
      throw Error(ErrorKind::kInput, "frame shape does not match the predictor grid");
    }
  }
  return RollForward(predictor, std::move(window), FrameHistory(frames, base_interval),
                     base_interval, horizons);
}

}  // namespace flowx
