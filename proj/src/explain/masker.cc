#include <algorithm>
#include <string>

#include "flowx/error.h"
#include "flowx/explain.h"

namespace flowx {
namespace {

constexpr int64_t kSecondsPerDay = 86400;

int64_t FloorMod(int64_t a, int64_t m) {
  const int64_t r = a % m;
  return r < 0 ? r + m : r;
}

}  // namespace

HistoricalMeanMasker::HistoricalMeanMasker(std::span<const FlowFrame> frames,
                                           IntervalRange training, int64_t t0,
                                           int interval_seconds)
    : t0_(t0), interval_seconds_(interval_seconds) {
  if (frames.empty()) throw Error(ErrorKind::kConfig, "historical-mean masker needs frames");
  if (interval_seconds <= 0) throw Error(ErrorKind::kConfig, "interval_seconds must be positive");
  if (training.begin < 0 || training.end > static_cast<int>(frames.size()) ||
      training.begin >= training.end) {
    throw Error(ErrorKind::kConfig, "masker training range outside the available intervals");
  }
  slots_per_day_ = static_cast<int>(std::max<int64_t>(1, kSecondsPerDay / interval_seconds));
  const int rows = frames.front().rows;
  const int cols = frames.front().cols;
  std::vector<FlowFrame> slot_sums(slots_per_day_, FlowFrame(rows, cols));
  std::vector<int> counts(slots_per_day_, 0);
  FlowFrame overall(rows, cols);
  for (int i = training.begin; i < training.end; ++i) {
    const int slot = SlotOf(i);
    FlowFrame& acc = slot_sums[slot];
    for (size_t c = 0; c < acc.size(); ++c) {
      acc.inflow[c] += frames[i].inflow[c];
      acc.outflow[c] += frames[i].outflow[c];
      overall.inflow[c] += frames[i].inflow[c];
      overall.outflow[c] += frames[i].outflow[c];
    }
    ++counts[slot];
  }
  const double n = training.size();
  for (size_t c = 0; c < overall.size(); ++c) {
    overall.inflow[c] /= n;
    overall.outflow[c] /= n;
  }
  // Mean of `sum` over `count` frames after removing `self` (if any).
  auto mean = [&](const FlowFrame& sum, int count, const FlowFrame* self) {
    const int k = count - (self != nullptr ? 1 : 0);
    if (k == 0) return overall;
    FlowFrame m(rows, cols);
    for (size_t c = 0; c < m.size(); ++c) {
      m.inflow[c] = (sum.inflow[c] - (self ? self->inflow[c] : 0.0)) / k;
      m.outflow[c] = (sum.outflow[c] - (self ? self->outflow[c] : 0.0)) / k;
    }
    return m;
  };
  slot_means_.reserve(slots_per_day_);
  for (int s = 0; s < slots_per_day_; ++s) {
    slot_means_.push_back(mean(slot_sums[s], counts[s], nullptr));
  }
  per_interval_.reserve(frames.size());
  for (int i = 0; i < static_cast<int>(frames.size()); ++i) {
    const int slot = SlotOf(i);
    const bool trained = i >= training.begin && i < training.end;
    per_interval_.push_back(mean(slot_sums[slot], counts[slot], trained ? &frames[i] : nullptr));
  }
}

int HistoricalMeanMasker::SlotOf(int64_t interval) const {
  const int64_t start = t0_ + interval * interval_seconds_;
  return static_cast<int>(FloorMod(start, kSecondsPerDay) / interval_seconds_) % slots_per_day_;
}

const FlowFrame& HistoricalMeanMasker::Baseline(int64_t interval) const {
  if (interval >= 0 && interval < static_cast<int64_t>(per_interval_.size())) {
    return per_interval_[static_cast<size_t>(interval)];
  }
  return slot_means_[SlotOf(interval)];
}

}  // namespace flowx
