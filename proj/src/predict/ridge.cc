#include <algorithm>

#include "flowx/error.h"
#include "flowx/parallel.h"
#include "flowx/predict.h"

namespace flowx {
namespace {

void Gather(const LocalLinearMap& m, std::span<const FlowFrame> window, double* x) {
  const size_t n_in = m.input_cells.size();
  for (int f = 0; f < kWindowLength; ++f) {
    const FlowFrame& frame = window[f];
    double* in = x + static_cast<size_t>(f) * 2 * n_in;
    double* out = in + n_in;
    for (size_t j = 0; j < n_in; ++j) {
      in[j] = frame.inflow[m.input_cells[j]];
      out[j] = frame.outflow[m.input_cells[j]];
    }
  }
}

}  // namespace

std::vector<LocalLinearMap> ClusterLocalMaps(const ClusterPartition& partition) {
  std::vector<LocalLinearMap> maps;
  for (int c = 0; c < partition.k; ++c) {
    LocalLinearMap m;
    m.output_cells = partition.CellsOfCluster(c);
    if (m.output_cells.empty()) continue;
    m.input_cells = m.output_cells;
    for (int nb : partition.adjacency[c]) {
      const std::vector<int> cells = partition.CellsOfCluster(nb);
      m.input_cells.insert(m.input_cells.end(), cells.begin(), cells.end());
    }
    std::sort(m.input_cells.begin(), m.input_cells.end());
    maps.push_back(std::move(m));
  }
  return maps;
}

Eigen::MatrixXd SolveRidge(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda) {
  if (x.rows() != y.rows()) throw Error(ErrorKind::kInput, "design and target row counts differ");
  Eigen::MatrixXd wt;
  if (lambda == 0.0) {
    wt = x.completeOrthogonalDecomposition().solve(y);
  } else if (x.rows() >= x.cols()) {
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += lambda;
    wt = gram.ldlt().solve(x.transpose() * y);
  } else {
    // Dual form: fewer samples than features.
    Eigen::MatrixXd kernel = x * x.transpose();
    kernel.diagonal().array() += lambda;
    wt = x.transpose() * kernel.ldlt().solve(y);
  }
  return wt.transpose();
}

RidgePredictor::RidgePredictor(int rows, int cols, double lambda, std::vector<LocalLinearMap> maps)
    : Predictor(rows, cols), lambda_(lambda), maps_(std::move(maps)) {
  const size_t cells = static_cast<size_t>(rows) * cols;
  map_of_cell_.assign(cells, -1);
  for (size_t i = 0; i < maps_.size(); ++i) {
    for (int c : maps_[i].output_cells) {
      if (c < 0 || static_cast<size_t>(c) >= cells || map_of_cell_[c] != -1) {
        throw Error(ErrorKind::kInput, "ridge maps must cover each cell exactly once");
      }
      map_of_cell_[c] = static_cast<int>(i);
    }
    for (int c : maps_[i].input_cells) {
      if (c < 0 || static_cast<size_t>(c) >= cells) {
        throw Error(ErrorKind::kInput, "ridge map input cell out of range");
      }
    }
    const LocalLinearMap& m = maps_[i];
    if (m.weights.size() != 0 &&
        (m.weights.rows() != m.output_count() || m.weights.cols() != m.feature_count())) {
      throw Error(ErrorKind::kInput, "ridge map weight shape mismatch");
    }
  }
  if (std::find(map_of_cell_.begin(), map_of_cell_.end(), -1) != map_of_cell_.end()) {
    throw Error(ErrorKind::kInput, "ridge maps must cover each cell exactly once");
  }
}

RidgePredictor RidgePredictor::Fit(int rows, int cols, double lambda,
                                   std::vector<LocalLinearMap> maps,
                                   std::span<const TrainingSample> samples) {
  if (samples.empty()) {
    throw Error(ErrorKind::kConfig, "ridge training needs at least one window");
  }
  if (!(lambda >= 0.0)) throw Error(ErrorKind::kConfig, "ridge lambda must be >= 0");
  ParallelFor(maps.size(), [&](size_t i) {
    LocalLinearMap& m = maps[i];
    const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd x(n, m.feature_count());
    Eigen::MatrixXd y(n, m.output_count());
    std::vector<double> row(static_cast<size_t>(m.feature_count()));
    const size_t n_out = m.output_cells.size();
    for (Eigen::Index s = 0; s < n; ++s) {
      const TrainingSample& sample = samples[s];
      Gather(m, sample.window, row.data());
      for (Eigen::Index f = 0; f < m.feature_count(); ++f) x(s, f) = row[f];
      for (size_t j = 0; j < n_out; ++j) {
        y(s, static_cast<Eigen::Index>(j)) = sample.target.inflow[m.output_cells[j]];
        y(s, static_cast<Eigen::Index>(n_out + j)) = sample.target.outflow[m.output_cells[j]];
      }
    }
    m.weights = SolveRidge(x, y, lambda);
  });
  return RidgePredictor(rows, cols, lambda, std::move(maps));
}

bool RidgePredictor::trained() const {
  return std::all_of(maps_.begin(), maps_.end(),
                     [](const LocalLinearMap& m) { return m.weights.size() != 0; });
}

FlowFrame RidgePredictor::PredictRaw(std::span<const FlowFrame> window, const FrameHistory&,
                                     int64_t, const std::vector<char>* needed) const {
  if (!trained()) throw Error(ErrorKind::kState, "ridge predictor is not trained");
  FlowFrame out(rows(), cols());
  Eigen::VectorXd x;
  for (const LocalLinearMap& m : maps_) {
    if (needed != nullptr &&
        std::none_of(m.output_cells.begin(), m.output_cells.end(),
                     [&](int c) { return (*needed)[c] != 0; })) {
      continue;
    }
    x.resize(m.feature_count());
    Gather(m, window, x.data());
    const Eigen::VectorXd y = m.weights * x;
    const size_t n_out = m.output_cells.size();
    for (size_t j = 0; j < n_out; ++j) {
      out.inflow[m.output_cells[j]] = y(static_cast<Eigen::Index>(j));
      out.outflow[m.output_cells[j]] = y(static_cast<Eigen::Index>(n_out + j));
    }
  }
  return out;
}

std::vector<int> RidgePredictor::InputLocality(int cell) const {
  return maps_[map_of_cell_[cell]].input_cells;
}

}  // namespace flowx
