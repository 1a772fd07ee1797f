// Copyright 2026 The essayscore Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "essayscore/metrics.hpp"

#include <cmath>
#include <string>

#include "essayscore/error.hpp"

namespace essayscore {

ScoreMatrix::ScoreMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw DimensionError("ScoreMatrix: " + std::to_string(values_.size()) + " values for " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

ScoreMatrix ScoreMatrix::from_scores(std::span<const Scores> rows) {
  ScoreMatrix m(rows.size(), kTargetCount);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < kTargetCount; ++j) m(i, j) = rows[i][j];
  return m;
}

MetricsReport mcrmse(const ScoreMatrix& truth, const ScoreMatrix& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) {
    throw InputError("mcrmse: truth is " + std::to_string(truth.rows()) + "x" +
                     std::to_string(truth.cols()) + " but predictions are " +
                     std::to_string(pred.rows()) + "x" + std::to_string(pred.cols()));
  }
  if (truth.rows() == 0 || truth.cols() == 0) throw InputError("mcrmse: no records");
  for (std::size_t i = 0; i < truth.values().size(); ++i) {
    if (!std::isfinite(truth.values()[i]) || !std::isfinite(pred.values()[i])) {
      throw InputError("mcrmse: non-finite value at flat index " + std::to_string(i));
    }
  }
  MetricsReport report;
  report.n_records = truth.rows();
  report.n_targets = truth.cols();
  report.per_target_rmse.assign(truth.cols(), 0.0);
  for (std::size_t j = 0; j < truth.cols(); ++j) {
    double sq = 0.0;
    for (std::size_t i = 0; i < truth.rows(); ++i) {
      const double d = truth(i, j) - pred(i, j);
      sq += d * d;
    }
    report.per_target_rmse[j] = std::sqrt(sq / static_cast<double>(truth.rows()));
  }
  double total = 0.0;
  for (double r : report.per_target_rmse) total += r;
  report.mcrmse = total / static_cast<double>(truth.cols());
  return report;
}

}  // namespace essayscore
