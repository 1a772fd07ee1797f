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

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "essayscore/targets.hpp"

namespace essayscore {

/// Row-major n x m table of scores: one row per record, one column per target.
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  ScoreMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  ScoreMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static ScoreMatrix from_scores(std::span<const Scores> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  std::span<const double> values() const { return values_; }

  bool operator==(const ScoreMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

struct MetricsReport {
  double mcrmse = 0.0;
  /// RMSE per column, column order of the input (target order for 6 columns).
  std::vector<double> per_target_rmse;
  std::size_t n_records = 0;
  std::size_t n_targets = 0;
};

/// Mean columnwise RMSE: RMSE_j = sqrt(mean_i (y_ij - yhat_ij)^2),
/// mcrmse = mean_j RMSE_j. Throws InputError on shape mismatch, zero rows
/// or non-finite entries.
MetricsReport mcrmse(const ScoreMatrix& truth, const ScoreMatrix& pred);

}  // namespace essayscore
