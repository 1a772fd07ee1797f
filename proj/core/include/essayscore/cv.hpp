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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include "essayscore/corpus.hpp"
#include "essayscore/folds.hpp"
#include "essayscore/metrics.hpp"
#include "essayscore/trainer.hpp"

namespace essayscore {

struct FoldResult {
  std::size_t fold = 0;
  MetricsReport metrics;
  TrainReport train_report;
  std::size_t vocab_size = 0;
};

struct CvResult {
  FoldPlan plan;
  std::vector<FoldResult> folds;
  /// Out-of-fold prediction for every record, by record position (clipped).
  std::vector<Scores> oof;
  /// MCRMSE over the pooled out-of-fold predictions: the CV score.
  MetricsReport pooled;
  /// Plain mean of the per-fold MCRMSEs, reported alongside.
  double mean_fold_mcrmse = 0.0;
};

struct CvOptions {
  std::size_t min_count = 1;
  /// Folds trained concurrently; results are merged in fold order.
  std::size_t jobs = 1;
  /// When set, fold f's best checkpoint is written to <dir>/fold<f>.ckpt.
  std::filesystem::path checkpoint_dir;
  std::function<void(std::size_t fold, const EpochRecord&)> on_epoch;
};

/// For each fold: vocabulary from the other k-1 folds only, train with the
/// held-out fold as validation, keep the best epoch, predict the held-out
/// fold. `spec.vocab_size` is replaced per fold.
CvResult run_cv(std::span<const EssayRecord> records, const FoldPlan& plan, const ModelSpec& spec,
                const TrainConfig& config, const CvOptions& options = {});

/// Builds the plan with stratified_kfold(records, k, seed) first.
CvResult run_cv(std::span<const EssayRecord> records, const ModelSpec& spec, const TrainConfig& config,
                std::size_t k, std::uint64_t seed, const CvOptions& options = {});

/// Predicts each held-out fold with the per-target mean of its training folds.
CvResult constant_baseline_cv(std::span<const EssayRecord> records, const FoldPlan& plan);

/// CSV: fold,n_records,mcrmse,rmse_<target>... plus "pooled" and "mean" rows.
void write_cv_metrics(std::ostream& out, const CvResult& result);

}  // namespace essayscore
