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

#include "essayscore/cv.hpp"

#include <thread>

#include "essayscore/csv.hpp"
#include "essayscore/error.hpp"
#include "essayscore/numfmt.hpp"

namespace essayscore {

namespace {

std::vector<EssayRecord> gather(std::span<const EssayRecord> records, const std::vector<std::size_t>& idx) {
  std::vector<EssayRecord> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(records[i]);
  return out;
}

void check_plan(std::span<const EssayRecord> records, const FoldPlan& plan) {
  if (plan.fold_of.size() != records.size()) {
    throw InputError("fold plan covers " + std::to_string(plan.fold_of.size()) + " records, data has " +
                     std::to_string(records.size()));
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].scores) throw InputError("record '" + records[i].text_id + "' is unlabeled");
    if (plan.fold_of[i] >= plan.k) throw InputError("fold plan assigns a fold index >= k");
  }
}

void finish(CvResult& result, std::span<const EssayRecord> records) {
  std::vector<Scores> truth;
  truth.reserve(records.size());
  for (const auto& r : records) truth.push_back(*r.scores);
  result.pooled = mcrmse(ScoreMatrix::from_scores(truth), ScoreMatrix::from_scores(result.oof));
  double total = 0.0;
  for (const auto& f : result.folds) total += f.metrics.mcrmse;
  result.mean_fold_mcrmse = total / static_cast<double>(result.folds.size());
}

FoldResult run_fold(std::span<const EssayRecord> records, const FoldPlan& plan, std::size_t fold,
                    const ModelSpec& base_spec, const TrainConfig& config, const CvOptions& options,
                    std::vector<Scores>& oof) {
  const auto train_idx = plan.complement(fold);
  const auto valid_idx = plan.members(fold);
  if (valid_idx.empty() || train_idx.empty()) {
    throw InputError("fold " + std::to_string(fold) + " has an empty train or validation side");
  }
  const auto train_records = gather(records, train_idx);
  const auto valid_records = gather(records, valid_idx);

  const Vocabulary vocab = Vocabulary::build(train_records, options.min_count);
  ModelSpec spec = base_spec;
  spec.vocab_size = vocab.size();

  const auto train = make_examples(train_records, vocab, spec.max_seq_len);
  const auto valid = make_examples(valid_records, vocab, spec.max_seq_len);

  TrainConfig fold_config = config;
  fold_config.seed = mix64(config.seed + 0x9E37ull * (fold + 1));
  Model model = Model::init(spec, fold_config.seed);

  FitOptions fit_options;
  fit_options.vocab = &vocab;
  if (!options.checkpoint_dir.empty()) {
    fit_options.checkpoint_path = options.checkpoint_dir / ("fold" + std::to_string(fold) + ".ckpt");
  }
  if (options.on_epoch) {
    fit_options.on_epoch = [&options, fold](const EpochRecord& e) { options.on_epoch(fold, e); };
  }

  FoldResult result;
  result.fold = fold;
  result.vocab_size = vocab.size();
  result.train_report = fit(model, train, valid, fold_config, fit_options);
  const auto preds = predict_all(model, valid, true);
  for (std::size_t i = 0; i < valid_idx.size(); ++i) oof[valid_idx[i]] = preds[i];
  result.metrics = evaluate(model, valid);
  return result;
}

}  // namespace

CvResult run_cv(std::span<const EssayRecord> records, const FoldPlan& plan, const ModelSpec& spec,
                const TrainConfig& config, const CvOptions& options) {
  check_plan(records, plan);
  config.validate();
  CvResult result;
  result.plan = plan;
  result.oof.assign(records.size(), Scores{});
  result.folds.resize(plan.k);

  const std::size_t jobs = std::max<std::size_t>(1, options.jobs);
  if (jobs == 1) {
    for (std::size_t f = 0; f < plan.k; ++f) {
      result.folds[f] = run_fold(records, plan, f, spec, config, options, result.oof);
    }
  } else {
    // Folds write disjoint OOF rows and their own result slot.
    for (std::size_t first = 0; first < plan.k; first += jobs) {
      std::vector<std::thread> workers;
      std::vector<std::exception_ptr> errors(plan.k);
      for (std::size_t f = first; f < std::min(plan.k, first + jobs); ++f) {
        workers.emplace_back([&, f] {
          try {
            result.folds[f] = run_fold(records, plan, f, spec, config, options, result.oof);
          } catch (...) {
            errors[f] = std::current_exception();
          }
        });
      }
      for (auto& w : workers) w.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
  }
  finish(result, records);
  return result;
}

CvResult run_cv(std::span<const EssayRecord> records, const ModelSpec& spec, const TrainConfig& config,
                std::size_t k, std::uint64_t seed, const CvOptions& options) {
  return run_cv(records, stratified_kfold(records, k, seed), spec, config, options);
}

CvResult constant_baseline_cv(std::span<const EssayRecord> records, const FoldPlan& plan) {
  check_plan(records, plan);
  CvResult result;
  result.plan = plan;
  result.oof.assign(records.size(), Scores{});
  for (std::size_t f = 0; f < plan.k; ++f) {
    const auto train_idx = plan.complement(f);
    const auto valid_idx = plan.members(f);
    Scores m{};
    for (auto i : train_idx)
      for (std::size_t j = 0; j < kTargetCount; ++j) m[j] += (*records[i].scores)[j];
    for (auto& v : m) v /= static_cast<double>(train_idx.size());
    std::vector<Scores> truth, pred;
    for (auto i : valid_idx) {
      result.oof[i] = m;
      truth.push_back(*records[i].scores);
      pred.push_back(m);
    }
    FoldResult fr;
    fr.fold = f;
    fr.metrics = mcrmse(ScoreMatrix::from_scores(truth), ScoreMatrix::from_scores(pred));
    result.folds.push_back(std::move(fr));
  }
  finish(result, records);
  return result;
}

void write_cv_metrics(std::ostream& out, const CvResult& result) {
  CsvRow header{"fold", "n_records", "mcrmse"};
  for (auto name : kTargetNames) header.push_back("rmse_" + std::string(name));
  write_csv_row(out, header);
  auto row_for = [](std::string label, const MetricsReport& m) {
    CsvRow row{std::move(label), std::to_string(m.n_records), format_double(m.mcrmse)};
    for (double r : m.per_target_rmse) row.push_back(format_double(r));
    return row;
  };
  for (const auto& f : result.folds) write_csv_row(out, row_for(std::to_string(f.fold), f.metrics));
  write_csv_row(out, row_for("pooled", result.pooled));
  CsvRow mean_row{"mean", std::to_string(result.pooled.n_records), format_double(result.mean_fold_mcrmse)};
  for (std::size_t j = 0; j < kTargetCount; ++j) mean_row.emplace_back();
  write_csv_row(out, mean_row);
}

}  // namespace essayscore
