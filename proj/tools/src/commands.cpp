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

#include "essayscore/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>
#include <unordered_map>

#include "essayscore/checkpoint.hpp"
#include "essayscore/corpus.hpp"
#include "essayscore/csv.hpp"
#include "essayscore/cv.hpp"
#include "essayscore/error.hpp"
#include "essayscore/folds.hpp"
#include "essayscore/numfmt.hpp"
#include "essayscore/pooling.hpp"
#include "essayscore/trainer.hpp"
#include "json.hpp"

namespace essayscore::cli {
namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  return out;
}

void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

void write_json(const fs::path& path, const ordered_json& doc) {
  auto out = open_output(path);
  out << doc.dump(2) << '\n';
}

void write_config_echo(const fs::path& path, const RunConfig& config) {
  auto out = open_output(path);
  write_resolved(out, config);
}

ordered_json rmse_object(const MetricsReport& m) {
  ordered_json obj = ordered_json::object();
  for (std::size_t j = 0; j < m.per_target_rmse.size() && j < kTargetCount; ++j) {
    obj[std::string(kTargetNames[j])] = m.per_target_rmse[j];
  }
  return obj;
}

std::vector<EssayRecord> load_labeled(const fs::path& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " is not set");
  auto records = load_csv(path);
  if (records.empty()) throw InputError(path.string() + ": no records");
  for (const auto& r : records) {
    if (!r.scores) {
      throw ValidationError(path.string() + ": record '" + r.text_id + "' has no scores; training data must be labeled");
    }
  }
  return records;
}

std::vector<std::string> ids_of(std::span<const EssayRecord> records) {
  std::vector<std::string> ids;
  ids.reserve(records.size());
  for (const auto& r : records) ids.push_back(r.text_id);
  return ids;
}

void log_epoch(Context& ctx, const std::string& prefix, const EpochRecord& e) {
  ctx.log << prefix << "epoch " << e.epoch << " loss " << format_double(e.train_loss) << " valid_mcrmse "
          << format_double(e.valid_mcrmse) << (e.awp_active ? " awp" : "") << '\n';
}

/// Deterministic held-out split of `n` positions.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_positions(std::size_t n, double fraction,
                                                                              std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix64(seed ^ 0x73706C6974ull));
  std::shuffle(order.begin(), order.end(), rng);
  auto n_valid = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  n_valid = std::clamp<std::size_t>(n_valid, 1, n - 1);
  std::vector<std::size_t> valid(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_valid));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_valid), order.end());
  std::sort(valid.begin(), valid.end());
  std::sort(train.begin(), train.end());
  return {train, valid};
}

std::vector<EssayRecord> gather(std::span<const EssayRecord> records, std::span<const std::size_t> idx) {
  std::vector<EssayRecord> out;
  out.reserve(idx.size());
  for (const auto i : idx) out.push_back(records[i]);
  return out;
}

void write_cv_outputs(const fs::path& dir, const CvResult& result, std::span<const EssayRecord> records) {
  for (const auto& fold : result.folds) {
    auto out = open_output(dir / ("fold" + std::to_string(fold.fold) + "_report.csv"));
    write_train_report(out, fold.train_report);
  }
  {
    auto out = open_output(dir / "cv_metrics.csv");
    write_cv_metrics(out, result);
  }
  const auto ids = ids_of(records);
  write_predictions(dir / "oof_predictions.csv", ids, result.oof);
  auto out = open_output(dir / "timings.csv");
  write_csv_row(out, {"fold", "epoch", "seconds"});
  for (const auto& fold : result.folds) {
    for (const auto& e : fold.train_report.epochs) {
      write_csv_row(out, {std::to_string(fold.fold), std::to_string(e.epoch), format_double(e.seconds)});
    }
  }
}

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation; 0 for fewer than two values.
double stddev_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string variant_name(PoolingMode pooling, bool awp) {
  return std::string(to_string(pooling)) + (awp ? "+awp" : "-awp");
}

std::string variant_dir(PoolingMode pooling, bool awp) {
  return std::string(to_string(pooling)) + (awp ? "_awp_on" : "_awp_off");
}

}  // namespace

fs::path resolve_output_dir(const RunConfig& config, const std::string& verb) {
  if (!config.output_dir.empty()) return config.output_dir;
  const char* root = std::getenv(kOutputRootEnv);
  return fs::path(root && *root ? root : "runs") / verb;
}

void cmd_train(RunConfig config, Context& ctx) {
  config.output_dir = resolve_output_dir(config, "train");
  config.validate();
  const auto all = load_labeled(config.data_train, "data.train");

  std::vector<EssayRecord> train_records;
  std::vector<EssayRecord> valid_records;
  std::vector<std::string> split_of(all.size(), "train");
  if (!config.data_valid.empty()) {
    train_records = all;
    valid_records = load_labeled(config.data_valid, "data.valid");
  } else {
    if (all.size() < 2) throw InputError(config.data_train.string() + ": need at least 2 records to split");
    const auto [train_idx, valid_idx] = split_positions(all.size(), config.valid_fraction, config.train.seed);
    train_records = gather(all, train_idx);
    valid_records = gather(all, valid_idx);
    for (const auto i : valid_idx) split_of[i] = "valid";
  }

  prepare_dir(config.output_dir);
  write_config_echo(config.output_dir / "config.resolved", config);

  const Vocabulary vocab = Vocabulary::build(train_records, config.min_count);
  ModelSpec spec = config.model;
  spec.vocab_size = vocab.size();
  const auto train = make_examples(train_records, vocab, spec.max_seq_len);
  const auto valid = make_examples(valid_records, vocab, spec.max_seq_len);
  Model model = Model::init(spec, config.train.seed);

  ctx.log << "train: " << train.size() << " train / " << valid.size() << " valid records, vocabulary "
          << vocab.size() << '\n';
  FitOptions options;
  options.vocab = &vocab;
  options.checkpoint_path = config.output_dir / "model.ckpt";
  options.on_epoch = [&ctx](const EpochRecord& e) { log_epoch(ctx, "", e); };
  const TrainReport report = fit(model, train, valid, config.train, options);

  const MetricsReport train_metrics = evaluate(model, train);
  const MetricsReport valid_metrics = evaluate(model, valid);
  {
    auto out = open_output(config.output_dir / "train_report.csv");
    write_train_report(out, report);
  }
  {
    auto out = open_output(config.output_dir / "timings.csv");
    write_timings(out, report);
  }
  {
    auto out = open_output(config.output_dir / "split.csv");
    write_csv_row(out, {"text_id", "split"});
    for (std::size_t i = 0; i < all.size(); ++i) write_csv_row(out, {all[i].text_id, split_of[i]});
    if (!config.data_valid.empty()) {
      for (const auto& r : valid_records) write_csv_row(out, {r.text_id, "valid"});
    }
  }

  ordered_json summary;
  summary["format_version"] = kArtifactVersion;
  summary["command"] = "train";
  summary["n_train"] = train.size();
  summary["n_valid"] = valid.size();
  summary["vocab_size"] = vocab.size();
  summary["best_epoch"] = report.best_epoch;
  summary["best_valid_mcrmse"] = report.best_valid_mcrmse;
  summary["train_mcrmse"] = train_metrics.mcrmse;
  summary["train_rmse"] = rmse_object(train_metrics);
  summary["valid_mcrmse"] = valid_metrics.mcrmse;
  summary["valid_rmse"] = rmse_object(valid_metrics);
  write_json(config.output_dir / "summary.json", summary);

  ctx.out << "best epoch " << report.best_epoch << " valid_mcrmse " << format_double(valid_metrics.mcrmse)
          << " train_mcrmse " << format_double(train_metrics.mcrmse) << '\n'
          << "wrote " << config.output_dir.string() << '\n';
}

void cmd_cv(RunConfig config, Context& ctx) {
  config.output_dir = resolve_output_dir(config, "cv");
  config.validate();
  const auto records = load_labeled(config.data_train, "data.train");
  const FoldPlan plan = stratified_kfold(records, config.cv_k, config.cv_seed);

  prepare_dir(config.output_dir);
  write_config_echo(config.output_dir / "config.resolved", config);
  {
    auto out = open_output(config.output_dir / "folds.csv");
    write_fold_plan(out, plan);
  }
  {
    auto out = open_output(config.output_dir / "fold_audit.csv");
    write_fold_audit(out, plan);
  }

  CvOptions options;
  options.min_count = config.min_count;
  options.jobs = config.jobs;
  if (config.cv_save_checkpoints) options.checkpoint_dir = config.output_dir;
  std::mutex log_mutex;
  options.on_epoch = [&](std::size_t fold, const EpochRecord& e) {
    const std::lock_guard lock(log_mutex);
    log_epoch(ctx, "fold " + std::to_string(fold) + " ", e);
  };
  const CvResult result = run_cv(records, plan, config.model, config.train, options);
  write_cv_outputs(config.output_dir, result, records);
  const CvResult baseline = constant_baseline_cv(records, plan);

  ordered_json summary;
  summary["format_version"] = kArtifactVersion;
  summary["command"] = "cv";
  summary["k"] = plan.k;
  summary["n_records"] = records.size();
  summary["cv_score"] = result.pooled.mcrmse;
  summary["cv_rmse"] = rmse_object(result.pooled);
  summary["mean_fold_mcrmse"] = result.mean_fold_mcrmse;
  summary["constant_baseline_cv_score"] = baseline.pooled.mcrmse;
  summary["max_fold_mean_deviation"] = plan.max_mean_deviation();
  write_json(config.output_dir / "summary.json", summary);

  ctx.out << "cv_score " << format_double(result.pooled.mcrmse) << " mean_fold_mcrmse "
          << format_double(result.mean_fold_mcrmse) << " baseline " << format_double(baseline.pooled.mcrmse)
          << '\n'
          << "wrote " << config.output_dir.string() << '\n';
}

void cmd_ablate(RunConfig config, Context& ctx) {
  config.output_dir = resolve_output_dir(config, "ablate");
  config.validate();
  const auto records = load_labeled(config.data_train, "data.train");
  const FoldPlan plan = stratified_kfold(records, config.cv_k, config.cv_seed);

  prepare_dir(config.output_dir);
  write_config_echo(config.output_dir / "config.resolved", config);
  {
    auto out = open_output(config.output_dir / "folds.csv");
    write_fold_plan(out, plan);
  }

  struct Variant {
    PoolingMode pooling;
    bool awp;
    RunConfig config;
  };
  std::vector<Variant> variants;
  for (const auto pooling : config.ablate_pooling) {
    for (const bool awp : config.ablate_awp) {
      RunConfig vc = config;
      vc.model.pooling = pooling;
      vc.train.awp = awp;
      const auto dir = config.output_dir / "variants" / variant_dir(pooling, awp);
      prepare_dir(dir);
      write_config_echo(dir / "config.resolved", vc);
      variants.push_back({pooling, awp, std::move(vc)});
    }
  }
  std::vector<std::uint64_t> seeds;
  for (std::size_t s = 0; s < config.ablate_seeds; ++s) seeds.push_back(config.train.seed + s);

  const std::size_t n_runs = variants.size() * seeds.size();
  std::vector<CvResult> results(n_runs);
  std::vector<double> seconds(n_runs, 0.0);
  std::vector<std::exception_ptr> errors(n_runs);
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  const auto worker = [&] {
    for (std::size_t r = next++; r < n_runs; r = next++) {
      const auto& v = variants[r / seeds.size()];
      TrainConfig tc = v.config.train;
      tc.seed = seeds[r % seeds.size()];
      CvOptions options;
      options.min_count = config.min_count;
      const auto started = std::chrono::steady_clock::now();
      try {
        results[r] = run_cv(records, plan, v.config.model, tc, options);
      } catch (...) {
        errors[r] = std::current_exception();
      }
      seconds[r] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      const std::lock_guard lock(log_mutex);
      ctx.log << "ablate: " << variant_name(v.pooling, v.awp) << " seed " << tc.seed;
      if (errors[r]) {
        ctx.log << " failed\n";
      } else {
        ctx.log << " cv_score " << format_double(results[r].pooled.mcrmse) << '\n';
      }
    }
  };
  const std::size_t jobs = std::min(config.jobs, n_runs);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<double> means(variants.size());
  {
    auto table = open_output(config.output_dir / "ablation.csv");
    CsvRow header{"variant", "pooling", "awp", "cv_mean", "cv_std", "n_seeds"};
    for (const auto s : seeds) header.push_back("cv_seed" + std::to_string(s));
    write_csv_row(table, header);
    auto runs = open_output(config.output_dir / "ablation_runs.csv");
    write_csv_row(runs, {"variant", "seed", "cv_score", "mean_fold_mcrmse"});
    auto timings = open_output(config.output_dir / "timings.csv");
    write_csv_row(timings, {"variant", "seed", "seconds"});
    for (std::size_t v = 0; v < variants.size(); ++v) {
      const auto name = variant_name(variants[v].pooling, variants[v].awp);
      std::vector<double> scores;
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        const auto& res = results[v * seeds.size() + s];
        scores.push_back(res.pooled.mcrmse);
        write_csv_row(runs, {name, std::to_string(seeds[s]), format_double(res.pooled.mcrmse),
                             format_double(res.mean_fold_mcrmse)});
        write_csv_row(timings, {name, std::to_string(seeds[s]), format_double(seconds[v * seeds.size() + s])});
        auto metrics = open_output(config.output_dir / "variants" / variant_dir(variants[v].pooling, variants[v].awp) /
                                   ("seed" + std::to_string(seeds[s]) + "_cv_metrics.csv"));
        write_cv_metrics(metrics, res);
      }
      means[v] = mean_of(scores);
      CsvRow row{name, std::string(to_string(variants[v].pooling)), variants[v].awp ? "on" : "off",
                 format_double(means[v]), format_double(stddev_of(scores)), std::to_string(seeds.size())};
      for (const double x : scores) row.push_back(format_double(x));
      write_csv_row(table, row);
    }
  }

  const auto find = [&](PoolingMode pooling, bool awp) -> std::optional<std::size_t> {
    for (std::size_t v = 0; v < variants.size(); ++v) {
      if (variants[v].pooling == pooling && variants[v].awp == awp) return v;
    }
    return std::nullopt;
  };
  ordered_json orderings = ordered_json::array();
  const auto compare = [&](PoolingMode lp, bool la, PoolingMode rp, bool ra) {
    const auto l = find(lp, la);
    const auto r = find(rp, ra);
    if (!l || !r) return;
    const bool holds = means[*l] <= means[*r];
    orderings.push_back({{"lhs", variant_name(lp, la)},
                         {"rhs", variant_name(rp, ra)},
                         {"lhs_cv_mean", means[*l]},
                         {"rhs_cv_mean", means[*r]},
                         {"holds", holds}});
    ctx.out << (holds ? "holds   " : "differs ") << variant_name(lp, la) << " <= " << variant_name(rp, ra) << "  ("
            << format_double(means[*l]) << " vs " << format_double(means[*r]) << ")\n";
  };
  for (std::size_t v = 0; v < variants.size(); ++v) {
    ctx.out << std::left << std::setw(30) << variant_name(variants[v].pooling, variants[v].awp)
            << format_double(means[v]) << '\n';
  }
  compare(PoolingMode::six_metric_attention, true, PoolingMode::single_attention, true);
  compare(PoolingMode::six_metric_attention, true, PoolingMode::six_metric_attention, false);
  compare(PoolingMode::single_attention, true, PoolingMode::six_metric_attention, false);

  ordered_json summary;
  summary["format_version"] = kArtifactVersion;
  summary["command"] = "ablate";
  summary["k"] = plan.k;
  summary["n_records"] = records.size();
  summary["seeds"] = seeds;
  summary["constant_baseline_cv_score"] = constant_baseline_cv(records, plan).pooled.mcrmse;
  summary["orderings"] = orderings;
  write_json(config.output_dir / "ablation_summary.json", summary);
  ctx.out << "wrote " << config.output_dir.string() << '\n';
}

void cmd_predict(const PredictOptions& options, Context& ctx) {
  if (options.checkpoint.empty()) throw ConfigError("predict: no checkpoint given");
  if (options.input.empty()) throw ConfigError("predict: no input file given");
  const Checkpoint ckpt = load_checkpoint(options.checkpoint);
  const auto records = load_csv(options.input);
  const auto max_len = ckpt.model.spec().max_seq_len;
  std::vector<EncodedText> texts;
  texts.reserve(records.size());
  for (const auto& r : records) texts.push_back(ckpt.vocab.encode(r.full_text, max_len));
  auto preds = predict_all(ckpt.model, texts, true);
  if (options.round) {
    for (auto& p : preds) p = clamp_to_score_lattice(p, true);
  }
  prepare_dir(options.output_dir);
  write_predictions(options.output_dir / "predictions.csv", ids_of(records), preds);

  ordered_json summary;
  summary["format_version"] = kArtifactVersion;
  summary["command"] = "predict";
  summary["checkpoint"] = options.checkpoint.string();
  summary["input"] = options.input.string();
  summary["round"] = options.round;
  summary["n_records"] = records.size();
  write_json(options.output_dir / "summary.json", summary);
  ctx.out << "predicted " << records.size() << " records\n"
          << "wrote " << (options.output_dir / "predictions.csv").string() << '\n';
}

MetricsReport cmd_score(const fs::path& truth, const fs::path& predictions) {
  const auto truth_rows = load_score_table(truth);
  const auto pred_rows = load_score_table(predictions);
  std::unordered_map<std::string, std::size_t> pred_index;
  for (std::size_t i = 0; i < pred_rows.size(); ++i) {
    if (!pred_index.emplace(pred_rows[i].first, i).second) {
      throw ValidationError(predictions.string() + ": duplicate text_id '" + pred_rows[i].first + "'");
    }
  }
  if (pred_rows.size() != truth_rows.size()) {
    throw ValidationError("score: " + truth.string() + " has " + std::to_string(truth_rows.size()) + " rows but " +
                          predictions.string() + " has " + std::to_string(pred_rows.size()));
  }
  std::vector<Scores> t;
  std::vector<Scores> p;
  for (const auto& [id, scores] : truth_rows) {
    const auto it = pred_index.find(id);
    if (it == pred_index.end()) {
      throw ValidationError("score: text_id '" + id + "' missing from " + predictions.string());
    }
    t.push_back(scores);
    p.push_back(pred_rows[it->second].second);
  }
  return mcrmse(ScoreMatrix::from_scores(t), ScoreMatrix::from_scores(p));
}

}  // namespace essayscore::cli
