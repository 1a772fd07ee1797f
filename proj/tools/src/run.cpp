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

#include <fstream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "essayscore/cli/commands.hpp"
#include "essayscore/corpus.hpp"
#include "essayscore/error.hpp"
#include "essayscore/numfmt.hpp"
#include "essayscore/synth.hpp"
#include "json.hpp"

namespace essayscore::cli {
namespace {

/// Flags shared by the training verbs.
struct RunFlags {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string out;
  std::string train;
  std::string valid;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> k;
  std::optional<std::size_t> seeds;
  std::optional<std::size_t> jobs;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool with_cv, bool with_ablate) {
  cmd->add_option("-c,--config", f.config_file, "Key-value config file");
  cmd->add_option("-s,--set", f.overrides, "Override a config key (key=value), repeatable");
  cmd->add_option("-o,--out", f.out, "Output directory (output.dir)");
  cmd->add_option("--train", f.train, "Labeled training CSV (data.train)");
  cmd->add_option("--seed", f.seed, "Training seed (train.seed)");
  cmd->add_option("--epochs", f.epochs, "Epochs (train.epochs)");
  if (with_cv) {
    cmd->add_option("-k,--folds", f.k, "Fold count (cv.k)");
    cmd->add_option("-j,--jobs", f.jobs, "Concurrent folds or runs (jobs)");
  } else {
    cmd->add_option("--valid", f.valid, "Labeled validation CSV (data.valid)");
  }
  if (with_ablate) cmd->add_option("--seeds", f.seeds, "Seeds per variant (ablate.seeds)");
}

RunConfig build_config(const RunFlags& f) {
  RunConfig config;
  if (!f.config_file.empty()) apply_config_file(f.config_file, config);
  for (const auto& o : f.overrides) apply_override(o, config);
  if (!f.out.empty()) config.output_dir = f.out;
  if (!f.train.empty()) config.data_train = f.train;
  if (!f.valid.empty()) config.data_valid = f.valid;
  if (f.seed) config.train.seed = *f.seed;
  if (f.epochs) config.train.epochs = *f.epochs;
  if (f.k) config.cv_k = *f.k;
  if (f.seeds) config.ablate_seeds = *f.seeds;
  if (f.jobs) config.jobs = *f.jobs;
  return config;
}

class NullBuffer : public std::streambuf {
 protected:
  int overflow(int c) override { return c; }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"essayscore: analytic essay scoring with attention-pooling heads", "essayscore"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress lines");
  app.set_version_flag("--version", "essayscore 0.1.0");

  RunFlags train_flags;
  auto* train = app.add_subcommand("train", "Train one model on a train/valid split");
  add_run_flags(train, train_flags, false, false);

  RunFlags cv_flags;
  auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation");
  add_run_flags(cv, cv_flags, true, false);

  RunFlags ablate_flags;
  auto* ablate = app.add_subcommand("ablate", "Pooling x AWP grid over shared folds and seeds");
  add_run_flags(ablate, ablate_flags, true, true);

  PredictOptions predict_opts;
  std::string predict_out;
  auto* predict = app.add_subcommand("predict", "Score essays with a trained checkpoint");
  predict->add_option("--checkpoint", predict_opts.checkpoint, "Checkpoint file")->required();
  predict->add_option("-i,--input", predict_opts.input, "CSV with text_id and full_text")->required();
  predict->add_option("-o,--out", predict_out, "Output directory");
  predict->add_flag("--round", predict_opts.round, "Snap predictions to the 0.5 lattice");

  std::string truth_path;
  std::string pred_path;
  std::string score_out;
  auto* score = app.add_subcommand("score", "MCRMSE between two score CSVs");
  score->add_option("truth", truth_path, "CSV with true scores")->required();
  score->add_option("predictions", pred_path, "CSV with predicted scores")->required();
  score->add_option("-o,--output", score_out, "Also write the metrics as JSON here");

  std::size_t synth_n = 300;
  std::uint64_t synth_seed = 7;
  std::string synth_out;
  bool synth_unlabeled = false;
  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic corpus");
  synth->add_option("-n,--count", synth_n, "Number of essays");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("-o,--output", synth_out, "Output CSV")->required();
  synth->add_flag("--unlabeled", synth_unlabeled, "Omit the score columns");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  NullBuffer null_buffer;
  std::ostream null_stream(&null_buffer);
  Context ctx{out, quiet ? null_stream : err};
  try {
    if (*train) {
      cmd_train(build_config(train_flags), ctx);
    } else if (*cv) {
      cmd_cv(build_config(cv_flags), ctx);
    } else if (*ablate) {
      cmd_ablate(build_config(ablate_flags), ctx);
    } else if (*predict) {
      RunConfig defaults;
      if (!predict_out.empty()) defaults.output_dir = predict_out;
      predict_opts.output_dir = resolve_output_dir(defaults, "predict");
      cmd_predict(predict_opts, ctx);
    } else if (*score) {
      const auto report = cmd_score(truth_path, pred_path);
      out << "mcrmse " << format_double(report.mcrmse) << '\n';
      for (std::size_t j = 0; j < report.per_target_rmse.size(); ++j) {
        out << "rmse_" << kTargetNames[j] << ' ' << format_double(report.per_target_rmse[j]) << '\n';
      }
      if (!score_out.empty()) {
        std::ofstream file(score_out, std::ios::binary);
        if (!file) throw InputError("cannot open '" + score_out + "' for writing");
        nlohmann::ordered_json doc;
        doc["mcrmse"] = report.mcrmse;
        doc["n_records"] = report.n_records;
        for (std::size_t j = 0; j < report.per_target_rmse.size(); ++j) {
          doc["rmse_" + std::string(kTargetNames[j])] = report.per_target_rmse[j];
        }
        file << doc.dump(2) << '\n';
      }
    } else if (*synth) {
      auto records = synth_corpus(synth_n, synth_seed);
      if (synth_unlabeled) {
        for (auto& r : records) r.scores.reset();
      }
      write_csv(synth_out, records);
      out << "wrote " << records.size() << " essays to " << synth_out << '\n';
    }
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const NumericDomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitOk;
}

}  // namespace essayscore::cli
