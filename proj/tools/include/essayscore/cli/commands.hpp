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
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "essayscore/cli/config.hpp"
#include "essayscore/metrics.hpp"

namespace essayscore::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitNumeric = 2;

/// Bumped whenever the layout of an emitted file changes.
inline constexpr int kArtifactVersion = 1;

struct Context {
  std::ostream& out;
  /// Progress lines; pass a null stream to silence.
  std::ostream& log;
};

/// Output directory for `verb`: output.dir if set, otherwise
/// $ESSAYSCORE_OUTPUT_ROOT/<verb> (default root "runs").
std::filesystem::path resolve_output_dir(const RunConfig& config, const std::string& verb);

// Each command writes into config.output_dir (resolved first) and throws
// essayscore::Error subclasses on failure.

/// Files: model.ckpt, train_report.csv, timings.csv, split.csv,
/// config.resolved, summary.json.
void cmd_train(RunConfig config, Context& ctx);

/// Files: folds.csv, fold_audit.csv, fold<f>_report.csv, cv_metrics.csv,
/// oof_predictions.csv, timings.csv, config.resolved, summary.json.
void cmd_cv(RunConfig config, Context& ctx);

/// Grid over ablate.pooling x ablate.awp, ablate.seeds seeds each, every
/// run on the same fold plan. Files: folds.csv, ablation.csv,
/// ablation_runs.csv, ablation_summary.json, timings.csv, config.resolved,
/// variants/<name>/config.resolved, variants/<name>/seed<s>_cv_metrics.csv.
void cmd_ablate(RunConfig config, Context& ctx);

struct PredictOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path input;
  std::filesystem::path output_dir;
  /// Snap to the 0.5 lattice in [1, 5]; otherwise clip to [1, 5].
  bool round = false;
};

/// Files: predictions.csv, summary.json.
void cmd_predict(const PredictOptions& options, Context& ctx);

/// MCRMSE of `predictions` against `truth`, matched by text_id. Both files
/// must hold exactly the same ids.
MetricsReport cmd_score(const std::filesystem::path& truth, const std::filesystem::path& predictions);

/// Full command-line entry point; args excludes the program name. Maps
/// InputError (and usage errors) to 1, numeric failures to 2.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace essayscore::cli
