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

// Run configuration for the essayscore tool.
//
// File grammar, one setting per line:
//
//   # comment
//   key = value
//
// Keys are dotted and mirror the configuration structs (model.d_model,
// train.adv_lr, data.train, ...). Surrounding whitespace is trimmed, an
// empty value resets a path to unset, and unknown or repeated keys are
// errors. Precedence, lowest first: built-in defaults, the --config file,
// --set key=value overrides in order, then dedicated flags (--out, --seed,
// --jobs, ...).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "essayscore/encoder.hpp"
#include "essayscore/trainer.hpp"

namespace essayscore::cli {

/// Name of the environment variable holding the default output root.
inline constexpr const char* kOutputRootEnv = "ESSAYSCORE_OUTPUT_ROOT";

struct RunConfig {
  ModelSpec model;
  TrainConfig train;

  std::filesystem::path data_train;
  std::filesystem::path data_valid;
  /// Held-out share of data.train when data.valid is unset.
  double valid_fraction = 0.2;
  std::size_t min_count = 1;

  std::size_t cv_k = 5;
  std::uint64_t cv_seed = 42;
  bool cv_save_checkpoints = false;

  std::size_t ablate_seeds = 5;
  std::vector<PoolingMode> ablate_pooling{PoolingMode::single_attention, PoolingMode::six_metric_attention,
                                          PoolingMode::mean};
  std::vector<bool> ablate_awp{true, false};

  std::filesystem::path output_dir;
  std::size_t jobs = 1;

  /// Throws ConfigError for unknown keys or malformed values.
  void set(std::string_view key, std::string_view value);
  /// Every key with its canonical text value, sorted by key.
  std::map<std::string, std::string> resolved() const;
  /// Cross-field checks plus ModelSpec/TrainConfig validation.
  void validate() const;
};

std::vector<std::string> config_keys();

/// Applies every line of a config file on top of `config`.
void apply_config(std::istream& in, RunConfig& config, std::string_view source = "<config>");
void apply_config_file(const std::filesystem::path& path, RunConfig& config);
/// Parses "key=value" and applies it.
void apply_override(std::string_view assignment, RunConfig& config);

/// Sorted "key = value" lines; feeding the output back through
/// apply_config reproduces the same config.
void write_resolved(std::ostream& out, const RunConfig& config);

}  // namespace essayscore::cli
