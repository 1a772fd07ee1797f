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
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "essayscore/corpus.hpp"
#include "essayscore/metrics.hpp"
#include "essayscore/model.hpp"

namespace essayscore {

enum class LossKind { mse, smooth_l1 };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view text);

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  double learning_rate = 2e-4;
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  /// Structural switch. When false no AWP code path runs at all.
  bool awp = true;
  double adv_lr = 1.0;
  double adv_eps = 0.01;
  std::size_t awp_start_epoch = 2;
  std::size_t awp_steps = 1;
  /// Include head weights in the perturbable set (encoder weights always are).
  bool awp_include_heads = true;

  std::uint64_t seed = 42;
  LossKind loss = LossKind::smooth_l1;
  std::optional<double> grad_clip_norm;
  /// Start each output bias at the training mean of its target.
  bool init_output_bias_to_mean = true;
  /// Also compute training-set MCRMSE after every epoch.
  bool eval_train_each_epoch = false;

  void validate() const;
};

/// One labeled, encoded example.
struct Example {
  EncodedText text;
  Scores target{};
};

std::vector<Example> make_examples(std::span<const EssayRecord> records, const Vocabulary& vocab,
                                   std::size_t max_seq_len);

/// Saved copies of perturbed parameter buffers.
class AwpSnapshot {
 public:
  struct Entry {
    Tensor tensor;
    std::vector<double> saved;
  };

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  void save(const Tensor& t);
  /// Writes every saved buffer back; bitwise equal to the pre-perturbation state.
  void restore();

 private:
  std::vector<Entry> entries_;
};

/// Moves each parameter w along its gradient g by
///   delta = adv_lr * g * ||w|| / (||g|| + 1e-12),
/// then rescales delta so that ||w' - w_ref|| <= adv_eps * ||w_ref|| where
/// w_ref is the value stored in `snapshot` (saved here on first touch).
/// Parameters with zero norm or zero gradient are left alone.
void perturb(std::span<const NamedParameter> params, double adv_lr, double adv_eps, AwpSnapshot& snapshot);
AwpSnapshot perturb(std::span<const NamedParameter> params, double adv_lr, double adv_eps);

inline constexpr double kAwpEpsilon = 1e-12;

/// Adam with decoupled weight decay (decay skipped for non-perturbable
/// parameters: norms and biases).
class AdamW {
 public:
  AdamW(double lr, double beta1, double beta2, double eps, double weight_decay);
  void step(std::span<const NamedParameter> params);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_, weight_decay_;
  std::size_t t_ = 0;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments_;
};

struct StepStats {
  std::size_t backward_passes = 0;
  std::size_t snapshots_created = 0;
};

/// Observation points inside train_step, for instrumentation and tests.
struct TrainerHooks {
  /// After each perturbation, before the adversarial forward pass.
  std::function<void(const AwpSnapshot&)> after_perturb;
  /// After the snapshot is restored, before the optimizer step.
  std::function<void()> after_restore;
};

/// Owns the optimizer and AWP bookkeeping for one model.
class Trainer {
 public:
  Trainer(Model& model, TrainConfig config);

  /// Clean forward/backward, optional adversarial forward/backward on
  /// perturbed weights (gradients accumulate), restore, optimizer step.
  /// Returns the clean-pass mean loss. Throws DivergenceError on a
  /// non-finite loss or gradient.
  double train_step(std::span<const Example> batch, std::size_t epoch);

  bool awp_active(std::size_t epoch) const;
  const StepStats& stats() const { return stats_; }
  const TrainConfig& config() const { return config_; }
  std::vector<NamedParameter> perturbable_parameters() const;
  void set_hooks(TrainerHooks hooks) { hooks_ = std::move(hooks); }

  /// Mean per-example training loss; dropout masks derive from `dropout_seed`.
  Tensor batch_loss(std::span<const Example> batch, std::uint64_t dropout_seed) const;

 private:

  Model& model_;
  TrainConfig config_;
  AdamW optimizer_;
  StepStats stats_;
  std::size_t step_index_ = 0;
  TrainerHooks hooks_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> train_mcrmse;
  double valid_mcrmse = 0.0;
  std::vector<double> valid_rmse;
  bool awp_active = false;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_valid_mcrmse = 0.0;
};

/// Numeric columns only; byte-identical across reruns with the same seed.
void write_train_report(std::ostream& out, const TrainReport& report);
/// epoch,seconds
void write_timings(std::ostream& out, const TrainReport& report);

struct FitOptions {
  /// Where to persist the best checkpoint (skipped when empty).
  std::filesystem::path checkpoint_path;
  const Vocabulary* vocab = nullptr;
  std::function<void(const EpochRecord&)> on_epoch;
  TrainerHooks hooks;
};

/// Trains for config.epochs epochs, evaluating validation MCRMSE (on
/// clipped predictions) after each. The model ends holding the weights of
/// the best validation epoch.
TrainReport fit(Model& model, std::span<const Example> train, std::span<const Example> valid,
                const TrainConfig& config, const FitOptions& options = {});

/// Raw predictions, optionally clipped to [1, 5].
std::vector<Scores> predict_all(const Model& model, std::span<const Example> examples, bool clip);
std::vector<Scores> predict_all(const Model& model, std::span<const EncodedText> texts, bool clip);

MetricsReport evaluate(const Model& model, std::span<const Example> examples);

}  // namespace essayscore
