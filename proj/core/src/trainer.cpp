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

#include "essayscore/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "essayscore/checkpoint.hpp"
#include "essayscore/csv.hpp"
#include "essayscore/error.hpp"
#include "essayscore/numfmt.hpp"

namespace essayscore {

namespace {

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

std::string_view to_string(LossKind kind) {
  return kind == LossKind::mse ? "mse" : "smooth_l1";
}

LossKind parse_loss_kind(std::string_view text) {
  if (text == "mse") return LossKind::mse;
  if (text == "smooth_l1") return LossKind::smooth_l1;
  throw ConfigError("unknown loss '" + std::string(text) + "' (expected mse or smooth_l1)");
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train.epochs must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(adv_lr >= 0.0)) throw ConfigError("train.adv_lr must be >= 0");
  if (!(adv_eps >= 0.0)) throw ConfigError("train.adv_eps must be >= 0");
  if (awp_start_epoch == 0) throw ConfigError("train.awp_start_epoch must be >= 1 (epochs count from 1)");
  if (awp_steps == 0) throw ConfigError("train.awp_steps must be >= 1");
  if (grad_clip_norm && !(*grad_clip_norm > 0.0)) throw ConfigError("train.grad_clip_norm must be positive");
}

std::vector<Example> make_examples(std::span<const EssayRecord> records, const Vocabulary& vocab,
                                   std::size_t max_seq_len) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.scores) throw InputError("record '" + r.text_id + "' has no labels; cannot train on it");
    out.push_back({vocab.encode(r.full_text, max_seq_len), *r.scores});
  }
  return out;
}

// ---- AWP --------------------------------------------------------------------------

void AwpSnapshot::save(const Tensor& t) {
  entries_.push_back({t, std::vector<double>(t.data().begin(), t.data().end())});
}

void AwpSnapshot::restore() {
  for (auto& e : entries_) {
    auto dst = e.tensor.mutable_data();
    std::copy(e.saved.begin(), e.saved.end(), dst.begin());
  }
}

void perturb(std::span<const NamedParameter> params, double adv_lr, double adv_eps,
             AwpSnapshot& snapshot) {
  for (const auto& p : params) {
    if (!p.perturbable || !p.tensor.has_grad()) continue;
    const auto g = p.tensor.grad();
    const double g_norm = l2_norm(g);
    Tensor w = p.tensor;
    const double w_norm = l2_norm(w.data());
    if (g_norm == 0.0 || w_norm == 0.0 || !std::isfinite(g_norm)) continue;

    const AwpSnapshot::Entry* ref = nullptr;
    for (const auto& e : snapshot.entries()) {
      if (e.tensor.node() == w.node()) ref = &e;
    }
    if (!ref) {
      snapshot.save(w);
      ref = &snapshot.entries().back();
    }
    const std::vector<double>& origin = ref->saved;
    const double radius = adv_eps * l2_norm(origin);

    auto data = w.mutable_data();
    const double step = adv_lr * w_norm / (g_norm + kAwpEpsilon);
    std::vector<double> delta(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) delta[i] = data[i] + step * g[i] - origin[i];
    const double d_norm = l2_norm(delta);
    const double shrink = d_norm > radius ? radius / d_norm : 1.0;
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = origin[i] + delta[i] * shrink;
  }
}

AwpSnapshot perturb(std::span<const NamedParameter> params, double adv_lr, double adv_eps) {
  AwpSnapshot snapshot;
  perturb(params, adv_lr, adv_eps, snapshot);
  return snapshot;
}

// ---- optimizer --------------------------------------------------------------------

AdamW::AdamW(double lr, double beta1, double beta2, double eps, double weight_decay)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

void AdamW::step(std::span<const NamedParameter> params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& p : params) {
    Tensor w = p.tensor;
    if (!w.has_grad()) continue;
    auto& [m, v] = moments_[p.path];
    auto data = w.mutable_data();
    const auto g = w.grad();
    if (m.empty()) {
      m.assign(data.size(), 0.0);
      v.assign(data.size(), 0.0);
    }
    const double decay = p.perturbable ? weight_decay_ : 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      data[i] -= lr_ * (mhat / (std::sqrt(vhat) + eps_) + decay * data[i]);
    }
  }
}

// ---- trainer ------------------------------------------------------------------------

Trainer::Trainer(Model& model, TrainConfig config)
    : model_(model),
      config_(std::move(config)),
      optimizer_(config_.learning_rate, config_.adam_beta1, config_.adam_beta2, config_.adam_eps,
                 config_.weight_decay) {
  config_.validate();
}

bool Trainer::awp_active(std::size_t epoch) const {
  return config_.awp && epoch >= config_.awp_start_epoch && config_.adv_lr * config_.adv_eps > 0.0;
}

std::vector<NamedParameter> Trainer::perturbable_parameters() const {
  std::vector<NamedParameter> out;
  for (auto& p : model_.parameters()) {
    if (!p.perturbable) continue;
    if (!config_.awp_include_heads && p.path.rfind("head.", 0) == 0) continue;
    out.push_back(std::move(p));
  }
  return out;
}

Tensor Trainer::batch_loss(std::span<const Example> batch, std::uint64_t dropout_seed) const {
  DropoutStream stream(dropout_seed, model_.spec().dropout_p);
  DropoutStream* drop = model_.spec().dropout_p > 0.0 ? &stream : nullptr;
  Tensor total;
  for (const auto& ex : batch) {
    Tensor pred = model_.forward(ex.text, drop);
    Tensor target = Tensor::from({1, kTargetCount}, std::vector<double>(ex.target.begin(), ex.target.end()));
    Tensor loss;
    if (config_.loss == LossKind::mse) {
      Tensor diff = pred - target;
      loss = mean(diff * diff);
    } else {
      loss = mean(smooth_l1(pred, target));
    }
    total = total.defined() ? total + loss : loss;
  }
  return scale(total, 1.0 / static_cast<double>(batch.size()));
}

double Trainer::train_step(std::span<const Example> batch, std::size_t epoch) {
  if (batch.empty()) throw ContractError("train_step: empty batch");
  if (epoch == 0) throw ContractError("train_step: epochs count from 1");

  const auto params = model_.parameters();
  for (auto p : params) p.tensor.zero_grad();

  auto diagnose = [&](const char* pass, double loss_value) {
    std::string where = "epoch " + std::to_string(epoch) + ", step " + std::to_string(step_index_) +
                        ", " + pass + " pass";
    if (!std::isfinite(loss_value)) throw DivergenceError("non-finite loss at " + where);
    for (const auto& p : params) {
      if (p.tensor.has_grad() && !all_finite(p.tensor.grad())) {
        throw DivergenceError("non-finite gradient in '" + p.path + "' at " + where);
      }
    }
  };

  // Non-finite activations surface as domain errors inside the forward pass.
  auto forward = [&](const char* pass, std::uint64_t seed) {
    try {
      return batch_loss(batch, seed);
    } catch (const NumericDomainError& e) {
      throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(step_index_) + ", " + pass + " pass");
    }
  };

  const std::uint64_t step_seed = mix64(config_.seed ^ mix64(step_index_ + 1));
  Tensor clean = forward("clean", step_seed);
  const double clean_value = clean.item();
  if (!std::isfinite(clean_value)) diagnose("clean", clean_value);
  backward(clean);
  ++stats_.backward_passes;
  clean = Tensor();
  diagnose("clean", clean_value);

  if (awp_active(epoch)) {
    const auto targets = perturbable_parameters();
    AwpSnapshot snapshot;
    ++stats_.snapshots_created;
    std::vector<std::vector<double>> clean_grads;
    for (std::size_t s = 0; s < config_.awp_steps; ++s) {
      perturb(targets, config_.adv_lr, config_.adv_eps, snapshot);
      if (hooks_.after_perturb) hooks_.after_perturb(snapshot);
      const bool last = s + 1 == config_.awp_steps;
      if (!last && s == 0) {
        for (const auto& p : params) {
          clean_grads.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
        }
      }
      if (!last) {
        for (auto p : params) p.tensor.zero_grad();
      } else if (s > 0) {
        for (std::size_t i = 0; i < params.size(); ++i) {
          Tensor t = params[i].tensor;
          auto g = t.mutable_grad();
          std::copy(clean_grads[i].begin(), clean_grads[i].end(), g.begin());
        }
      }
      Tensor adv;
      try {
        adv = forward("adversarial", mix64(step_seed ^ (0xA5A5ull + s)));
      } catch (const DivergenceError&) {
        snapshot.restore();
        throw;
      }
      const double adv_value = adv.item();
      if (!std::isfinite(adv_value)) {
        snapshot.restore();
        diagnose("adversarial", adv_value);
      }
      backward(adv);
      ++stats_.backward_passes;
    }
    snapshot.restore();
    if (hooks_.after_restore) hooks_.after_restore();
    diagnose("adversarial", clean_value);
  }

  if (config_.grad_clip_norm) {
    double total = 0.0;
    for (const auto& p : params)
      if (p.tensor.has_grad())
        for (double g : p.tensor.grad()) total += g * g;
    total = std::sqrt(total);
    if (total > *config_.grad_clip_norm) {
      const double factor = *config_.grad_clip_norm / total;
      for (auto p : params)
        if (p.tensor.has_grad())
          for (auto& g : p.tensor.mutable_grad()) g *= factor;
    }
  }

  optimizer_.step(params);
  ++step_index_;
  return clean_value;
}

// ---- fit / evaluation ----------------------------------------------------------------

std::vector<Scores> predict_all(const Model& model, std::span<const EncodedText> texts, bool clip) {
  std::vector<Scores> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    Scores s = model.predict(t);
    out.push_back(clip ? clamp_to_score_lattice(s, false) : s);
  }
  return out;
}

std::vector<Scores> predict_all(const Model& model, std::span<const Example> examples, bool clip) {
  std::vector<Scores> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    Scores s = model.predict(ex.text);
    out.push_back(clip ? clamp_to_score_lattice(s, false) : s);
  }
  return out;
}

MetricsReport evaluate(const Model& model, std::span<const Example> examples) {
  const auto preds = predict_all(model, examples, true);
  std::vector<Scores> truth;
  truth.reserve(examples.size());
  for (const auto& ex : examples) truth.push_back(ex.target);
  return mcrmse(ScoreMatrix::from_scores(truth), ScoreMatrix::from_scores(preds));
}

TrainReport fit(Model& model, std::span<const Example> train, std::span<const Example> valid,
                const TrainConfig& config, const FitOptions& options) {
  config.validate();
  if (train.empty()) throw InputError("fit: empty training set");
  if (valid.empty()) throw InputError("fit: empty validation set");

  if (config.init_output_bias_to_mean) {
    for (std::size_t j = 0; j < kTargetCount; ++j) {
      double m = 0.0;
      for (const auto& ex : train) m += ex.target[j];
      Tensor bias = model.heads().outputs[j].bias;
      bias.mutable_data()[0] = m / static_cast<double>(train.size());
    }
  }

  Trainer trainer(model, config);
  trainer.set_hooks(options.hooks);
  std::mt19937_64 order_rng(mix64(config.seed ^ 0x5EEDull));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainReport report;
  report.best_valid_mcrmse = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_values = parameter_values(model);
  std::vector<Example> batch;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(train[order[i]]);
      loss_sum += trainer.train_step(batch, epoch) * static_cast<double>(batch.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.awp_active = trainer.awp_active(epoch);
    const MetricsReport valid_metrics = evaluate(model, valid);
    rec.valid_mcrmse = valid_metrics.mcrmse;
    rec.valid_rmse = valid_metrics.per_target_rmse;
    if (config.eval_train_each_epoch) rec.train_mcrmse = evaluate(model, train).mcrmse;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    if (rec.valid_mcrmse < report.best_valid_mcrmse) {
      report.best_valid_mcrmse = rec.valid_mcrmse;
      report.best_epoch = epoch;
      best_values = parameter_values(model);
    }
    report.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }

  set_parameter_values(model, best_values);
  if (!options.checkpoint_path.empty()) {
    if (!options.vocab) throw ContractError("fit: checkpoint_path given without a vocabulary");
    save_checkpoint(options.checkpoint_path, model, *options.vocab);
  }
  return report;
}

void write_train_report(std::ostream& out, const TrainReport& report) {
  CsvRow header{"epoch", "train_loss", "train_mcrmse", "valid_mcrmse"};
  for (auto name : kTargetNames) header.push_back("rmse_" + std::string(name));
  header.push_back("awp_active");
  write_csv_row(out, header);
  for (const auto& e : report.epochs) {
    CsvRow row{std::to_string(e.epoch), format_double(e.train_loss),
               e.train_mcrmse ? format_double(*e.train_mcrmse) : std::string(),
               format_double(e.valid_mcrmse)};
    for (double r : e.valid_rmse) row.push_back(format_double(r));
    row.push_back(e.awp_active ? "1" : "0");
    write_csv_row(out, row);
  }
}

void write_timings(std::ostream& out, const TrainReport& report) {
  write_csv_row(out, {"epoch", "seconds"});
  for (const auto& e : report.epochs) write_csv_row(out, {std::to_string(e.epoch), format_double(e.seconds)});
}

}  // namespace essayscore
