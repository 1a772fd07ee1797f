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

// Acceptance harness: one PASS / FAIL / DEVIATION line per criterion.
// Exits non-zero only when a hard criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "essayscore/cli/commands.hpp"
#include "essayscore/cli/config.hpp"
#include "essayscore/corpus.hpp"
#include "essayscore/csv.hpp"
#include "essayscore/cv.hpp"
#include "essayscore/error.hpp"
#include "essayscore/folds.hpp"
#include "essayscore/metrics.hpp"
#include "essayscore/model.hpp"
#include "essayscore/pooling.hpp"
#include "essayscore/synth.hpp"
#include "essayscore/trainer.hpp"
#include "json.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace essayscore;
using essayscore::testing::gradcheck;
using essayscore::testing::random_tensor;
using essayscore::testing::read_file;

namespace {

enum class Status { pass, fail, deviation };

struct Outcome {
  Status status = Status::pass;
  std::string detail;
};

/// Collects failed checks; a criterion passes when none were recorded.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++total_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  Outcome outcome(const std::string& summary) const {
    if (failed_ == 0) return {Status::pass, summary};
    std::string detail = summary + "; " + std::to_string(failed_) + "/" + std::to_string(total_) + " checks failed:";
    for (const auto& f : failures_) detail += " [" + f + "]";
    return {Status::fail, detail};
  }

 private:
  std::size_t total_ = 0;
  std::size_t failed_ = 0;
  std::vector<std::string> failures_;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream out;
  out.precision(digits);
  out << v;
  return out.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

cli::Context quiet_context() {
  static std::ostringstream out;
  static std::ostringstream log;
  out.str("");
  log.str("");
  return {out, log};
}

// ---- 1. gradients -----------------------------------------------------------------

ModelSpec gradcheck_spec(std::size_t instance) {
  ModelSpec spec;
  spec.vocab_size = 12;
  spec.max_seq_len = 7;
  spec.d_model = 8;
  spec.n_heads = 2;
  spec.d_ff = 12;
  spec.n_layers = 2;
  static constexpr PoolingMode kModes[] = {PoolingMode::six_metric_attention, PoolingMode::single_attention,
                                           PoolingMode::mean};
  spec.pooling = kModes[instance % 3];
  spec.dropout_p = instance % 4 == 3 ? 0.2 : 0.0;
  return spec;
}

std::vector<Example> random_examples(std::mt19937_64& rng, const ModelSpec& spec, std::size_t count) {
  std::vector<Example> out;
  std::uniform_real_distribution<double> score(1.0, 5.0);
  for (std::size_t e = 0; e < count; ++e) {
    const std::size_t len = 2 + rng() % (spec.max_seq_len - 1);
    const std::size_t real = 1 + rng() % len;
    Example ex;
    for (std::size_t i = 0; i < len; ++i) {
      ex.text.ids.push_back(i < real ? static_cast<std::int32_t>(1 + rng() % (spec.vocab_size - 1)) : 0);
      ex.text.mask.push_back(i < real ? 1 : 0);
    }
    for (auto& t : ex.target) t = score(rng);
    out.push_back(std::move(ex));
  }
  return out;
}

Outcome gradient_correctness() {
  const auto start = std::chrono::steady_clock::now();
  Checks checks;
  double worst_op = 0.0;
  std::string worst_op_name;
  std::size_t op_instances = 0;
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    for (const auto& cs : essayscore::testing::differentiable_op_cases(rng)) {
      const auto r = gradcheck(cs.loss, cs.inputs, 1e-5);
      ++op_instances;
      if (r.max_rel_error > worst_op) {
        worst_op = r.max_rel_error;
        worst_op_name = cs.name;
      }
      checks.expect(r.max_rel_error < 1e-4, cs.name + " trial " + std::to_string(trial) + " rel " +
                                                fmt(r.max_rel_error) + " at " + r.worst);
    }
  }

  // Full encoder + heads training loss, all parameters, all coordinates.
  double worst_model = 0.0;
  double worst_bias_fd = 0.0;
  std::size_t coords = 0;
  constexpr std::size_t kModelInstances = 100;
  for (std::size_t inst = 0; inst < kModelInstances; ++inst) {
    const ModelSpec spec = gradcheck_spec(inst);
    Model model = Model::init(spec, 1000 + inst);
    std::mt19937_64 noise_rng(inst);
    std::normal_distribution<double> noise(0.0, 0.3);
    for (auto& p : model.parameters())
      for (auto& v : Tensor(p.tensor).mutable_data()) v += noise(noise_rng);
    const auto batch = random_examples(noise_rng, spec, 2);
    TrainConfig config;
    config.loss = inst % 2 == 0 ? LossKind::smooth_l1 : LossKind::mse;
    Trainer trainer(model, config);
    // Pooling score biases get identically zero gradient (softmax is shift
    // invariant); they are checked on absolute error instead.
    std::vector<std::pair<std::string, Tensor>> inputs;
    std::vector<std::pair<std::string, Tensor>> shift_biases;
    for (const auto& p : model.parameters()) {
      const bool score_bias = p.path.ends_with(".score.bias");
      (score_bias ? shift_biases : inputs).emplace_back(p.path, p.tensor);
    }
    const auto loss = [&] { return trainer.batch_loss(batch, inst); };
    const auto r = gradcheck(loss, inputs, 1e-5);
    coords += r.coordinates;
    if (!shift_biases.empty()) {
      const auto z = gradcheck(loss, shift_biases, 1e-5);
      coords += z.coordinates;
      double largest = 0.0;
      for (const auto& [name, t] : shift_biases)
        for (double g : t.grad()) largest = std::max(largest, std::abs(g));
      worst_bias_fd = std::max(worst_bias_fd, z.max_abs_error);
      checks.expect(largest <= 1e-12 && z.max_abs_error <= 1e-8,
                    "model instance " + std::to_string(inst) + " score bias gradient not zero");
    }
    worst_model = std::max(worst_model, r.max_rel_error);
    checks.expect(r.max_rel_error < 1e-4, "model instance " + std::to_string(inst) + " (" +
                                              std::string(to_string(spec.pooling)) + ") rel " +
                                              fmt(r.max_rel_error) + " at " + r.worst);
  }
  const double elapsed = seconds_since(start);
  checks.expect(elapsed < 120.0, "runtime " + fmt(elapsed) + "s exceeds 120s");
  return checks.outcome(std::to_string(op_instances) + " op instances (worst " + fmt(worst_op) + " in " +
                        worst_op_name + "), " + std::to_string(kModelInstances) +
                        " full-model instances over " + std::to_string(coords) + " coordinates (worst " +
                        fmt(worst_model) + "; score-bias gradients zero to roundoff, |fd| <= " + fmt(worst_bias_fd, 2) +
                        "), " + fmt(elapsed, 3) + "s");
}

// ---- 2. pooling contract --------------------------------------------------------

Outcome pooling_contract() {
  Checks checks;
  std::mt19937_64 rng(202);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t len = 1 + rng() % 12;
    const std::size_t d = 1 + rng() % 8;
    const auto hidden = random_tensor({len, d}, rng, false, 3.0);
    std::vector<std::uint8_t> mask(len);
    for (auto& m : mask) m = static_cast<std::uint8_t>(rng() % 3 != 0);
    mask[rng() % len] = 1;
    const PoolScorer scorer{random_tensor({d, 1}, rng, false, 2.0), random_tensor({1}, rng, false)};
    std::vector<double> w;
    const auto pooled = attention_pool(scorer, hidden, mask, &w);
    const std::string tag = "trial " + std::to_string(trial);
    double total = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      checks.expect(w[i] >= 0.0, tag + " negative weight");
      if (!mask[i]) checks.expect(w[i] == 0.0, tag + " weight on masked position");
      total += w[i];
    }
    checks.expect(std::abs(total - 1.0) <= 1e-9, tag + " weights sum " + fmt(total, 17));
    for (std::size_t c = 0; c < d; ++c) {
      double lo = INFINITY;
      double hi = -INFINITY;
      for (std::size_t i = 0; i < len; ++i) {
        if (!mask[i]) continue;
        lo = std::min(lo, hidden.at(i * d + c));
        hi = std::max(hi, hidden.at(i * d + c));
      }
      checks.expect(pooled.at(c) >= lo - 1e-12 && pooled.at(c) <= hi + 1e-12, tag + " not convex");
    }
    // Equal scores everywhere: a zero scorer weight with any bias.
    const PoolScorer uniform{Tensor::zeros({d, 1}), scorer.bias};
    const auto flat = attention_pool(uniform, hidden, mask);
    const auto mean = masked_mean_pool(hidden, mask);
    for (std::size_t c = 0; c < d; ++c) checks.expect(flat.at(c) == mean.at(c), tag + " uniform != masked mean");
  }
  return checks.outcome("100 trials: weights nonnegative, sum to 1, zero when masked; output convex; uniform "
                        "scores reproduce the masked mean bitwise");
}

// ---- 3. head isolation ------------------------------------------------------------

Outcome head_isolation() {
  Checks checks;
  ModelSpec spec;
  spec.vocab_size = 20;
  spec.max_seq_len = 10;
  spec.d_model = 16;
  spec.n_heads = 4;
  spec.d_ff = 32;
  spec.n_layers = 2;
  spec.pooling = PoolingMode::six_metric_attention;
  Model model = Model::init(spec, 303);
  const EncodedText text{{3, 5, 7, 9, 11, 13, 0, 0}, {1, 1, 1, 1, 1, 1, 0, 0}};
  std::size_t off_diagonal = 0;
  std::size_t nonzero_diagonal = 0;
  for (std::size_t j = 0; j < kTargetCount; ++j) {
    for (auto p : model.parameters()) p.tensor.zero_grad();
    const Tensor out = model.forward(text);
    backward(sum(slice_cols(out, j, 1)));
    for (std::size_t k = 0; k < kTargetCount; ++k) {
      const auto head = model.heads().head(k);
      bool all_zero = true;
      for (const Tensor& t : {head.scorer.weight, head.scorer.bias, head.output.weight, head.output.bias}) {
        if (!t.has_grad()) continue;
        for (double g : t.grad()) all_zero = all_zero && g == 0.0;
      }
      if (k == j) {
        nonzero_diagonal += all_zero ? 0 : 1;
      } else {
        ++off_diagonal;
        checks.expect(all_zero, "d target " + std::to_string(j) + " / d head " + std::to_string(k) + " != 0");
      }
    }
  }
  checks.expect(off_diagonal == 30, "checked " + std::to_string(off_diagonal) + " off-diagonal pairs");
  checks.expect(nonzero_diagonal == kTargetCount, "some head has zero gradient for its own target");
  return checks.outcome(std::to_string(off_diagonal) + " off-diagonal (target, head) gradients exactly zero, " +
                        std::to_string(nonzero_diagonal) + "/6 diagonal blocks nonzero");
}

// ---- 4. AWP invariants ------------------------------------------------------------

struct ToyData {
  ModelSpec spec;
  std::vector<Example> train;
  std::vector<Example> valid;
};

ToyData toy_data(std::size_t n_train, std::size_t n_valid, std::uint64_t seed, std::size_t d_model) {
  const auto records = synth_corpus(n_train + n_valid, seed);
  const std::span<const EssayRecord> all(records);
  const auto tr = all.first(n_train);
  const auto va = all.subspan(n_train);
  const auto vocab = Vocabulary::build(tr);
  ToyData data;
  data.spec.vocab_size = vocab.size();
  data.spec.d_model = d_model;
  data.spec.d_ff = 2 * d_model;
  data.train = make_examples(tr, vocab, data.spec.max_seq_len);
  data.valid = make_examples(va, vocab, data.spec.max_seq_len);
  return data;
}

double relative_shift(const AwpSnapshot::Entry& e) {
  double d2 = 0.0;
  double w2 = 0.0;
  const auto now = e.tensor.data();
  for (std::size_t i = 0; i < e.saved.size(); ++i) {
    d2 += (now[i] - e.saved[i]) * (now[i] - e.saved[i]);
    w2 += e.saved[i] * e.saved[i];
  }
  return std::sqrt(d2) / std::sqrt(w2);
}

Outcome awp_invariants() {
  Checks checks;
  const ToyData data = toy_data(24, 8, 404, 16);

  // (a) (b) (c): step manually through three epochs and watch the hooks.
  std::size_t restores = 0;
  std::size_t perturbs = 0;
  double worst_shift = 0.0;
  std::size_t epoch1_perturbs = 0;
  for (const double adv_lr : {1.0, 50.0}) {
    for (const std::size_t steps : {std::size_t{1}, std::size_t{3}}) {
      Model model = Model::init(data.spec, 7);
      TrainConfig config;
      config.learning_rate = 1e-3;
      config.adv_lr = adv_lr;
      config.awp_steps = steps;
      config.awp_start_epoch = 2;
      Trainer trainer(model, config);
      std::vector<std::vector<double>> before;
      std::size_t epoch = 0;
      trainer.set_hooks({[&](const AwpSnapshot& snap) {
                           ++perturbs;
                           if (epoch < 2) ++epoch1_perturbs;
                           for (const auto& e : snap.entries()) worst_shift = std::max(worst_shift, relative_shift(e));
                         },
                         [&] {
                           ++restores;
                           checks.expect(parameter_values(model) == before, "restore not bitwise");
                         }});
      const std::span<const Example> train(data.train);
      for (epoch = 1; epoch <= 3; ++epoch) {
        const std::size_t passes_before = trainer.stats().backward_passes;
        std::size_t batches = 0;
        for (std::size_t b = 0; b < train.size(); b += config.batch_size) {
          before = parameter_values(model);
          trainer.train_step(train.subspan(b, std::min(config.batch_size, train.size() - b)), epoch);
          ++batches;
        }
        const std::size_t passes = trainer.stats().backward_passes - passes_before;
        if (epoch == 1) {
          checks.expect(passes == batches, "epoch 1 ran adversarial passes");
        } else {
          checks.expect(passes == batches * (1 + steps), "epoch " + std::to_string(epoch) + " pass count");
        }
      }
    }
  }
  checks.expect(epoch1_perturbs == 0, "perturbation before awp_start_epoch");
  checks.expect(perturbs > 0 && restores > 0, "AWP never ran");
  checks.expect(worst_shift > 0.0, "perturbations were all zero");
  checks.expect(worst_shift <= 0.01 + 1e-12, "relative perturbation " + fmt(worst_shift, 17));

  // (d) adv_lr = 0 is bitwise an AWP-free run.
  TrainConfig off;
  off.epochs = 3;
  off.learning_rate = 1e-3;
  off.awp = false;
  TrainConfig zero = off;
  zero.awp = true;
  zero.adv_lr = 0.0;
  Model a = Model::init(data.spec, 8);
  Model b = Model::init(data.spec, 8);
  const auto ra = fit(a, data.train, data.valid, off);
  const auto rb = fit(b, data.train, data.valid, zero);
  std::ostringstream sa;
  std::ostringstream sb;
  write_train_report(sa, ra);
  write_train_report(sb, rb);
  checks.expect(parameter_values(a) == parameter_values(b), "adv_lr = 0 weights differ from AWP off");
  checks.expect(sa.str() == sb.str(), "adv_lr = 0 report differs from AWP off");

  return checks.outcome("(a) " + std::to_string(restores) + " restores bitwise exact; (b) max relative shift " +
                        fmt(worst_shift, 6) + " <= 0.01 over " + std::to_string(perturbs) +
                        " perturbations; (c) none in epoch 1; (d) adv_lr=0 bitwise equals AWP off");
}

// ---- 5. MCRMSE oracle ---------------------------------------------------------------

double brute_mcrmse(const ScoreMatrix& t, const ScoreMatrix& p) {
  double total = 0.0;
  for (std::size_t j = 0; j < t.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) s += (t(i, j) - p(i, j)) * (t(i, j) - p(i, j));
    total += std::sqrt(s / static_cast<double>(t.rows()));
  }
  return total / static_cast<double>(t.cols());
}

Outcome mcrmse_oracle() {
  Checks checks;
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> value(-3.0, 8.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 40;
    const std::size_t m = 1 + rng() % 8;
    ScoreMatrix t(n, m);
    ScoreMatrix p(n, m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        t(i, j) = value(rng);
        p(i, j) = value(rng);
      }
    const double diff = std::abs(mcrmse(t, p).mcrmse - brute_mcrmse(t, p));
    worst = std::max(worst, diff);
    checks.expect(diff <= 1e-12, "trial " + std::to_string(trial) + " differs by " + fmt(diff));
  }
  // Closed forms on dyadic values, where every step is exact.
  for (const double c : {0.0, 0.5, -0.5, 0.25, -1.5, 2.0, -4.0}) {
    for (const std::size_t n : {std::size_t{1}, std::size_t{4}, std::size_t{16}}) {
      ScoreMatrix t(n, kTargetCount);
      ScoreMatrix p(n, kTargetCount);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < kTargetCount; ++j) {
          t(i, j) = 1.0 + 0.5 * static_cast<double>((i + j) % 9);
          p(i, j) = t(i, j) + c;
        }
      checks.expect(mcrmse(t, p).mcrmse == std::abs(c), "offset " + fmt(c) + " n=" + std::to_string(n));
    }
  }
  return checks.outcome("1000 random matrices agree with the double loop (max diff " + fmt(worst, 3) +
                        "); zero error and constant offsets exact");
}

// ---- 6. stratification --------------------------------------------------------------

Outcome stratification() {
  Checks checks;
  const auto records = synth_corpus(300, 606);
  const auto plan = stratified_kfold(records, 5, 42);
  for (std::size_t f = 0; f < 5; ++f)
    for (std::size_t j = 0; j < kTargetCount; ++j) {
      const double dev = std::abs(plan.audit[f].target_mean[j] - plan.global_mean[j]);
      checks.expect(dev <= 0.1, "fold " + std::to_string(f) + " " + std::string(kTargetNames[j]) + " deviates " +
                                    fmt(dev));
    }
  int wins = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    const auto recs = synth_corpus(300, 10'000 + trial);
    const double strat = stratified_kfold(recs, 5, trial).max_mean_deviation();
    const double rand = random_kfold(recs, 5, trial).max_mean_deviation();
    wins += strat < rand ? 1 : 0;
  }
  checks.expect(wins >= 90, "won " + std::to_string(wins) + "/100");
  return checks.outcome("max fold-mean deviation " + fmt(plan.max_mean_deviation(), 3) +
                        " <= 0.1 over 30 (fold, target) pairs; beats random split in " + std::to_string(wins) +
                        "/100 trials");
}

// ---- 7. learnability ----------------------------------------------------------------

Outcome learnability() {
  const auto start = std::chrono::steady_clock::now();
  Checks checks;

  // Memorise 8 essays.
  const auto few = synth_corpus(8, 707);
  const auto few_vocab = Vocabulary::build(few);
  ModelSpec spec;
  spec.vocab_size = few_vocab.size();
  spec.d_model = 64;
  spec.n_layers = 2;
  const auto few_examples = make_examples(few, few_vocab, spec.max_seq_len);
  TrainConfig memorise;
  memorise.epochs = 200;
  memorise.batch_size = 4;
  memorise.learning_rate = 1e-3;
  memorise.eval_train_each_epoch = true;
  std::size_t first_hit = 0;
  double final_train = 0.0;
  FitOptions options;
  options.on_epoch = [&](const EpochRecord& r) {
    final_train = *r.train_mcrmse;
    if (first_hit == 0 && *r.train_mcrmse < 0.05) first_hit = r.epoch;
  };
  Model small = Model::init(spec, 1);
  fit(small, few_examples, few_examples, memorise, options);
  checks.expect(first_hit != 0, "8-essay training MCRMSE never below 0.05 (final " + fmt(final_train) + ")");

  // 300 / 100 split against the constant training-mean predictor.
  const auto records = synth_corpus(400, 708);
  const std::span<const EssayRecord> all(records);
  const auto tr = all.first(300);
  const auto va = all.subspan(300);
  const auto vocab = Vocabulary::build(tr);
  spec.vocab_size = vocab.size();
  const auto train = make_examples(tr, vocab, spec.max_seq_len);
  const auto valid = make_examples(va, vocab, spec.max_seq_len);
  Scores mean{};
  for (const auto& r : tr)
    for (std::size_t j = 0; j < kTargetCount; ++j) mean[j] += (*r.scores)[j] / static_cast<double>(tr.size());
  std::vector<Scores> truth;
  for (const auto& r : va) truth.push_back(*r.scores);
  const std::vector<Scores> constant(va.size(), mean);
  const double baseline =
      mcrmse(ScoreMatrix::from_scores(truth), ScoreMatrix::from_scores(constant)).mcrmse;
  TrainConfig config;
  config.epochs = 12;
  config.learning_rate = 1e-3;
  Model model = Model::init(spec, 2);
  const auto report = fit(model, train, valid, config);
  const double gain = 1.0 - report.best_valid_mcrmse / baseline;
  checks.expect(gain >= 0.2, "validation " + fmt(report.best_valid_mcrmse) + " vs baseline " + fmt(baseline));

  const double elapsed = seconds_since(start);
  checks.expect(elapsed < 600.0, "runtime " + fmt(elapsed) + "s exceeds 600s");
  return checks.outcome("8 essays below 0.05 at epoch " + std::to_string(first_hit) + " (final " +
                        fmt(final_train) + "); 300/100 split validation " + fmt(report.best_valid_mcrmse) +
                        " vs constant baseline " + fmt(baseline) + " (" + fmt(100.0 * gain, 3) +
                        "% better); " + fmt(elapsed, 3) + "s");
}

// ---- 8. directional ablation --------------------------------------------------------

Outcome ablation(const fs::path& workdir) {
  Checks checks;
  const fs::path dir = workdir / "ablation";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_csv(dir / "corpus.csv", synth_corpus(150, 808));

  cli::RunConfig config;
  config.data_train = dir / "corpus.csv";
  config.output_dir = dir / "out";
  config.model.d_model = 32;
  config.model.d_ff = 64;
  config.train.epochs = 12;
  config.train.learning_rate = 1e-3;
  config.cv_k = 3;
  config.ablate_seeds = 5;
  config.ablate_pooling = {PoolingMode::single_attention, PoolingMode::six_metric_attention};
  config.ablate_awp = {true, false};
  config.jobs = std::max(1u, std::thread::hardware_concurrency());
  auto ctx = quiet_context();
  cli::cmd_ablate(config, ctx);

  // Controlled comparison: one fold plan, identical seed columns per variant.
  std::istringstream ablation_csv(read_file(config.output_dir / "ablation.csv"));
  const auto table = read_csv(ablation_csv, "ablation.csv");
  checks.expect(table.rows.size() == 4, "expected 4 variants, got " + std::to_string(table.rows.size()));
  std::vector<std::string> seed_columns;
  for (const auto& h : table.header)
    if (h.rfind("cv_seed", 0) == 0) seed_columns.push_back(h);
  checks.expect(seed_columns.size() == 5, "expected 5 per-seed columns");
  checks.expect(fs::exists(config.output_dir / "folds.csv"), "shared folds.csv missing");
  std::set<std::string> cv_seed_lines;
  for (const auto& entry : fs::directory_iterator(config.output_dir / "variants")) {
    std::istringstream in(read_file(entry.path() / "config.resolved"));
    for (std::string line; std::getline(in, line);)
      if (line.rfind("cv.", 0) == 0 || line.rfind("data.train", 0) == 0) cv_seed_lines.insert(line);
  }
  checks.expect(cv_seed_lines.size() == 4, "variants disagree on fold settings");

  const auto summary = nlohmann::json::parse(read_file(config.output_dir / "ablation_summary.json"));
  std::map<std::string, double> cv_mean;
  for (const auto& row : table.rows) cv_mean[row.at(0)] = std::stod(row.at(3));
  std::string numbers;
  for (const auto& [name, v] : cv_mean) numbers += " " + name + "=" + fmt(v, 5);
  bool all_hold = true;
  std::string orderings;
  for (const auto& o : summary.at("orderings")) {
    const bool holds = o.at("holds").get<bool>();
    all_hold = all_hold && holds;
    orderings += " " + o.at("lhs").get<std::string>() + (holds ? " <= " : " > ") + o.at("rhs").get<std::string>() + ";";
  }
  Outcome out = checks.outcome("5 seeds x 4 variants on one shared fold plan; mean CV:" + numbers +
                               "; orderings:" + orderings);
  if (out.status == Status::pass && !all_hold) {
    out.status = Status::deviation;
    out.detail += " (ordering not reproduced at toy scale; documented deviation)";
  }
  return out;
}

// ---- 9. determinism -----------------------------------------------------------------

using Snapshot = std::map<std::string, std::string>;

/// File contents under `dir`, skipping wall-clock timing files.
Snapshot snapshot_dir(const fs::path& dir) {
  Snapshot out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().filename() == "timings.csv") continue;
    out[fs::relative(entry.path(), dir).generic_string()] = read_file(entry.path());
  }
  return out;
}

Outcome determinism(const fs::path& workdir) {
  Checks checks;
  const fs::path dir = workdir / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string tiny = "-s model.d_model=16 -s model.d_ff=32 -s model.n_layers=1 -s train.epochs=3";
  const std::string corpus = (dir / "corpus.csv").string();
  const std::string unlabeled = (dir / "unlabeled.csv").string();
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "synth -n 48 --seed 3 -o " + corpus},
      {"synth-unlabeled", "synth -n 6 --seed 4 --unlabeled -o " + unlabeled},
      {"train", "train --train " + corpus + " -o " + (dir / "train").string() + " " + tiny},
      {"cv", "cv --train " + corpus + " -k 3 -o " + (dir / "cv").string() + " " + tiny},
      {"ablate", "ablate --train " + corpus + " -k 2 --seeds 2 -s ablate.pooling=mean,six_metric_attention -o " +
                     (dir / "ablate").string() + " " + tiny},
      {"predict", "predict --checkpoint " + (dir / "train" / "model.ckpt").string() + " -i " + unlabeled + " -o " +
                      (dir / "predict").string()},
      {"score", "score " + corpus + " " + (dir / "cv" / "oof_predictions.csv").string() + " -o " +
                    (dir / "score.json").string()},
  };
  const auto split = [](const std::string& line) {
    std::vector<std::string> args;
    std::istringstream in(line);
    for (std::string a; in >> a;) args.push_back(a);
    args.insert(args.begin(), "-q");
    return args;
  };
  const auto run_all = [&] {
    for (const auto& [name, line] : commands) {
      std::ostringstream out;
      std::ostringstream err;
      const int code = cli::run(split(line), out, err);
      checks.expect(code == 0, name + " exited " + std::to_string(code) + ": " + err.str());
    }
    return snapshot_dir(dir);
  };
  const Snapshot first = run_all();
  for (const auto& sub : {"train", "cv", "ablate", "predict"}) fs::remove_all(dir / sub);
  fs::remove(dir / "score.json");
  fs::remove(dir / "corpus.csv");
  fs::remove(dir / "unlabeled.csv");
  const Snapshot second = run_all();
  checks.expect(first.size() == second.size(), "file sets differ between runs");
  std::size_t bytes = 0;
  for (const auto& [path, content] : first) {
    const auto it = second.find(path);
    checks.expect(it != second.end() && it->second == content, path + " differs between runs");
    bytes += content.size();
  }
  return checks.outcome(std::to_string(commands.size()) + " commands rerun: " + std::to_string(first.size()) +
                        " artifacts (" + std::to_string(bytes) + " bytes) byte-identical");
}

// ---- 10. CSV robustness -------------------------------------------------------------

Outcome csv_robustness(const fs::path& workdir) {
  Checks checks;
  std::vector<EssayRecord> records = synth_corpus(5, 1010);
  records[0].full_text = "First line,\nsecond line with \"quotes\"\r\n\nthird, after a blank line";
  records[1].full_text = "\"Quoted start\" and trailing comma,";
  records[2].full_text = "Unicode: caf\xC3\xA9 na\xC3\xAFve \xE2\x80\x94 r\xC3\xA9sum\xC3\xA9\n";
  records[3].text_id = "id,with\"comma";
  const fs::path path = workdir / "roundtrip.csv";
  write_csv(path, records);
  const auto back = load_csv(path);
  checks.expect(back == records, "records changed across write/load");

  std::ostringstream first;
  write_records(first, back);
  std::ostringstream again;
  write_records(again, records);
  checks.expect(first.str() == again.str(), "rewriting is not byte-stable");

  std::string message;
  try {
    std::istringstream in(
        "text_id,full_text,cohesion,syntax,vocabulary,phraseology,grammar,conventions\n"
        "good_1,\"fine\nessay\",3,3,3,3,3,3\n"
        "bad_essay_42,\"off, lattice\",3.5,3.25,3,3,3,3\n");
    (void)read_records(in, "offlattice.csv");
  } catch (const ValidationError& e) {
    message = e.what();
  }
  checks.expect(message.find("bad_essay_42") != std::string::npos, "error does not name the text_id: " + message);
  return checks.outcome("5 records with quoted multi-line text, quotes, commas and UTF-8 round-trip losslessly; "
                        "off-lattice score rejected: " +
                        message);
}

struct Criterion {
  int id;
  std::string title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"essayscore acceptance harness"};
  fs::path workdir = fs::temp_directory_path() / "essayscore-acceptance";
  std::vector<int> only;
  app.add_option("--workdir", workdir, "Scratch directory for generated corpora and runs");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", gradient_correctness},
      {2, "attention pooling contract", pooling_contract},
      {3, "head isolation", head_isolation},
      {4, "AWP invariants", awp_invariants},
      {5, "MCRMSE oracle", mcrmse_oracle},
      {6, "stratification quality", stratification},
      {7, "end-to-end learnability", learnability},
      {8, "directional ablation", [&] { return ablation(workdir); }},
      {9, "determinism", [&] { return determinism(workdir); }},
      {10, "CSV robustness", [&] { return csv_robustness(workdir); }},
  };

  int hard_failures = 0;
  int deviations = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {Status::fail, std::string("threw: ") + e.what()};
    }
    const char* tag = outcome.status == Status::pass ? "PASS" : outcome.status == Status::fail ? "FAIL" : "DEVIATION";
    hard_failures += outcome.status == Status::fail ? 1 : 0;
    deviations += outcome.status == Status::deviation ? 1 : 0;
    std::printf("[%s] %d %s: %s (%.1fs)\n", tag, c.id, c.title.c_str(), outcome.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
  }
  std::printf("%d hard failure(s), %d documented deviation(s)\n", hard_failures, deviations);
  return hard_failures == 0 ? 0 : 1;
}
