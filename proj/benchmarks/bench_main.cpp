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

// Microbenchmarks for the hot paths: matmul, encoder passes, a training
// step with and without AWP, and fold assignment.

#include <benchmark/benchmark.h>

#include <random>
#include <span>
#include <vector>

#include "essayscore/folds.hpp"
#include "essayscore/model.hpp"
#include "essayscore/synth.hpp"
#include "essayscore/tensor.hpp"
#include "essayscore/trainer.hpp"

namespace {

using namespace essayscore;

Tensor random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, bool requires_grad = false) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> values(rows * cols);
  for (auto& v : values) v = dist(rng);
  return Tensor::from({rows, cols}, std::move(values), requires_grad);
}

struct Fixture {
  ModelSpec spec;
  std::vector<Example> examples;
};

Fixture make_fixture(std::size_t d_model, std::size_t n_records) {
  const auto records = synth_corpus(n_records, 3);
  const auto vocab = Vocabulary::build(records);
  Fixture f;
  f.spec.vocab_size = vocab.size();
  f.spec.d_model = d_model;
  f.spec.d_ff = 2 * d_model;
  f.examples = make_examples(records, vocab, f.spec.max_seq_len);
  return f;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const auto a = random_matrix(n, n, rng);
  const auto b = random_matrix(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(2);
  auto a = random_matrix(n, n, rng, true);
  auto b = random_matrix(n, n, rng, true);
  for (auto _ : state) {
    a.zero_grad();
    b.zero_grad();
    backward(sum(matmul(a, b)));
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(64);

void BM_ModelForward(benchmark::State& state) {
  const auto f = make_fixture(static_cast<std::size_t>(state.range(0)), 4);
  const Model model = Model::init(f.spec, 1);
  const NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(f.examples[0].text));
}
BENCHMARK(BM_ModelForward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ModelForwardBackward(benchmark::State& state) {
  const auto f = make_fixture(static_cast<std::size_t>(state.range(0)), 4);
  const Model model = Model::init(f.spec, 1);
  const auto params = model.parameters();
  for (auto _ : state) {
    for (auto p : params) p.tensor.zero_grad();
    backward(sum(model.forward(f.examples[0].text)));
  }
}
BENCHMARK(BM_ModelForwardBackward)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto f = make_fixture(32, 8);
  Model model = Model::init(f.spec, 1);
  TrainConfig config;
  config.awp = state.range(0) != 0;
  config.awp_start_epoch = 1;
  Trainer trainer(model, config);
  const std::span<const Example> batch(f.examples);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step(batch, 1));
  state.SetLabel(config.awp ? "awp" : "plain");
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_StratifiedKFold(benchmark::State& state) {
  const auto records = synth_corpus(static_cast<std::size_t>(state.range(0)), 5);
  for (auto _ : state) benchmark::DoNotOptimize(stratified_kfold(records, 5, 42));
}
BENCHMARK(BM_StratifiedKFold)->Arg(300)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
