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

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "essayscore/cv.hpp"
#include "essayscore/error.hpp"
#include "essayscore/folds.hpp"
#include "essayscore/metrics.hpp"
#include "essayscore/synth.hpp"

using namespace essayscore;

namespace {

ScoreMatrix random_matrix(std::size_t n, std::size_t m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(1.0, 5.0);
  ScoreMatrix out(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) = dist(rng);
  return out;
}

double brute_mcrmse(const ScoreMatrix& t, const ScoreMatrix& p) {
  double total = 0.0;
  for (std::size_t j = 0; j < t.cols(); ++j) {
    double ss = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) ss += (t(i, j) - p(i, j)) * (t(i, j) - p(i, j));
    total += std::sqrt(ss / static_cast<double>(t.rows()));
  }
  return total / static_cast<double>(t.cols());
}

ModelSpec toy_spec() {
  ModelSpec spec;
  spec.d_model = 16;
  spec.n_heads = 2;
  spec.d_ff = 32;
  spec.n_layers = 1;
  return spec;
}

}  // namespace

TEST_SUITE("eval-cv") {
  TEST_CASE("mcrmse hand examples") {
    ScoreMatrix t(2, 6, 3.0);
    CHECK(mcrmse(t, t).mcrmse == 0.0);
    const auto r = mcrmse(t, ScoreMatrix(2, 6, 3.5));
    CHECK(r.mcrmse == 0.5);
    for (double v : r.per_target_rmse) CHECK(v == 0.5);
    CHECK(r.n_records == 2);
    CHECK(r.n_targets == 6);

    const ScoreMatrix a(2, 2, {1, 2, 3, 4});
    const ScoreMatrix b(2, 2, {1, 2, 3, 8});
    const auto r2 = mcrmse(a, b);
    CHECK(r2.per_target_rmse[0] == 0.0);
    CHECK(r2.per_target_rmse[1] == doctest::Approx(std::sqrt(8.0)).epsilon(1e-15));
    CHECK(r2.mcrmse == doctest::Approx(1.41421356).epsilon(1e-8));
  }

  TEST_CASE("mcrmse against a brute-force loop and its invariants") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> cdist(-2.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
      const std::size_t n = 1 + rng() % 30;
      const std::size_t m = 1 + rng() % 7;
      const auto t = random_matrix(n, m, rng);
      const auto p = random_matrix(n, m, rng);
      const auto r = mcrmse(t, p);
      CHECK(std::abs(r.mcrmse - brute_mcrmse(t, p)) <= 1e-12);
      double mean = 0.0;
      for (double v : r.per_target_rmse) mean += v;
      CHECK(std::abs(r.mcrmse - mean / static_cast<double>(m)) <= 1e-12);
      CHECK(mcrmse(p, t).mcrmse == r.mcrmse);

      const double c = cdist(rng);
      ScoreMatrix shifted = t;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) shifted(i, j) += c;
      CHECK(std::abs(mcrmse(t, shifted).mcrmse - std::abs(c)) <= 1e-12);

      ScoreMatrix ts = t;
      ScoreMatrix ps = p;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) {
          ts(i, j) *= -3.0;
          ps(i, j) *= -3.0;
        }
      CHECK(mcrmse(ts, ps).mcrmse == doctest::Approx(3.0 * r.mcrmse).epsilon(1e-12));
    }
  }

  TEST_CASE("mcrmse input errors") {
    CHECK_THROWS_AS(mcrmse(ScoreMatrix(2, 6), ScoreMatrix(3, 6)), InputError);
    CHECK_THROWS_AS(mcrmse(ScoreMatrix(0, 6), ScoreMatrix(0, 6)), InputError);
    ScoreMatrix bad(1, 1, NAN);
    CHECK_THROWS_AS(mcrmse(bad, ScoreMatrix(1, 1)), InputError);
  }

  TEST_CASE("pigeonhole: n = k distinct labels") {
    std::vector<EssayRecord> recs;
    for (int i = 0; i < 5; ++i) {
      const double s = 1.0 + i;
      recs.push_back({"r" + std::to_string(i), "text", Scores{s, s, s, s, s, s}});
    }
    const auto plan = stratified_kfold(recs, 5, 1);
    std::set<std::size_t> folds(plan.fold_of.begin(), plan.fold_of.end());
    CHECK(folds.size() == 5);
  }

  TEST_CASE("folds partition, are deterministic and balanced") {
    const auto recs = synth_corpus(300, 17);
    const auto a = stratified_kfold(recs, 5, 3);
    const auto b = stratified_kfold(recs, 5, 3);
    CHECK(a.fold_of == b.fold_of);
    std::size_t total = 0;
    for (std::size_t f = 0; f < 5; ++f) {
      const auto m = a.members(f);
      total += m.size();
      CHECK(m.size() >= 300 / 5 - 6);
      CHECK(m.size() <= 300 / 5 + 6);
      CHECK(a.complement(f).size() == 300 - m.size());
    }
    CHECK(total == 300);
    CHECK(a.max_mean_deviation() <= 0.1);
  }

  TEST_CASE("stratification beats random splits") {
    int wins = 0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
      const auto recs = synth_corpus(300, 1000 + trial);
      const auto strat = stratified_kfold(recs, 5, trial);
      const auto rand = random_kfold(recs, 5, trial);
      if (strat.max_mean_deviation() <= rand.max_mean_deviation()) ++wins;
    }
    CHECK(wins >= 90);
  }

  TEST_CASE("fold errors") {
    const auto recs = synth_corpus(4, 1);
    CHECK_THROWS_AS(stratified_kfold(recs, 1, 0), InputError);
    CHECK_THROWS_AS(stratified_kfold(recs, 5, 0), InputError);
    auto unlabeled = recs;
    unlabeled[2].scores.reset();
    CHECK_THROWS_AS(stratified_kfold(unlabeled, 2, 0), InputError);
  }

  TEST_CASE("fold plan and audit CSVs") {
    const auto recs = synth_corpus(10, 2);
    const auto plan = stratified_kfold(recs, 2, 0);
    std::ostringstream p;
    write_fold_plan(p, plan);
    CHECK(p.str().rfind("text_id,fold\r\n", 0) == 0);
    std::ostringstream a;
    write_fold_audit(a, plan);
    CHECK(a.str().find("mean_cohesion") != std::string::npos);
    CHECK(a.str().find("count_grammar_5") != std::string::npos);
  }

  TEST_CASE("constant baseline matches the closed-form variance oracle") {
    const auto recs = synth_corpus(90, 6);
    const auto plan = stratified_kfold(recs, 3, 6);
    const auto result = constant_baseline_cv(recs, plan);

    // Per fold: sum of squared errors against the training-side mean m' is
    // n_f * var_f + n_f * (mean_f - m')^2.
    double expected = 0.0;
    for (std::size_t j = 0; j < kTargetCount; ++j) {
      double sse = 0.0;
      for (std::size_t f = 0; f < plan.k; ++f) {
        double sum_in = 0.0;
        double sum_out = 0.0;
        const auto in = plan.members(f);
        const auto out = plan.complement(f);
        for (auto i : in) sum_in += (*recs[i].scores)[j];
        for (auto i : out) sum_out += (*recs[i].scores)[j];
        const double mean_in = sum_in / static_cast<double>(in.size());
        const double mean_out = sum_out / static_cast<double>(out.size());
        double var = 0.0;
        for (auto i : in) var += ((*recs[i].scores)[j] - mean_in) * ((*recs[i].scores)[j] - mean_in);
        sse += var + static_cast<double>(in.size()) * (mean_in - mean_out) * (mean_in - mean_out);
      }
      expected += std::sqrt(sse / static_cast<double>(recs.size()));
    }
    expected /= static_cast<double>(kTargetCount);
    CHECK(result.pooled.mcrmse == doctest::Approx(expected).epsilon(1e-12));
  }

  TEST_CASE("k = 2 on 8 records: two folds of 4, full OOF coverage") {
    const auto recs = synth_corpus(8, 3);
    TrainConfig config;
    config.epochs = 1;
    config.batch_size = 4;
    const auto result = run_cv(recs, toy_spec(), config, 2, 5);
    REQUIRE(result.folds.size() == 2);
    CHECK(result.plan.members(0).size() == 4);
    CHECK(result.plan.members(1).size() == 4);
    CHECK(result.oof.size() == 8);
    CHECK(result.pooled.n_records == 8);
    std::ostringstream out;
    write_cv_metrics(out, result);
    CHECK(out.str().find("pooled,8,") != std::string::npos);
    CHECK(out.str().find("mean,8,") != std::string::npos);
  }

  TEST_CASE("trained toy model beats the constant baseline; jobs do not change results") {
    const auto recs = synth_corpus(60, 8);
    const auto plan = stratified_kfold(recs, 3, 8);
    TrainConfig config;
    config.epochs = 8;
    config.batch_size = 8;
    config.learning_rate = 3e-3;
    const auto serial = run_cv(recs, plan, toy_spec(), config);
    CvOptions opts;
    opts.jobs = 3;
    const auto parallel = run_cv(recs, plan, toy_spec(), config, opts);
    CHECK(serial.pooled.mcrmse == parallel.pooled.mcrmse);
    CHECK(serial.pooled.mcrmse < constant_baseline_cv(recs, plan).pooled.mcrmse);
  }
}
