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

#include "essayscore/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "essayscore/error.hpp"

namespace essayscore {

namespace {

std::size_t count_unmasked(std::span<const std::uint8_t> mask) {
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](auto m) { return m != 0; }));
}

void check_pool_inputs(const Tensor& hidden, std::span<const std::uint8_t> mask) {
  if (hidden.rank() != 2) {
    throw DimensionError("pooling expects [seq x d] hidden states, got " + shape_string(hidden.shape()));
  }
  if (mask.size() != hidden.dim(0)) {
    throw DimensionError("pooling mask has " + std::to_string(mask.size()) + " entries for " +
                         std::to_string(hidden.dim(0)) + " positions");
  }
  if (count_unmasked(mask) == 0) {
    throw ContractError("attention pooling over an all-masked sequence is undefined");
  }
}

Tensor project(const OutputProjection& out, const Tensor& pooled) {
  return add_bias(matmul(pooled, out.weight), out.bias);
}

Tensor leaf_like(const Tensor& t) {
  auto c = t.detach();
  c.set_requires_grad(true);
  return c;
}

}  // namespace

AttentionPoolHead HeadBank::head(std::size_t target) const {
  if (mode != PoolingMode::six_metric_attention) {
    throw ContractError("HeadBank::head() is only defined for six_metric_attention");
  }
  return {scorers.at(target), outputs.at(target)};
}

std::vector<NamedParameter> HeadBank::parameters() const {
  std::vector<NamedParameter> out;
  if (mode == PoolingMode::six_metric_attention) {
    for (std::size_t j = 0; j < scorers.size(); ++j) {
      const std::string p = "head." + std::string(kTargetNames[j]) + ".score.";
      out.push_back({p + "weight", scorers[j].weight, true});
      out.push_back({p + "bias", scorers[j].bias, false});
    }
  } else if (mode == PoolingMode::single_attention) {
    out.push_back({"head.shared.score.weight", scorers.at(0).weight, true});
    out.push_back({"head.shared.score.bias", scorers.at(0).bias, false});
  }
  for (std::size_t j = 0; j < outputs.size(); ++j) {
    const std::string p = "head." + std::string(kTargetNames[j]) + ".out.";
    out.push_back({p + "weight", outputs[j].weight, true});
    out.push_back({p + "bias", outputs[j].bias, false});
  }
  return out;
}

HeadBank init_heads(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(mix64(seed ^ 0x68656164ull));
  std::normal_distribution<double> dist(0.0, 0.02);
  auto normal_column = [&] {
    std::vector<double> v(spec.d_model);
    for (auto& x : v) x = dist(rng);
    return Tensor::from({spec.d_model, 1}, std::move(v), true);
  };
  HeadBank bank;
  bank.mode = spec.pooling;
  const std::size_t n_scorers = spec.pooling == PoolingMode::six_metric_attention ? spec.n_targets
                                : spec.pooling == PoolingMode::single_attention ? 1
                                                                                : 0;
  for (std::size_t i = 0; i < n_scorers; ++i) {
    bank.scorers.push_back({normal_column(), Tensor::zeros({1}, true)});
  }
  for (std::size_t j = 0; j < spec.n_targets; ++j) {
    bank.outputs.push_back({normal_column(), Tensor::zeros({1}, true)});
  }
  return bank;
}

HeadBank clone(const HeadBank& bank) {
  HeadBank out;
  out.mode = bank.mode;
  for (const auto& s : bank.scorers) out.scorers.push_back({leaf_like(s.weight), leaf_like(s.bias)});
  for (const auto& o : bank.outputs) out.outputs.push_back({leaf_like(o.weight), leaf_like(o.bias)});
  return out;
}

Tensor attention_pool(const PoolScorer& scorer, const Tensor& hidden,
                      std::span<const std::uint8_t> mask, std::vector<double>* weights_out) {
  check_pool_inputs(hidden, mask);
  const std::size_t len = hidden.dim(0);
  Tensor scores = add_bias(matmul(hidden, scorer.weight), scorer.bias);
  if (count_unmasked(mask) != len) {
    std::vector<double> bias(len, 0.0);
    for (std::size_t i = 0; i < len; ++i)
      if (mask[i] == 0) bias[i] = kMaskedScore;
    scores = scores + Tensor::from({len, 1}, std::move(bias));
  }
  Tensor weights = softmax(scores, 0);
  if (weights_out) weights_out->assign(weights.data().begin(), weights.data().end());
  return matmul(transpose(weights), hidden);
}

Tensor attention_pool(const AttentionPoolHead& head, const Tensor& hidden,
                      std::span<const std::uint8_t> mask, std::vector<double>* weights_out) {
  return attention_pool(head.scorer, hidden, mask, weights_out);
}

Tensor masked_mean_pool(const Tensor& hidden, std::span<const std::uint8_t> mask) {
  check_pool_inputs(hidden, mask);
  const std::size_t len = hidden.dim(0);
  const double w = 1.0 / static_cast<double>(count_unmasked(mask));
  std::vector<double> weights(len, 0.0);
  for (std::size_t i = 0; i < len; ++i)
    if (mask[i] != 0) weights[i] = w;
  return matmul(Tensor::from({1, len}, std::move(weights)), hidden);
}

Tensor head_scores(const HeadBank& bank, const Tensor& hidden, std::span<const std::uint8_t> mask) {
  std::vector<Tensor> columns;
  columns.reserve(bank.outputs.size());
  switch (bank.mode) {
    case PoolingMode::six_metric_attention:
      if (bank.scorers.size() != bank.outputs.size()) {
        throw ContractError("six_metric_attention needs one scorer per target");
      }
      for (std::size_t j = 0; j < bank.outputs.size(); ++j) {
        columns.push_back(project(bank.outputs[j], attention_pool(bank.scorers[j], hidden, mask)));
      }
      break;
    case PoolingMode::single_attention: {
      Tensor pooled = attention_pool(bank.scorers.at(0), hidden, mask);
      for (const auto& out : bank.outputs) columns.push_back(project(out, pooled));
      break;
    }
    case PoolingMode::mean: {
      Tensor pooled = masked_mean_pool(hidden, mask);
      for (const auto& out : bank.outputs) columns.push_back(project(out, pooled));
      break;
    }
  }
  return concat_cols(columns);
}

Scores predict_scores(const HeadBank& bank, const Tensor& hidden,
                      std::span<const std::uint8_t> mask) {
  NoGradGuard no_grad;
  Tensor out = head_scores(bank, hidden, mask);
  Scores s{};
  for (std::size_t j = 0; j < kTargetCount; ++j) s[j] = out.at(j);
  return s;
}

double clamp_to_score_lattice(double raw, bool round_to_lattice) {
  double v = std::clamp(raw, kScoreMin, kScoreMax);
  if (round_to_lattice) v = std::round(2.0 * v) / 2.0;
  return v;
}

Scores clamp_to_score_lattice(const Scores& raw, bool round_to_lattice) {
  Scores out{};
  for (std::size_t j = 0; j < raw.size(); ++j) out[j] = clamp_to_score_lattice(raw[j], round_to_lattice);
  return out;
}

}  // namespace essayscore
