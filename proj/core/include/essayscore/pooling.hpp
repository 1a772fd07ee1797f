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

// Attention pooling regression heads.
//
// AttentionPooling(x) = softmax(Pool(x)) . x, where Pool scores each token
// with a learned linear map d_model -> 1. The pooled vector then goes through
// a per-target linear map d_model -> 1 to give one raw score.

#include <cstdint>
#include <span>
#include <vector>

#include "essayscore/encoder.hpp"
#include "essayscore/targets.hpp"
#include "essayscore/tensor.hpp"

namespace essayscore {

/// Pool(x): per-token importance score, weight [d x 1] and bias [1].
struct PoolScorer {
  Tensor weight;
  Tensor bias;
};

/// Pooled vector -> one predicted score, weight [d x 1] and bias [1].
struct OutputProjection {
  Tensor weight;
  Tensor bias;
};

/// One metric-specific head: its own scorer and its own projection.
struct AttentionPoolHead {
  PoolScorer scorer;
  OutputProjection output;
};

/// The bank of heads behind the six targets.
///
/// six_metric_attention: six scorers, target j uses scorer j and output j.
/// single_attention: one shared scorer feeding six outputs.
/// mean: no scorer, masked mean pooling feeding six outputs.
struct HeadBank {
  PoolingMode mode = PoolingMode::six_metric_attention;
  std::vector<PoolScorer> scorers;
  std::vector<OutputProjection> outputs;

  /// Head j in six_metric_attention mode.
  AttentionPoolHead head(std::size_t target) const;

  /// Paths "head.<target>.score.*", "head.shared.score.*", "head.<target>.out.*".
  std::vector<NamedParameter> parameters() const;
};

HeadBank init_heads(const ModelSpec& spec, std::uint64_t seed);
HeadBank clone(const HeadBank& bank);

/// Computes softmax(Pool(x)) . x over unmasked rows of `hidden` [L x d] -> [1 x d].
/// If `weights_out` is given it receives the L pooling weights.
/// Throws ContractError when every position is masked.
Tensor attention_pool(const PoolScorer& scorer, const Tensor& hidden,
                      std::span<const std::uint8_t> mask, std::vector<double>* weights_out = nullptr);

/// Convenience overload for a full head.
Tensor attention_pool(const AttentionPoolHead& head, const Tensor& hidden,
                      std::span<const std::uint8_t> mask, std::vector<double>* weights_out = nullptr);

/// Mean of unmasked rows -> [1 x d].
Tensor masked_mean_pool(const Tensor& hidden, std::span<const std::uint8_t> mask);

/// Raw (unclamped) scores as a [1 x n_targets] tensor, differentiable.
Tensor head_scores(const HeadBank& bank, const Tensor& hidden, std::span<const std::uint8_t> mask);

/// Raw scores as plain values.
Scores predict_scores(const HeadBank& bank, const Tensor& hidden,
                      std::span<const std::uint8_t> mask);

/// Clip each score to [1, 5]; with `round_to_lattice` also snap to the
/// nearest multiple of 0.5 via round(2x)/2.
Scores clamp_to_score_lattice(const Scores& raw, bool round_to_lattice = false);
double clamp_to_score_lattice(double raw, bool round_to_lattice = false);

}  // namespace essayscore
