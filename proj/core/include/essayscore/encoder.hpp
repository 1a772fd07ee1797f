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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "essayscore/tensor.hpp"

namespace essayscore {

enum class PoolingMode { single_attention, six_metric_attention, mean };

std::string_view to_string(PoolingMode mode);
PoolingMode parse_pooling_mode(std::string_view text);

struct ModelSpec {
  std::size_t vocab_size = 2;
  std::size_t max_seq_len = 96;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 128;
  double dropout_p = 0.0;
  PoolingMode pooling = PoolingMode::six_metric_attention;
  std::size_t n_targets = 6;

  /// Throws ConfigError on the first violated constraint.
  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

/// A parameter tensor with its checkpoint path. `perturbable` marks weight
/// matrices and embeddings, the set adversarial weight perturbation touches.
struct NamedParameter {
  std::string path;
  Tensor tensor;
  bool perturbable = false;
};

struct EncoderLayer {
  Tensor attn_norm_gain, attn_norm_bias;
  Tensor query, key, value, output;  // [d x d], no biases
  Tensor ffn_norm_gain, ffn_norm_bias;
  Tensor ffn_in, ffn_in_bias;    // [d x d_ff], [d_ff]
  Tensor ffn_out, ffn_out_bias;  // [d_ff x d], [d]
};

struct EncoderState {
  Tensor token_embedding;     // [vocab x d]
  Tensor position_embedding;  // [max_seq_len x d]
  std::vector<EncoderLayer> layers;
  Tensor final_norm_gain, final_norm_bias;

  /// Parameters in a fixed order with paths like "encoder.layer0.attn.query".
  std::vector<NamedParameter> parameters() const;
};

/// Optional capture of intermediate attention probabilities, one [L x L]
/// matrix per (layer, head), for inspection and tests.
struct EncoderTrace {
  std::vector<Tensor> attention;
};

/// Pre-norm transformer encoder weights drawn N(0, 0.02^2); norm gains 1,
/// biases 0. Deterministic for a given seed.
EncoderState init_encoder(const ModelSpec& spec, std::uint64_t seed);

/// Hidden states [L x d_model]. `mask[i] != 0` marks real tokens; padded
/// keys get zero attention from every query.
Tensor encode(const EncoderState& state, const ModelSpec& spec,
              std::span<const std::int32_t> token_ids, std::span<const std::uint8_t> mask,
              DropoutStream* dropout = nullptr, EncoderTrace* trace = nullptr);

/// Deep copy with fresh leaves (same values, no grads).
EncoderState clone(const EncoderState& state);

/// Additive pre-softmax value for masked positions.
inline constexpr double kMaskedScore = -1e9;

}  // namespace essayscore
