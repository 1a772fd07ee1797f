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

#include "essayscore/encoder.hpp"

#include <cmath>
#include <random>

#include "essayscore/error.hpp"

namespace essayscore {

namespace {

constexpr double kInitStd = 0.02;

Tensor normal_tensor(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, kInitStd);
  std::vector<double> values(shape_size(shape));
  for (auto& v : values) v = dist(rng);
  return Tensor::from(std::move(shape), std::move(values), true);
}

Tensor constant_tensor(Shape shape, double value) { return Tensor::full(std::move(shape), value, true); }

Tensor fresh_leaf(const Tensor& t) {
  auto copy = t.detach();
  copy.set_requires_grad(true);
  return copy;
}

}  // namespace

std::string_view to_string(PoolingMode mode) {
  switch (mode) {
    case PoolingMode::single_attention: return "single_attention";
    case PoolingMode::six_metric_attention: return "six_metric_attention";
    case PoolingMode::mean: return "mean";
  }
  return "unknown";
}

PoolingMode parse_pooling_mode(std::string_view text) {
  if (text == "single_attention") return PoolingMode::single_attention;
  if (text == "six_metric_attention") return PoolingMode::six_metric_attention;
  if (text == "mean") return PoolingMode::mean;
  throw ConfigError("unknown pooling mode '" + std::string(text) +
                    "' (expected single_attention, six_metric_attention or mean)");
}

void ModelSpec::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("model.") + name + " must be positive");
  };
  positive(vocab_size, "vocab_size");
  positive(max_seq_len, "max_seq_len");
  positive(d_model, "d_model");
  positive(n_layers, "n_layers");
  positive(n_heads, "n_heads");
  positive(d_ff, "d_ff");
  positive(n_targets, "n_targets");
  if (d_model % n_heads != 0) {
    throw ConfigError("model.d_model (" + std::to_string(d_model) +
                      ") must be divisible by model.n_heads (" + std::to_string(n_heads) + ")");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("model.dropout_p must be in [0, 1)");
  if (n_targets != 6) {
    throw ConfigError("model.n_targets must be 6 (one per scored dimension)");
  }
}

std::vector<NamedParameter> EncoderState::parameters() const {
  std::vector<NamedParameter> out;
  out.push_back({"encoder.embed.token", token_embedding, true});
  out.push_back({"encoder.embed.position", position_embedding, true});
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string p = "encoder.layer" + std::to_string(i) + ".";
    out.push_back({p + "attn_norm.gain", l.attn_norm_gain, false});
    out.push_back({p + "attn_norm.bias", l.attn_norm_bias, false});
    out.push_back({p + "attn.query", l.query, true});
    out.push_back({p + "attn.key", l.key, true});
    out.push_back({p + "attn.value", l.value, true});
    out.push_back({p + "attn.output", l.output, true});
    out.push_back({p + "ffn_norm.gain", l.ffn_norm_gain, false});
    out.push_back({p + "ffn_norm.bias", l.ffn_norm_bias, false});
    out.push_back({p + "ffn.in.weight", l.ffn_in, true});
    out.push_back({p + "ffn.in.bias", l.ffn_in_bias, false});
    out.push_back({p + "ffn.out.weight", l.ffn_out, true});
    out.push_back({p + "ffn.out.bias", l.ffn_out_bias, false});
  }
  out.push_back({"encoder.final_norm.gain", final_norm_gain, false});
  out.push_back({"encoder.final_norm.bias", final_norm_bias, false});
  return out;
}

EncoderState init_encoder(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = spec.d_model;
  EncoderState s;
  s.token_embedding = normal_tensor({spec.vocab_size, d}, rng);
  s.position_embedding = normal_tensor({spec.max_seq_len, d}, rng);
  for (std::size_t i = 0; i < spec.n_layers; ++i) {
    EncoderLayer l;
    l.attn_norm_gain = constant_tensor({d}, 1.0);
    l.attn_norm_bias = constant_tensor({d}, 0.0);
    l.query = normal_tensor({d, d}, rng);
    l.key = normal_tensor({d, d}, rng);
    l.value = normal_tensor({d, d}, rng);
    l.output = normal_tensor({d, d}, rng);
    l.ffn_norm_gain = constant_tensor({d}, 1.0);
    l.ffn_norm_bias = constant_tensor({d}, 0.0);
    l.ffn_in = normal_tensor({d, spec.d_ff}, rng);
    l.ffn_in_bias = constant_tensor({spec.d_ff}, 0.0);
    l.ffn_out = normal_tensor({spec.d_ff, d}, rng);
    l.ffn_out_bias = constant_tensor({d}, 0.0);
    s.layers.push_back(std::move(l));
  }
  s.final_norm_gain = constant_tensor({d}, 1.0);
  s.final_norm_bias = constant_tensor({d}, 0.0);
  return s;
}

EncoderState clone(const EncoderState& state) {
  EncoderState s;
  s.token_embedding = fresh_leaf(state.token_embedding);
  s.position_embedding = fresh_leaf(state.position_embedding);
  for (const auto& l : state.layers) {
    s.layers.push_back({fresh_leaf(l.attn_norm_gain), fresh_leaf(l.attn_norm_bias),
                        fresh_leaf(l.query), fresh_leaf(l.key), fresh_leaf(l.value),
                        fresh_leaf(l.output), fresh_leaf(l.ffn_norm_gain),
                        fresh_leaf(l.ffn_norm_bias), fresh_leaf(l.ffn_in),
                        fresh_leaf(l.ffn_in_bias), fresh_leaf(l.ffn_out),
                        fresh_leaf(l.ffn_out_bias)});
  }
  s.final_norm_gain = fresh_leaf(state.final_norm_gain);
  s.final_norm_bias = fresh_leaf(state.final_norm_bias);
  return s;
}

Tensor encode(const EncoderState& state, const ModelSpec& spec,
              std::span<const std::int32_t> token_ids, std::span<const std::uint8_t> mask,
              DropoutStream* dropout_stream, EncoderTrace* trace) {
  const std::size_t len = token_ids.size();
  if (len != mask.size()) {
    throw InputError("encode: " + std::to_string(len) + " token ids but " +
                     std::to_string(mask.size()) + " mask entries");
  }
  if (len == 0) throw InputError("encode: empty token sequence");
  if (len > spec.max_seq_len) {
    throw InputError("encode: sequence length " + std::to_string(len) + " exceeds max_seq_len " +
                     std::to_string(spec.max_seq_len) + "; truncate before encoding");
  }
  for (std::size_t i = 0; i < len; ++i) {
    if (token_ids[i] < 0 || static_cast<std::size_t>(token_ids[i]) >= spec.vocab_size) {
      throw InputError("encode: token id " + std::to_string(token_ids[i]) + " at position " +
                       std::to_string(i) + " outside vocabulary of size " +
                       std::to_string(spec.vocab_size));
    }
  }

  std::vector<std::int32_t> positions(len);
  for (std::size_t i = 0; i < len; ++i) positions[i] = static_cast<std::int32_t>(i);

  Tensor x = embedding(state.token_embedding, token_ids) +
             embedding(state.position_embedding, positions);
  x = dropout(x, dropout_stream);

  Tensor key_mask;
  bool any_masked = false;
  for (auto m : mask) any_masked |= (m == 0);
  if (any_masked) {
    std::vector<double> bias(len * len, 0.0);
    for (std::size_t q = 0; q < len; ++q)
      for (std::size_t k = 0; k < len; ++k)
        if (mask[k] == 0) bias[q * len + k] = kMaskedScore;
    key_mask = Tensor::from({len, len}, std::move(bias));
  }

  const std::size_t head_dim = spec.d_model / spec.n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));

  for (const auto& layer : state.layers) {
    Tensor h = layer_norm(x, layer.attn_norm_gain, layer.attn_norm_bias);
    Tensor q = matmul(h, layer.query);
    Tensor k = matmul(h, layer.key);
    Tensor v = matmul(h, layer.value);
    std::vector<Tensor> heads;
    heads.reserve(spec.n_heads);
    for (std::size_t hd = 0; hd < spec.n_heads; ++hd) {
      const std::size_t start = hd * head_dim;
      Tensor scores =
          scale(matmul(slice_cols(q, start, head_dim), transpose(slice_cols(k, start, head_dim))),
                inv_sqrt);
      if (any_masked) scores = scores + key_mask;
      Tensor probs = softmax(scores, 1);
      if (trace) trace->attention.push_back(probs);
      heads.push_back(matmul(probs, slice_cols(v, start, head_dim)));
    }
    Tensor attended = heads.size() == 1 ? heads.front() : concat_cols(heads);
    x = x + dropout(matmul(attended, layer.output), dropout_stream);

    Tensor f = layer_norm(x, layer.ffn_norm_gain, layer.ffn_norm_bias);
    f = gelu(add_bias(matmul(f, layer.ffn_in), layer.ffn_in_bias));
    f = add_bias(matmul(f, layer.ffn_out), layer.ffn_out_bias);
    x = x + dropout(f, dropout_stream);
  }
  return layer_norm(x, state.final_norm_gain, state.final_norm_bias);
}

}  // namespace essayscore
