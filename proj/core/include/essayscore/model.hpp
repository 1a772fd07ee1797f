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

#include <cstdint>
#include <span>
#include <vector>

#include "essayscore/encoder.hpp"
#include "essayscore/pooling.hpp"
#include "essayscore/targets.hpp"

namespace essayscore {

/// Token ids plus attention mask for one essay, already truncated.
struct EncodedText {
  std::vector<std::int32_t> ids;
  std::vector<std::uint8_t> mask;
};

/// Encoder + head bank. Copying a Model shares parameter storage; use
/// clone() for an independent copy.
class Model {
 public:
  Model() = default;
  Model(ModelSpec spec, EncoderState encoder, HeadBank heads);

  static Model init(const ModelSpec& spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  const EncoderState& encoder() const { return encoder_; }
  const HeadBank& heads() const { return heads_; }

  /// Encoder parameters followed by head parameters, fixed order.
  std::vector<NamedParameter> parameters() const;

  /// Raw scores [1 x 6] for one essay, differentiable.
  Tensor forward(const EncodedText& text, DropoutStream* dropout = nullptr) const;

  /// Inference without graph recording. Raw, unclamped.
  Scores predict(const EncodedText& text) const;

  Model clone() const;

 private:
  ModelSpec spec_;
  EncoderState encoder_;
  HeadBank heads_;
};

/// Values of every parameter, in parameters() order.
std::vector<std::vector<double>> parameter_values(const Model& model);
void set_parameter_values(Model& model, const std::vector<std::vector<double>>& values);

}  // namespace essayscore
