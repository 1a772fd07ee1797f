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

#include "essayscore/model.hpp"

#include "essayscore/error.hpp"

namespace essayscore {

Model::Model(ModelSpec spec, EncoderState encoder, HeadBank heads)
    : spec_(std::move(spec)), encoder_(std::move(encoder)), heads_(std::move(heads)) {
  spec_.validate();
}

Model Model::init(const ModelSpec& spec, std::uint64_t seed) {
  return Model(spec, init_encoder(spec, seed), init_heads(spec, seed));
}

std::vector<NamedParameter> Model::parameters() const {
  auto params = encoder_.parameters();
  auto head_params = heads_.parameters();
  params.insert(params.end(), head_params.begin(), head_params.end());
  return params;
}

Tensor Model::forward(const EncodedText& text, DropoutStream* dropout) const {
  Tensor hidden = encode(encoder_, spec_, text.ids, text.mask, dropout);
  return head_scores(heads_, hidden, text.mask);
}

Scores Model::predict(const EncodedText& text) const {
  NoGradGuard no_grad;
  Tensor out = forward(text, nullptr);
  Scores s{};
  for (std::size_t j = 0; j < kTargetCount; ++j) s[j] = out.at(j);
  return s;
}

Model Model::clone() const { return Model(spec_, essayscore::clone(encoder_), essayscore::clone(heads_)); }

std::vector<std::vector<double>> parameter_values(const Model& model) {
  std::vector<std::vector<double>> out;
  for (const auto& p : model.parameters()) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

void set_parameter_values(Model& model, const std::vector<std::vector<double>>& values) {
  auto params = model.parameters();
  if (params.size() != values.size()) {
    throw ContractError("set_parameter_values: " + std::to_string(values.size()) +
                        " buffers for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_data();
    if (dst.size() != values[i].size()) {
      throw DimensionError("set_parameter_values: size mismatch for " + params[i].path);
    }
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

}  // namespace essayscore
