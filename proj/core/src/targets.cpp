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

#include "essayscore/targets.hpp"

#include <cmath>

namespace essayscore {

std::optional<std::size_t> lattice_index(double score) {
  if (!std::isfinite(score)) return std::nullopt;
  const double steps = (score - kScoreMin) / kScoreStep;
  const double nearest = std::round(steps);
  if (std::abs(steps - nearest) * kScoreStep > 1e-9) return std::nullopt;
  if (nearest < 0.0 || nearest > static_cast<double>(kLatticeSize - 1)) return std::nullopt;
  return static_cast<std::size_t>(nearest);
}

std::optional<std::size_t> target_index(std::string_view name) {
  for (std::size_t j = 0; j < kTargetCount; ++j) {
    if (kTargetNames[j] == name) return j;
  }
  return std::nullopt;
}

}  // namespace essayscore
