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

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace essayscore {

inline constexpr std::size_t kTargetCount = 6;

/// Column order used everywhere: CSV headers, prediction vectors, head paths.
inline constexpr std::array<std::string_view, kTargetCount> kTargetNames = {
    "cohesion", "syntax", "vocabulary", "phraseology", "grammar", "conventions"};

using Scores = std::array<double, kTargetCount>;

inline constexpr double kScoreMin = 1.0;
inline constexpr double kScoreMax = 5.0;
inline constexpr double kScoreStep = 0.5;
/// 1.0, 1.5, ..., 5.0
inline constexpr std::size_t kLatticeSize = 9;

/// Index 0..8 of a score on the half-point lattice, or nullopt if the value
/// is off-lattice (tolerance 1e-9) or outside [1, 5].
std::optional<std::size_t> lattice_index(double score);

inline bool on_score_lattice(double score) { return lattice_index(score).has_value(); }

std::optional<std::size_t> target_index(std::string_view name);

}  // namespace essayscore
