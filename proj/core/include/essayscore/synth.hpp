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

// Seeded synthetic essay generator.
//
// Essays are built from a small sentence template. Six disjoint marker word
// classes carry the signal, one per target:
//
//   cohesion     connectives    (however, therefore, ...)     more is better
//   syntax       subordinators  (although, whereas, ...)      more is better
//   vocabulary   advanced words (significant, crucial, ...)   more is better
//   phraseology  filler words   (very, really, stuff, ...)    more is worse
//   grammar      bad verb forms (goed, thinked, ...)          more is worse
//   conventions  misspellings   (becuase, alot, ...)          more is worse
//
// Scores are then measured from the generated text itself: with
// rate = marker tokens / all tokens (tokenize() semantics) and
// x = min(rate / kMarkerRateCap, 1),
//
//   score = 1 + 4x  (more is better)    score = 5 - 4x  (more is worse)
//
// rounded to the nearest 0.5. The score of a synthetic essay is therefore a
// deterministic function of its text.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "essayscore/corpus.hpp"

namespace essayscore {

struct SynthParams {
  std::size_t min_sentences = 4;
  std::size_t max_sentences = 7;
  /// Sentences are dropped once the essay would exceed this many tokens.
  std::size_t max_tokens = 90;
};

inline constexpr double kMarkerRateCap = 0.10;

struct TextStatistics {
  std::size_t n_tokens = 0;
  std::array<std::size_t, kTargetCount> marker_counts{};
  std::array<double, kTargetCount> marker_rates{};
};

std::span<const std::string_view> marker_words(std::size_t target);

TextStatistics measure_text(std::string_view text);

/// The fixed statistics -> scores mapping described above.
Scores synthetic_scores(const TextStatistics& stats);

std::vector<EssayRecord> synth_corpus(std::size_t n, std::uint64_t seed,
                                      const SynthParams& params = {});

}  // namespace essayscore
