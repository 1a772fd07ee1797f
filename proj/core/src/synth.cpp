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

#include "essayscore/synth.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <string>
#include <unordered_map>

namespace essayscore {

namespace {

using Words = std::vector<std::string_view>;

const std::array<Words, kTargetCount>& marker_lists() {
  static const std::array<Words, kTargetCount> lists = {{
      {"however", "therefore", "moreover", "furthermore", "consequently", "additionally",
       "meanwhile", "nevertheless"},
      {"although", "whereas", "unless", "whenever", "because", "since", "while", "though"},
      {"significant", "beneficial", "crucial", "substantial", "essential", "remarkable",
       "diverse", "comprehensive"},
      {"very", "really", "stuff", "things", "kinda", "basically", "totally", "lots"},
      {"goed", "thinked", "buyed", "writed", "maked", "teached", "bringed", "runned"},
      {"becuase", "alot", "definately", "recieve", "beleive", "untill", "thier", "wich"},
  }};
  return lists;
}

const Words kSubjects = {"students", "teachers", "people", "parents", "we", "they", "i", "kids"};
const Words kVerbs = {"learn", "study", "need", "like", "help", "want", "enjoy", "choose"};
const Words kAdjectives = {"good", "bad", "big", "important", "hard", "easy", "nice", "new"};
const Words kObjects = {"homework", "school", "time", "friends", "classes",
                        "books",    "sports", "projects", "technology", "money"};

enum Target : std::size_t { kCohesion, kSyntax, kVocabulary, kPhraseology, kGrammar, kConventions };

std::string_view pick(const Words& words, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, words.size() - 1);
  return words[d(rng)];
}

bool chance(double p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < p;
}

// Chance that one marker slot is filled, for a level in [0, 1].
double marker_probability(double level) { return 0.1 + 0.7 * level; }

struct Levels {
  std::array<double, kTargetCount> value{};
};

Levels draw_levels(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double proficiency = u(rng);
  Levels l;
  for (auto& v : l.value) v = std::clamp(0.5 * proficiency + 0.5 * u(rng), 0.0, 1.0);
  return l;
}

std::vector<std::string_view> make_sentence(const Levels& lv, std::mt19937_64& rng) {
  const auto& markers = marker_lists();
  std::vector<std::string_view> s;
  if (chance(marker_probability(lv.value[kCohesion]), rng)) {
    s.push_back(pick(markers[kCohesion], rng));
    s.push_back(",");
  }
  s.push_back(pick(kSubjects, rng));
  s.push_back(chance(marker_probability(1.0 - lv.value[kGrammar]), rng) ? pick(markers[kGrammar], rng)
                                                                         : pick(kVerbs, rng));
  if (chance(marker_probability(1.0 - lv.value[kPhraseology]), rng)) s.push_back(pick(markers[kPhraseology], rng));
  s.push_back(chance(marker_probability(lv.value[kVocabulary]), rng) ? pick(markers[kVocabulary], rng)
                                                       : pick(kAdjectives, rng));
  s.push_back(chance(marker_probability(1.0 - lv.value[kConventions]), rng) ? pick(markers[kConventions], rng)
                                                                : pick(kObjects, rng));
  if (chance(marker_probability(lv.value[kSyntax]), rng)) {
    s.push_back(pick(markers[kSyntax], rng));
    s.push_back(pick(kSubjects, rng));
    s.push_back(pick(kVerbs, rng));
    s.push_back(pick(kObjects, rng));
  }
  s.push_back(".");
  return s;
}

std::string render(const std::vector<std::vector<std::string_view>>& sentences) {
  std::string text;
  for (const auto& sentence : sentences) {
    for (std::size_t i = 0; i < sentence.size(); ++i) {
      const auto w = sentence[i];
      const bool punct = w == "," || w == ".";
      if (!text.empty() && !punct) text.push_back(' ');
      std::string word(w);
      if (i == 0 || word == "i") word[0] = static_cast<char>(std::toupper(word[0]));
      text += word;
    }
  }
  return text;
}

}  // namespace

std::span<const std::string_view> marker_words(std::size_t target) { return marker_lists().at(target); }

TextStatistics measure_text(std::string_view text) {
  static const std::unordered_map<std::string_view, std::size_t> lookup = [] {
    std::unordered_map<std::string_view, std::size_t> m;
    for (std::size_t j = 0; j < kTargetCount; ++j)
      for (auto w : marker_lists()[j]) m.emplace(w, j);
    return m;
  }();
  TextStatistics stats;
  const auto tokens = tokenize(text);
  stats.n_tokens = tokens.size();
  for (const auto& t : tokens) {
    auto it = lookup.find(t);
    if (it != lookup.end()) ++stats.marker_counts[it->second];
  }
  for (std::size_t j = 0; j < kTargetCount; ++j) {
    stats.marker_rates[j] =
        stats.n_tokens == 0 ? 0.0
                            : static_cast<double>(stats.marker_counts[j]) / static_cast<double>(stats.n_tokens);
  }
  return stats;
}

Scores synthetic_scores(const TextStatistics& stats) {
  Scores s{};
  for (std::size_t j = 0; j < kTargetCount; ++j) {
    const double x = std::min(stats.marker_rates[j] / kMarkerRateCap, 1.0);
    const bool more_is_better = j == kCohesion || j == kSyntax || j == kVocabulary;
    const double raw = more_is_better ? 1.0 + 4.0 * x : 5.0 - 4.0 * x;
    s[j] = std::clamp(std::round(2.0 * raw) / 2.0, kScoreMin, kScoreMax);
  }
  return s;
}

std::vector<EssayRecord> synth_corpus(std::size_t n, std::uint64_t seed, const SynthParams& params) {
  std::mt19937_64 rng(seed);
  std::vector<EssayRecord> out;
  out.reserve(n);
  const std::size_t lo = std::max<std::size_t>(1, params.min_sentences);
  const std::size_t hi = std::max(lo, params.max_sentences);
  for (std::size_t i = 0; i < n; ++i) {
    const Levels lv = draw_levels(rng);
    std::uniform_int_distribution<std::size_t> n_sent(lo, hi);
    const std::size_t target = n_sent(rng);
    std::vector<std::vector<std::string_view>> sentences;
    std::size_t n_tokens = 0;
    for (std::size_t k = 0; k < target; ++k) {
      auto sentence = make_sentence(lv, rng);
      if (!sentences.empty() && n_tokens + sentence.size() > params.max_tokens) break;
      n_tokens += sentence.size();
      sentences.push_back(std::move(sentence));
    }
    EssayRecord rec;
    std::string id = std::to_string(i);
    rec.text_id = "synth" + std::string(id.size() < 5 ? 5 - id.size() : 0, '0') + id;
    rec.full_text = render(sentences);
    rec.scores = synthetic_scores(measure_text(rec.full_text));
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace essayscore
