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
#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "essayscore/model.hpp"
#include "essayscore/targets.hpp"

namespace essayscore {

/// One essay and, when labeled, its six analytic scores on the 0.5 lattice.
struct EssayRecord {
  std::string text_id;
  std::string full_text;
  std::optional<Scores> scores;

  bool operator==(const EssayRecord&) const = default;
};

/// Reads records from CSV. Required columns: text_id, full_text. The six
/// score columns are optional as a group (any order); a record with all six
/// cells empty is unlabeled.
std::vector<EssayRecord> load_csv(const std::filesystem::path& path);
std::vector<EssayRecord> read_records(std::istream& in, std::string_view source = "<stream>");

/// Writes text_id, full_text and, if any record is labeled, the six scores.
void write_csv(const std::filesystem::path& path, std::span<const EssayRecord> records);
void write_records(std::ostream& out, std::span<const EssayRecord> records);

/// text_id plus one column per target, target order.
void write_predictions(const std::filesystem::path& path, std::span<const std::string> text_ids,
                       std::span<const Scores> predictions);
void write_predictions(std::ostream& out, std::span<const std::string> text_ids,
                       std::span<const Scores> predictions);

/// Reads a prediction/score CSV (text_id + six target columns, labels
/// required) without lattice validation. Used for scoring predictions.
std::vector<std::pair<std::string, Scores>> load_score_table(const std::filesystem::path& path);

/// NFC-normalises and lowercases, then splits on whitespace. Letters, digits
/// and combining marks form word tokens; every other character is its own
/// token. Never fails: invalid UTF-8 becomes U+FFFD.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  static constexpr std::int32_t kPadId = 0;
  static constexpr std::int32_t kUnknownId = 1;
  static constexpr std::size_t kReserved = 2;

  Vocabulary() = default;

  /// Tokens with count >= min_count, ordered by descending count then
  /// lexicographically; ids start at 2.
  static Vocabulary build(std::span<const EssayRecord> records, std::size_t min_count = 1);
  /// Rebuilds from tokens already in id order (ids 2, 3, ...).
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::int32_t id(std::string_view token) const;
  /// Total id space including the two reserved ids.
  std::size_t size() const { return tokens_.size() + kReserved; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// Token ids truncated to the first `max_len` tokens, all positions
  /// unmasked. Text with no tokens encodes as a single unknown id.
  EncodedText encode(std::string_view text, std::size_t max_len) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

}  // namespace essayscore
