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

#include "essayscore/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "essayscore/csv.hpp"
#include "essayscore/error.hpp"
#include "essayscore/numfmt.hpp"

namespace essayscore {

namespace {

struct ColumnMap {
  std::size_t text_id = 0;
  std::size_t full_text = 0;
  std::optional<std::array<std::size_t, kTargetCount>> scores;
};

std::optional<std::size_t> find_column(const CsvRow& header, std::string_view name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  return std::nullopt;
}

ColumnMap map_columns(const CsvRow& header, std::string_view source, bool scores_required) {
  ColumnMap m;
  auto required = [&](std::string_view name) {
    auto idx = find_column(header, name);
    if (!idx) {
      throw SchemaError(std::string(source) + ": missing required column '" + std::string(name) + "'");
    }
    return *idx;
  };
  m.text_id = required("text_id");
  if (!scores_required) m.full_text = required("full_text");

  std::array<std::optional<std::size_t>, kTargetCount> found;
  bool any = false;
  for (std::size_t j = 0; j < kTargetCount; ++j) {
    found[j] = find_column(header, kTargetNames[j]);
    any |= found[j].has_value();
  }
  if (any || scores_required) {
    std::array<std::size_t, kTargetCount> cols{};
    for (std::size_t j = 0; j < kTargetCount; ++j) {
      if (!found[j]) {
        throw SchemaError(std::string(source) + ": missing required column '" +
                          std::string(kTargetNames[j]) + "'");
      }
      cols[j] = *found[j];
    }
    m.scores = cols;
  }
  return m;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

std::vector<EssayRecord> read_records(std::istream& in, std::string_view source) {
  const CsvTable table = read_csv(in, source);
  std::vector<EssayRecord> records;
  if (table.header.empty()) {
    throw SchemaError(std::string(source) + ": missing required column 'text_id'");
  }
  const ColumnMap cols = map_columns(table.header, source, false);
  records.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const CsvRow& row = table.rows[r];
    EssayRecord rec;
    rec.text_id = row[cols.text_id];
    rec.full_text = row[cols.full_text];
    if (rec.full_text.empty()) {
      throw ValidationError(std::string(source) + ": record '" + rec.text_id + "' (row " +
                            std::to_string(r + 2) + ") has empty full_text");
    }
    if (cols.scores) {
      std::size_t empty_cells = 0;
      for (auto c : *cols.scores) empty_cells += row[c].empty() ? 1 : 0;
      if (empty_cells == kTargetCount) {
        // unlabeled
      } else if (empty_cells != 0) {
        throw ValidationError(std::string(source) + ": record '" + rec.text_id +
                              "' has some but not all score cells filled");
      } else {
        Scores s{};
        for (std::size_t j = 0; j < kTargetCount; ++j) {
          const std::string what = std::string(kTargetNames[j]) + " of record '" + rec.text_id + "'";
          s[j] = parse_double(row[(*cols.scores)[j]], what);
          if (!on_score_lattice(s[j])) {
            throw ValidationError(std::string(source) + ": record '" + rec.text_id + "' has " +
                                  std::string(kTargetNames[j]) + " = " + row[(*cols.scores)[j]] +
                                  ", not on the 1.0..5.0 half-point lattice");
          }
        }
        rec.scores = s;
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<EssayRecord> load_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_records(in, path.string());
}

void write_records(std::ostream& out, std::span<const EssayRecord> records) {
  const bool labeled = std::any_of(records.begin(), records.end(),
                                   [](const EssayRecord& r) { return r.scores.has_value(); });
  CsvRow header{"text_id", "full_text"};
  if (labeled) {
    for (auto name : kTargetNames) header.emplace_back(name);
  }
  write_csv_row(out, header);
  for (const auto& r : records) {
    CsvRow row{r.text_id, r.full_text};
    if (labeled) {
      for (std::size_t j = 0; j < kTargetCount; ++j) {
        row.push_back(r.scores ? format_double((*r.scores)[j]) : std::string());
      }
    }
    write_csv_row(out, row);
  }
}

void write_csv(const std::filesystem::path& path, std::span<const EssayRecord> records) {
  auto out = open_output(path);
  write_records(out, records);
}

void write_predictions(std::ostream& out, std::span<const std::string> text_ids,
                       std::span<const Scores> predictions) {
  if (text_ids.size() != predictions.size()) {
    throw ContractError("write_predictions: id/prediction count mismatch");
  }
  CsvRow header{"text_id"};
  for (auto name : kTargetNames) header.emplace_back(name);
  write_csv_row(out, header);
  for (std::size_t i = 0; i < text_ids.size(); ++i) {
    CsvRow row{text_ids[i]};
    for (double v : predictions[i]) row.push_back(format_double(v));
    write_csv_row(out, row);
  }
}

void write_predictions(const std::filesystem::path& path, std::span<const std::string> text_ids,
                       std::span<const Scores> predictions) {
  auto out = open_output(path);
  write_predictions(out, text_ids, predictions);
}

std::vector<std::pair<std::string, Scores>> load_score_table(const std::filesystem::path& path) {
  auto in = open_input(path);
  const std::string source = path.string();
  const CsvTable table = read_csv(in, source);
  if (table.header.empty()) throw SchemaError(source + ": missing required column 'text_id'");
  const ColumnMap cols = map_columns(table.header, source, true);
  std::vector<std::pair<std::string, Scores>> out;
  for (const auto& row : table.rows) {
    Scores s{};
    for (std::size_t j = 0; j < kTargetCount; ++j) {
      s[j] = parse_double(row[(*cols.scores)[j]],
                          std::string(kTargetNames[j]) + " of record '" + row[cols.text_id] + "'");
    }
    out.emplace_back(row[cols.text_id], s);
  }
  return out;
}

// ---- tokenizer -----------------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  icu::UnicodeString raw =
      icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString normalized;
  if (U_SUCCESS(status)) {
    normalized = nfc->normalize(raw, status);
  }
  if (U_FAILURE(status)) normalized = raw;
  normalized.toLower(icu::Locale::getRoot());

  std::vector<std::string> tokens;
  icu::UnicodeString word;
  auto flush = [&] {
    if (!word.isEmpty()) {
      std::string utf8;
      word.toUTF8String(utf8);
      tokens.push_back(std::move(utf8));
      word.remove();
    }
  };
  for (int32_t i = 0; i < normalized.length(); i = normalized.moveIndex32(i, 1)) {
    const UChar32 c = normalized.char32At(i);
    if (u_isUWhiteSpace(c) || u_isspace(c)) {
      flush();
    } else if (u_isalnum(c) || (U_GET_GC_MASK(c) & U_GC_M_MASK) != 0) {
      word.append(c);
    } else {
      flush();
      icu::UnicodeString single(c);
      std::string utf8;
      single.toUTF8String(utf8);
      tokens.push_back(std::move(utf8));
    }
  }
  flush();
  return tokens;
}

// ---- vocabulary ------------------------------------------------------------------

Vocabulary Vocabulary::build(std::span<const EssayRecord> records, std::size_t min_count) {
  if (records.empty()) throw InputError("cannot build a vocabulary from zero records");
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) {
    for (auto& t : tokenize(r.full_text)) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [token, count] : counts) {
    if (count >= min_count) kept.emplace_back(token, count);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [token, count] : kept) tokens.push_back(token);
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    auto [it, inserted] = v.index_.emplace(v.tokens_[i], static_cast<std::int32_t>(i + kReserved));
    if (!inserted) throw InputError("duplicate vocabulary token '" + v.tokens_[i] + "'");
  }
  return v;
}

std::int32_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknownId : it->second;
}

EncodedText Vocabulary::encode(std::string_view text, std::size_t max_len) const {
  EncodedText out;
  for (const auto& t : tokenize(text)) {
    if (out.ids.size() >= max_len) break;
    out.ids.push_back(id(t));
  }
  if (out.ids.empty()) out.ids.push_back(kUnknownId);
  out.mask.assign(out.ids.size(), 1);
  return out;
}

}  // namespace essayscore
