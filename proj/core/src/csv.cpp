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

#include "essayscore/csv.hpp"

#include <iterator>

#include "essayscore/error.hpp"

namespace essayscore {

CsvTable read_csv(std::istream& in, std::string_view source) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  CsvTable table;
  std::vector<CsvRow> rows;
  std::vector<std::size_t> lines;

  std::size_t line = 1;
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto fail = [&](std::size_t row_number, const std::string& what) -> void {
    throw InputError(std::string(source) + ": malformed CSV at row " + std::to_string(row_number) +
                     " (line " + std::to_string(line) + "): " + what);
  };

  // Skip a UTF-8 byte order mark.
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) i = 3;

  while (i < n) {
    CsvRow row;
    const std::size_t row_line = line;
    const std::size_t row_number = rows.size() + 1;
    bool end_of_row = false;
    while (!end_of_row) {
      std::string field;
      if (i < n && text[i] == '"') {
        ++i;
        bool closed = false;
        while (i < n) {
          char c = text[i];
          if (c == '"') {
            if (i + 1 < n && text[i + 1] == '"') {
              field.push_back('"');
              i += 2;
            } else {
              ++i;
              closed = true;
              break;
            }
          } else {
            if (c == '\n') ++line;
            field.push_back(c);
            ++i;
          }
        }
        if (!closed) fail(row_number, "unterminated quoted field");
        if (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
          fail(row_number, "unexpected character after closing quote");
        }
      } else {
        while (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r') {
          if (text[i] == '"') fail(row_number, "quote inside unquoted field");
          field.push_back(text[i]);
          ++i;
        }
      }
      row.push_back(std::move(field));
      if (i >= n) {
        end_of_row = true;
      } else if (text[i] == ',') {
        ++i;
      } else {
        if (text[i] == '\r') {
          ++i;
          if (i < n && text[i] == '\n') ++i;
        } else {
          ++i;
        }
        ++line;
        end_of_row = true;
      }
    }
    // A blank physical line parses as a single empty field; skip it.
    if (row.size() == 1 && row.front().empty()) continue;
    rows.push_back(std::move(row));
    lines.push_back(row_line);
  }

  if (rows.empty()) return table;
  table.header = std::move(rows.front());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != table.header.size()) {
      throw InputError(std::string(source) + ": malformed CSV at row " + std::to_string(r + 1) +
                       " (line " + std::to_string(lines[r]) + "): expected " +
                       std::to_string(table.header.size()) + " fields, found " +
                       std::to_string(rows[r].size()));
    }
    table.rows.push_back(std::move(rows[r]));
    table.row_lines.push_back(lines[r]);
  }
  return table;
}

std::string csv_escape(std::string_view field) {
  const bool needs_quotes = field.find_first_of(",\"\r\n") != std::string_view::npos ||
                            (!field.empty() && (field.front() == ' ' || field.back() == ' '));
  if (!needs_quotes) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_csv_row(std::ostream& out, const CsvRow& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(row[i]);
  }
  out << "\r\n";
}

}  // namespace essayscore
