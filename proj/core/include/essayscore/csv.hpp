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

// RFC-4180 CSV: comma separated, double-quote quoting with "" escapes,
// quoted fields may span lines. Reader accepts LF or CRLF; writer emits CRLF.

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace essayscore {

using CsvRow = std::vector<std::string>;

struct CsvTable {
  CsvRow header;
  std::vector<CsvRow> rows;
  /// 1-based physical line where each row starts (header is line 1).
  std::vector<std::size_t> row_lines;
};

/// Parses a whole stream. Throws InputError naming `source` and the row
/// number for unterminated quotes, stray quotes or ragged rows.
CsvTable read_csv(std::istream& in, std::string_view source = "<stream>");

void write_csv_row(std::ostream& out, const CsvRow& row);
std::string csv_escape(std::string_view field);

}  // namespace essayscore
