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

// Checkpoint container (format version 1). Layout, all text lines end in '\n':
//
//   essayscore-checkpoint 1
//   model.<field> <value>            one line per ModelSpec field
//   vocab <count>
//   <token>                          count lines, ids 2, 3, ... in order
//   params <count>
//   param <path> <rank> <d0> ... <dN-1>
//   <8 * prod(dims) bytes>           IEEE-754 float64, little-endian
//   ...                              (param line + payload repeated)
//   end
//
// Round trips are bit-exact.

#include <filesystem>
#include <istream>
#include <ostream>

#include "essayscore/corpus.hpp"
#include "essayscore/model.hpp"

namespace essayscore {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  Vocabulary vocab;
};

void write_checkpoint(std::ostream& out, const Model& model, const Vocabulary& vocab);
void save_checkpoint(const std::filesystem::path& path, const Model& model, const Vocabulary& vocab);

/// Throws InputError on bad magic, version, truncated payloads or
/// parameter paths/shapes that do not match the stored ModelSpec.
Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace essayscore
