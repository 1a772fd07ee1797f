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
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "essayscore/corpus.hpp"
#include "essayscore/targets.hpp"

namespace essayscore {

struct FoldAudit {
  std::size_t size = 0;
  Scores target_mean{};
  /// counts[target][lattice index]
  std::array<std::array<std::size_t, kLatticeSize>, kTargetCount> lattice_counts{};
};

/// Assignment of records (by position) to k folds, with balance statistics.
struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> fold_of;
  std::vector<std::string> record_ids;
  std::vector<FoldAudit> audit;
  Scores global_mean{};

  std::vector<std::size_t> members(std::size_t fold) const;
  std::vector<std::size_t> complement(std::size_t fold) const;
  /// max over folds and targets of |fold mean - global mean|.
  double max_mean_deviation() const;
};

/// Multilabel iterative stratification over the 6 x 9 (target, lattice
/// value) indicators. Repeatedly takes the indicator with the fewest
/// unassigned records and deals those records, in seeded order, to the fold
/// with the largest remaining demand for that indicator; ties go to the
/// fold with the largest remaining overall demand, then to a seeded fold
/// priority. A final pass of size-preserving pairwise swaps then lowers the
/// squared imbalance of per-fold score sums and indicator counts.
FoldPlan stratified_kfold(std::span<const EssayRecord> records, std::size_t k, std::uint64_t seed);

/// Seeded shuffle dealt round-robin; the unstratified baseline.
FoldPlan random_kfold(std::span<const EssayRecord> records, std::size_t k, std::uint64_t seed);

/// Recomputes `audit` and `global_mean` from `fold_of`.
void audit_folds(FoldPlan& plan, std::span<const EssayRecord> records);

/// CSV: text_id,fold
void write_fold_plan(std::ostream& out, const FoldPlan& plan);
/// CSV: fold,size,mean_<target>...,count_<target>_<value>...
void write_fold_audit(std::ostream& out, const FoldPlan& plan);

}  // namespace essayscore
