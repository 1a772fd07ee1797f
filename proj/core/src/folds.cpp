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

#include "essayscore/folds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "essayscore/csv.hpp"
#include "essayscore/error.hpp"
#include "essayscore/numfmt.hpp"

namespace essayscore {

namespace {

constexpr std::size_t kIndicatorCount = kTargetCount * kLatticeSize;

std::array<std::size_t, kTargetCount> indicators_of(const EssayRecord& r) {
  std::array<std::size_t, kTargetCount> out{};
  for (std::size_t j = 0; j < kTargetCount; ++j) {
    auto idx = lattice_index((*r.scores)[j]);
    if (!idx) {
      throw ValidationError("record '" + r.text_id + "' has off-lattice " +
                            std::string(kTargetNames[j]) + " score");
    }
    out[j] = j * kLatticeSize + *idx;
  }
  return out;
}

void check_inputs(std::span<const EssayRecord> records, std::size_t k) {
  if (k < 2) throw InputError("k-fold split needs k >= 2, got " + std::to_string(k));
  if (records.size() < k) {
    throw InputError("k-fold split needs at least k records: k = " + std::to_string(k) + ", n = " +
                     std::to_string(records.size()));
  }
  for (const auto& r : records) {
    if (!r.scores) throw InputError("record '" + r.text_id + "' is unlabeled; folds need labels");
  }
}

FoldPlan empty_plan(std::span<const EssayRecord> records, std::size_t k) {
  FoldPlan plan;
  plan.k = k;
  plan.fold_of.assign(records.size(), 0);
  for (const auto& r : records) plan.record_ids.push_back(r.text_id);
  return plan;
}

// Pairwise swaps between folds that lower the squared imbalance of fold
// score sums and (target, lattice value) counts. Swaps keep fold sizes.
void refine_by_swaps(std::span<const EssayRecord> records,
                     const std::vector<std::array<std::size_t, kTargetCount>>& labels, std::vector<std::size_t>& fold_of,
                     std::size_t k, const std::vector<std::size_t>& order) {
  const std::size_t n = records.size();
  std::vector<double> size(k, 0.0);
  std::array<double, kTargetCount> global{};
  std::vector<double> global_count(kIndicatorCount, 0.0);
  std::vector<std::array<double, kTargetCount>> sums(k, std::array<double, kTargetCount>{});
  std::vector<std::vector<double>> counts(k, std::vector<double>(kIndicatorCount, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& sc = *records[i].scores;
    size[fold_of[i]] += 1.0;
    for (std::size_t j = 0; j < kTargetCount; ++j) {
      sums[fold_of[i]][j] += sc[j];
      global[j] += sc[j] / static_cast<double>(n);
      counts[fold_of[i]][labels[i][j]] += 1.0;
      global_count[labels[i][j]] += 1.0 / static_cast<double>(n);
    }
  }
  // Excess of a fold over its proportional share.
  auto sum_excess = [&](std::size_t f, std::size_t j) { return sums[f][j] - size[f] * global[j]; };
  auto count_excess = [&](std::size_t f, std::size_t l) { return counts[f][l] - size[f] * global_count[l]; };

  constexpr std::size_t kMaxPasses = 50;
  for (std::size_t pass = 0; pass < kMaxPasses; ++pass) {
    bool improved = false;
    for (std::size_t x = 0; x < n; ++x) {
      for (std::size_t y = x + 1; y < n; ++y) {
        const std::size_t i = order[x];
        const std::size_t r = order[y];
        const std::size_t a = fold_of[i];
        const std::size_t b = fold_of[r];
        if (a == b) continue;
        const auto& si = *records[i].scores;
        const auto& sr = *records[r].scores;
        // Moving r into a and i into b shifts a by d and b by -d.
        double change = 0.0;
        for (std::size_t j = 0; j < kTargetCount; ++j) {
          const double d = sr[j] - si[j];
          change += 2.0 * d * (sum_excess(a, j) - sum_excess(b, j)) + 2.0 * d * d;
          const std::size_t li = labels[i][j];
          const std::size_t lr = labels[r][j];
          if (li != lr) {
            change += 2.0 * (count_excess(a, lr) - count_excess(b, lr)) + 2.0;
            change += -2.0 * (count_excess(a, li) - count_excess(b, li)) + 2.0;
          }
        }
        if (change >= -1e-9) continue;
        for (std::size_t j = 0; j < kTargetCount; ++j) {
          const double d = sr[j] - si[j];
          sums[a][j] += d;
          sums[b][j] -= d;
          counts[a][labels[i][j]] -= 1.0;
          counts[a][labels[r][j]] += 1.0;
          counts[b][labels[r][j]] -= 1.0;
          counts[b][labels[i][j]] += 1.0;
        }
        fold_of[i] = b;
        fold_of[r] = a;
        improved = true;
      }
    }
    if (!improved) break;
  }
}

}  // namespace

std::vector<std::size_t> FoldPlan::members(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::complement(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != fold) out.push_back(i);
  return out;
}

double FoldPlan::max_mean_deviation() const {
  double worst = 0.0;
  for (const auto& a : audit) {
    if (a.size == 0) continue;
    for (std::size_t j = 0; j < kTargetCount; ++j)
      worst = std::max(worst, std::abs(a.target_mean[j] - global_mean[j]));
  }
  return worst;
}

void audit_folds(FoldPlan& plan, std::span<const EssayRecord> records) {
  plan.audit.assign(plan.k, FoldAudit{});
  plan.global_mean = {};
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& a = plan.audit.at(plan.fold_of[i]);
    ++a.size;
    const auto& s = *records[i].scores;
    for (std::size_t j = 0; j < kTargetCount; ++j) {
      a.target_mean[j] += s[j];
      plan.global_mean[j] += s[j];
      if (auto idx = lattice_index(s[j])) ++a.lattice_counts[j][*idx];
    }
  }
  for (auto& a : plan.audit) {
    if (a.size == 0) continue;
    for (auto& m : a.target_mean) m /= static_cast<double>(a.size);
  }
  for (auto& m : plan.global_mean) m /= static_cast<double>(records.size());
}

FoldPlan stratified_kfold(std::span<const EssayRecord> records, std::size_t k, std::uint64_t seed) {
  check_inputs(records, k);
  const std::size_t n = records.size();
  std::mt19937_64 rng(seed);

  std::vector<std::array<std::size_t, kTargetCount>> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = indicators_of(records[i]);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  // remaining[l]: unassigned records carrying indicator l.
  std::vector<std::size_t> remaining(kIndicatorCount, 0);
  for (const auto& ls : labels)
    for (auto l : ls) ++remaining[l];

  const double share = 1.0 / static_cast<double>(k);
  std::vector<double> demand(k, static_cast<double>(n) * share);
  std::vector<std::vector<double>> label_demand(k, std::vector<double>(kIndicatorCount));
  for (std::size_t f = 0; f < k; ++f)
    for (std::size_t l = 0; l < kIndicatorCount; ++l)
      label_demand[f][l] = static_cast<double>(remaining[l]) * share;

  FoldPlan plan = empty_plan(records, k);
  std::vector<bool> assigned(n, false);
  std::size_t left = n;
  std::vector<std::size_t> ties;

  while (left > 0) {
    std::size_t rarest = kIndicatorCount;
    for (std::size_t l = 0; l < kIndicatorCount; ++l) {
      if (remaining[l] > 0 && (rarest == kIndicatorCount || remaining[l] < remaining[rarest])) rarest = l;
    }
    for (std::size_t i : order) {
      if (assigned[i]) continue;
      const auto& ls = labels[i];
      if (std::find(ls.begin(), ls.end(), rarest) == ls.end()) continue;

      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t f = 0; f < k; ++f) best = std::max(best, label_demand[f][rarest]);
      ties.clear();
      for (std::size_t f = 0; f < k; ++f)
        if (label_demand[f][rarest] == best) ties.push_back(f);
      if (ties.size() > 1) {
        double most = -std::numeric_limits<double>::infinity();
        for (auto f : ties) most = std::max(most, demand[f]);
        std::erase_if(ties, [&](std::size_t f) { return demand[f] != most; });
      }
      std::size_t fold = ties.front();
      if (ties.size() > 1) {
        std::uniform_int_distribution<std::size_t> pick(0, ties.size() - 1);
        fold = ties[pick(rng)];
      }

      plan.fold_of[i] = fold;
      assigned[i] = true;
      --left;
      demand[fold] -= 1.0;
      for (auto l : ls) {
        label_demand[fold][l] -= 1.0;
        --remaining[l];
      }
    }
  }
  refine_by_swaps(records, labels, plan.fold_of, k, order);
  audit_folds(plan, records);
  return plan;
}

FoldPlan random_kfold(std::span<const EssayRecord> records, std::size_t k, std::uint64_t seed) {
  check_inputs(records, k);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  FoldPlan plan = empty_plan(records, k);
  for (std::size_t pos = 0; pos < order.size(); ++pos) plan.fold_of[order[pos]] = pos % k;
  audit_folds(plan, records);
  return plan;
}

void write_fold_plan(std::ostream& out, const FoldPlan& plan) {
  write_csv_row(out, {"text_id", "fold"});
  for (std::size_t i = 0; i < plan.fold_of.size(); ++i) {
    write_csv_row(out, {plan.record_ids[i], std::to_string(plan.fold_of[i])});
  }
}

void write_fold_audit(std::ostream& out, const FoldPlan& plan) {
  CsvRow header{"fold", "size"};
  for (auto name : kTargetNames) header.push_back("mean_" + std::string(name));
  for (auto name : kTargetNames)
    for (std::size_t v = 0; v < kLatticeSize; ++v)
      header.push_back("count_" + std::string(name) + "_" + format_double(kScoreMin + kScoreStep * v));
  write_csv_row(out, header);
  for (std::size_t f = 0; f < plan.audit.size(); ++f) {
    const auto& a = plan.audit[f];
    CsvRow row{std::to_string(f), std::to_string(a.size)};
    for (double m : a.target_mean) row.push_back(format_double(m));
    for (const auto& counts : a.lattice_counts)
      for (auto c : counts) row.push_back(std::to_string(c));
    write_csv_row(out, row);
  }
}

}  // namespace essayscore
