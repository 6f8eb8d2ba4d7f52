#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <vector>

#include "spoc/dataset.hpp"
#include "spoc/error.hpp"
#include "spoc/resampler.hpp"
#include "spoc/seed.hpp"

namespace support {

template <class F>
std::optional<spoc::ErrorCode> error_code_of(F&& fn) {
  try {
    fn();
  } catch (const spoc::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// Rows with feature j of row i equal to (i * 7 + j) mod 100, grade as given.
inline spoc::data::ScoreDataset make_dataset(const std::vector<double>& grades, std::size_t d = 3) {
  spoc::data::ScoreDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(grades.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < grades.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<double>((i * 7 + j) % 100);
    }
  }
  ds.grades = grades;
  for (double g : grades) ds.levels.push_back(spoc::data::bin_grade(g));
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("f" + std::to_string(j));
  ds.feature_categories.assign(d, spoc::data::FeatureCategory::kUnknown);
  return ds;
}

using Row = std::vector<double>;  // features then grade
using RowMultiset = std::map<Row, std::size_t>;

inline Row row_at(const spoc::data::ScoreDataset& ds, std::size_t i) {
  const auto r = ds.features.row(static_cast<Eigen::Index>(i));
  Row row(r.begin(), r.end());
  row.push_back(ds.grades[i]);
  return row;
}

inline RowMultiset row_multiset(const spoc::data::ScoreDataset& ds) {
  RowMultiset m;
  for (std::size_t i = 0; i < ds.size(); ++i) ++m[row_at(ds, i)];
  return m;
}

// True when every row of `sub` occurs in `super` at least as often.
inline bool is_submultiset(const RowMultiset& sub, const RowMultiset& super) {
  for (const auto& [row, n] : sub) {
    const auto it = super.find(row);
    if (it == super.end() || it->second < n) return false;
  }
  return true;
}

struct ReplayReport {
  bool plans_match = true;
  bool oversample_duplicates = true;
  bool undersample_subsets = true;
  bool final_matches = true;
};

// Re-runs every traced action on a copy of the input and checks the
// resampling contract step by step.
inline ReplayReport replay_balance(const spoc::data::ScoreDataset& input, const spoc::resample::BalanceConfig& cfg,
                                   const spoc::resample::BalanceResult& result) {
  using namespace spoc::resample;
  ReplayReport rep;
  const std::vector<int> labels{0, 1, 2, 3, 4, 5};
  const auto tiers = assign_tiers(labels);
  auto current = input;
  for (const auto& entry : result.trace) {
    if (!(entry.plan.actions == plan_step(entry.diagnostics, cfg.step_fraction).actions)) rep.plans_match = false;
    const auto it_seed = spoc::derive_seed(cfg.seed, static_cast<std::uint64_t>(entry.iteration));
    for (std::size_t a = 0; a < entry.plan.actions.size(); ++a) {
      const auto& action = entry.plan.actions[a];
      const auto& members = tiers.members(action.target_tier);
      const auto seed = spoc::derive_seed(it_seed, static_cast<std::uint64_t>(a));
      const auto before = row_multiset(current);
      if (action.kind == SamplingKind::kOversample) {
        auto next = oversample(current, members, action.step_fraction, seed).data;
        const auto after = row_multiset(next);
        // added rows are copies of existing rows of the targeted classes
        RowMultiset targeted;
        for (std::size_t i = 0; i < current.size(); ++i) {
          if (std::find(members.begin(), members.end(), current.levels[i]) != members.end()) {
            targeted[row_at(current, i)] = 1;
          }
        }
        if (!is_submultiset(before, after)) rep.oversample_duplicates = false;
        for (const auto& [row, n] : after) {
          const auto b = before.find(row);
          const std::size_t had = b == before.end() ? 0 : b->second;
          if (n > had && targeted.find(row) == targeted.end()) rep.oversample_duplicates = false;
        }
        current = std::move(next);
      } else {
        auto next = undersample(current, members, action.step_fraction, seed, cfg.floor).data;
        if (!is_submultiset(row_multiset(next), before)) rep.undersample_subsets = false;
        current = std::move(next);
      }
    }
  }
  rep.final_matches = current.features == result.balanced.features && current.grades == result.balanced.grades;
  return rep;
}

}  // namespace support
