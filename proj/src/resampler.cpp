#include "spoc/resampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "spoc/error.hpp"
#include "spoc/seed.hpp"

namespace spoc::resample {
namespace {

void check_step(double step_fraction) {
  if (!(step_fraction > 0.0 && step_fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidSpec, "step_fraction must lie in (0, 1]");
  }
}

std::vector<std::size_t> rows_of_class(const data::ScoreDataset& ds, int level) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.levels[i] == level) rows.push_back(i);
  }
  return rows;
}

}  // namespace

std::string_view tier_name(Tier t) noexcept {
  switch (t) {
    case Tier::kLower: return "lower";
    case Tier::kMedium: return "medium";
    case Tier::kUpper: return "upper";
  }
  return "?";
}

std::string_view kind_name(SamplingKind k) noexcept {
  return k == SamplingKind::kOversample ? "oversample" : "undersample";
}

const std::vector<int>& TierAssignment::members(Tier t) const {
  switch (t) {
    case Tier::kLower: return lower;
    case Tier::kMedium: return medium;
    case Tier::kUpper: break;
  }
  return upper;
}

TierAssignment assign_tiers(std::span<const int> ordered_labels) {
  const std::size_t n = ordered_labels.size();
  if (n < 3) {
    throw Error(ErrorCode::kTooFewClasses, "need at least 3 classes to form tiers, got " + std::to_string(n));
  }
  const std::size_t first = n / 3;
  const std::size_t second = 2 * n / 3;
  TierAssignment t;
  t.lower.assign(ordered_labels.begin(), ordered_labels.begin() + static_cast<std::ptrdiff_t>(first));
  t.medium.assign(ordered_labels.begin() + static_cast<std::ptrdiff_t>(first),
                  ordered_labels.begin() + static_cast<std::ptrdiff_t>(second));
  t.upper.assign(ordered_labels.begin() + static_cast<std::ptrdiff_t>(second), ordered_labels.end());
  return t;
}

SamplingPlan plan_step(const stats::DistributionDiagnostics& diag, double step_fraction) {
  SamplingPlan plan;
  plan.source_diagnostics = diag;
  plan.actions.push_back({diag.skewness < 0.0 ? Tier::kLower : Tier::kUpper, SamplingKind::kOversample, step_fraction});
  plan.actions.push_back(
      {Tier::kMedium, diag.kurtosis > 0.0 ? SamplingKind::kUndersample : SamplingKind::kOversample, step_fraction});
  return plan;
}

ResampleResult oversample(const data::ScoreDataset& ds, std::span<const int> classes, double step_fraction,
                          std::uint64_t seed) {
  check_step(step_fraction);
  std::mt19937_64 rng(seed);
  ResampleResult out;
  std::vector<std::size_t> rows(ds.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  for (int level : classes) {
    const auto members = rows_of_class(ds, level);
    if (members.empty()) {
      out.warnings.push_back("oversample: class " + data::level_name(level) + " has no rows; skipped");
      continue;
    }
    const auto extra = static_cast<std::size_t>(std::ceil(step_fraction * static_cast<double>(members.size())));
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    for (std::size_t k = 0; k < extra; ++k) rows.push_back(members[pick(rng)]);
  }
  out.data = data::select_rows(ds, rows);
  return out;
}

ResampleResult undersample(const data::ScoreDataset& ds, std::span<const int> classes, double step_fraction,
                           std::uint64_t seed, std::size_t floor) {
  check_step(step_fraction);
  if (floor < 1) throw Error(ErrorCode::kInvalidSpec, "undersample floor must be at least 1");
  std::mt19937_64 rng(seed);
  ResampleResult out;
  std::vector<bool> removed(ds.size(), false);
  for (int level : classes) {
    auto members = rows_of_class(ds, level);
    if (members.empty()) {
      out.warnings.push_back("undersample: class " + data::level_name(level) + " has no rows; skipped");
      continue;
    }
    if (members.size() <= floor) {
      out.warnings.push_back("undersample: class " + data::level_name(level) + " at floor (" +
                             std::to_string(members.size()) + " rows); unchanged");
      continue;
    }
    auto k = static_cast<std::size_t>(std::floor(step_fraction * static_cast<double>(members.size())));
    k = std::min(k, members.size() - floor);
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i = 0; i < k; ++i) removed[members[i]] = true;
  }
  std::vector<std::size_t> keep;
  keep.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!removed[i]) keep.push_back(i);
  }
  out.data = data::select_rows(ds, keep);
  return out;
}

void BalanceConfig::validate() const {
  diagnostics.validate();
  check_step(step_fraction);
  if (floor < 1) throw Error(ErrorCode::kInvalidSpec, "floor must be at least 1");
}

BalanceResult balance(const data::ScoreDataset& ds, const BalanceConfig& config) {
  config.validate();
  TierAssignment tiers;
  if (config.tiers) {
    tiers = *config.tiers;
  } else {
    std::array<int, data::kNumLevels> labels{};
    std::iota(labels.begin(), labels.end(), 0);
    tiers = assign_tiers(labels);
  }

  BalanceResult result;
  data::ScoreDataset current = ds;
  for (std::size_t it = 0;; ++it) {
    const auto diag = stats::diagnose(current.grades, config.diagnostics);
    if (stats::passes_gaussian_test(diag, config.diagnostics)) {
      result.converged = true;
      result.final_diagnostics = diag;
      break;
    }
    if (it >= config.max_iterations) {
      result.final_diagnostics = diag;
      break;
    }
    if (config.max_rows > 0 && current.size() > config.max_rows) {
      result.warnings.push_back("stopped at iteration " + std::to_string(it) + ": " + std::to_string(current.size()) +
                                " rows exceed the cap of " + std::to_string(config.max_rows));
      result.final_diagnostics = diag;
      break;
    }

    TraceEntry entry;
    entry.iteration = it;
    entry.diagnostics = diag;
    entry.plan = plan_step(diag, config.step_fraction);
    entry.class_counts = data::class_counts(current);

    const std::uint64_t iteration_seed = derive_seed(config.seed, static_cast<std::uint64_t>(it));
    for (std::size_t a = 0; a < entry.plan.actions.size(); ++a) {
      const auto& action = entry.plan.actions[a];
      const auto& members = tiers.members(action.target_tier);
      const std::uint64_t action_seed = derive_seed(iteration_seed, static_cast<std::uint64_t>(a));
      ResampleResult step = action.kind == SamplingKind::kOversample
                                ? oversample(current, members, action.step_fraction, action_seed)
                                : undersample(current, members, action.step_fraction, action_seed, config.floor);
      for (auto& w : step.warnings) result.warnings.push_back("iteration " + std::to_string(it) + ": " + w);
      current = std::move(step.data);
    }
    result.trace.push_back(std::move(entry));
  }
  result.iterations = result.trace.size();
  result.balanced = std::move(current);
  return result;
}

Json trace_to_json(const BalanceResult& result) {
  Json arr = Json::array();
  for (const auto& e : result.trace) {
    Json j;
    j["iteration"] = e.iteration;
    j["skewness"] = e.diagnostics.skewness;
    j["kurtosis"] = e.diagnostics.kurtosis;
    j["max_score"] = e.diagnostics.max_score;
    j["z"] = e.diagnostics.z_statistic;
    Json actions = Json::array();
    for (const auto& a : e.plan.actions) {
      actions.push_back({{"tier", tier_name(a.target_tier)}, {"kind", kind_name(a.kind)}, {"step_fraction", a.step_fraction}});
    }
    j["actions"] = std::move(actions);
    Json counts = Json::object();
    for (int c = 0; c < data::kNumLevels; ++c) counts[data::level_name(c)] = e.class_counts[static_cast<std::size_t>(c)];
    j["class_counts"] = std::move(counts);
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace spoc::resample
