#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spoc/dataset.hpp"
#include "spoc/json.hpp"
#include "spoc/stats.hpp"

namespace spoc::resample {

enum class Tier { kLower, kMedium, kUpper };
enum class SamplingKind { kOversample, kUndersample };

[[nodiscard]] std::string_view tier_name(Tier t) noexcept;
[[nodiscard]] std::string_view kind_name(SamplingKind k) noexcept;

/// Grade-ordered partition of the class labels into three contiguous tiers.
struct TierAssignment {
  std::vector<int> lower;
  std::vector<int> medium;
  std::vector<int> upper;

  [[nodiscard]] const std::vector<int>& members(Tier t) const;
};

/// Splits ordered labels into contiguous thirds. Throws Error(kTooFewClasses)
/// for fewer than three labels.
[[nodiscard]] TierAssignment assign_tiers(std::span<const int> ordered_labels);

struct SamplingAction {
  Tier target_tier = Tier::kLower;
  SamplingKind kind = SamplingKind::kOversample;
  double step_fraction = 0.1;

  friend bool operator==(const SamplingAction&, const SamplingAction&) = default;
};

struct SamplingPlan {
  std::vector<SamplingAction> actions;
  stats::DistributionDiagnostics source_diagnostics;
};

/// Sign rules: S < 0 oversamples the lower tier, otherwise the upper tier;
/// K > 0 undersamples the medium tier, otherwise oversamples it. The S action
/// comes first.
[[nodiscard]] SamplingPlan plan_step(const stats::DistributionDiagnostics& diag, double step_fraction = 0.1);

struct ResampleResult {
  data::ScoreDataset data;
  std::vector<std::string> warnings;
};

/// Appends ceil(step * count) uniformly drawn duplicates for each targeted
/// class. Classes with no rows are skipped with a warning.
[[nodiscard]] ResampleResult oversample(const data::ScoreDataset& ds, std::span<const int> classes,
                                        double step_fraction, std::uint64_t seed);

/// Removes floor(step * count) uniformly chosen rows from each targeted
/// class, never taking a class below `floor` rows. Row order of the
/// survivors is preserved.
[[nodiscard]] ResampleResult undersample(const data::ScoreDataset& ds, std::span<const int> classes,
                                         double step_fraction, std::uint64_t seed, std::size_t floor = 5);

struct BalanceConfig {
  stats::DiagnosticsConfig diagnostics;
  double step_fraction = 0.1;
  std::size_t max_iterations = 100;
  std::size_t floor = 5;
  /// The loop also stops, unconverged, once the dataset exceeds this many
  /// rows. 0 disables the cap.
  std::size_t max_rows = 500'000;
  std::uint64_t seed = 0;
  /// Defaults to contiguous thirds of L1..L6 when unset.
  std::optional<TierAssignment> tiers;

  void validate() const;
};

struct TraceEntry {
  std::size_t iteration = 0;
  stats::DistributionDiagnostics diagnostics;
  SamplingPlan plan;
  std::array<std::size_t, data::kNumLevels> class_counts{};
};

struct BalanceResult {
  data::ScoreDataset balanced;
  std::size_t iterations = 0;
  std::vector<TraceEntry> trace;
  bool converged = false;
  stats::DistributionDiagnostics final_diagnostics;
  std::vector<std::string> warnings;
};

/// Repeats diagnose -> plan_step -> apply until the Z-test passes or the
/// iteration cap is reached. Non-convergence is reported, not thrown.
[[nodiscard]] BalanceResult balance(const data::ScoreDataset& ds, const BalanceConfig& config);

/// [{iteration, skewness, kurtosis, max_score, z, actions[], class_counts{}}]
[[nodiscard]] Json trace_to_json(const BalanceResult& result);

}  // namespace spoc::resample
