#pragma once

#include <cstddef>
#include <span>

#include "spoc/json.hpp"

namespace spoc::stats {

struct DiagnosticsConfig {
  /// Reference scale dividing the max score to form the Z statistic.
  double sigma_ref = 0.36;
  /// Z-test threshold; the data passes when Z is strictly below it.
  double epsilon = 1.96;

  void validate() const;
};

/// Shape indicators for one snapshot of a grade vector.
///
/// Moments use the population form (1/n) throughout, and kurtosis is the
/// excess kurtosis. max_score is max(|skewness|, |kurtosis|) and
/// z_statistic is max_score / sigma_ref for the config in effect.
struct DistributionDiagnostics {
  double skewness = 0.0;
  double kurtosis = 0.0;
  double max_score = 0.0;
  double z_statistic = 0.0;
  double mean = 0.0;
  double std_dev = 0.0;
  std::size_t n = 0;
};

// All of these throw Error(kDegenerateInput) on fewer than two values,
// identical values, or any non-finite value.
[[nodiscard]] double skewness(std::span<const double> grades);
[[nodiscard]] double kurtosis(std::span<const double> grades);

[[nodiscard]] double max_score(double skewness, double kurtosis);
[[nodiscard]] double z_statistic(double max_score, const DiagnosticsConfig& config);
[[nodiscard]] bool passes_gaussian_test(const DistributionDiagnostics& diag, const DiagnosticsConfig& config);

[[nodiscard]] DistributionDiagnostics diagnose(std::span<const double> grades, const DiagnosticsConfig& config = {});

/// Builds a diagnostics record from already computed moments. Used when
/// S and K come from elsewhere (a published example, a cached run).
[[nodiscard]] DistributionDiagnostics diagnostics_from_moments(double skewness, double kurtosis, double mean,
                                                               double std_dev, std::size_t n,
                                                               const DiagnosticsConfig& config = {});

/// Flat object: skewness, kurtosis, max_score, z_statistic, mean, std_dev, n, passes.
[[nodiscard]] Json to_json(const DistributionDiagnostics& diag, const DiagnosticsConfig& config);

}  // namespace spoc::stats
