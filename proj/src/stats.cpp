#include "spoc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spoc/error.hpp"

namespace spoc {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kFileError: return "FileError";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kTooFewClasses: return "TooFewClasses";
    case ErrorCode::kEmptyClass: return "EmptyClass";
    case ErrorCode::kBatchTooSmall: return "BatchTooSmall";
    case ErrorCode::kUnfitted: return "Unfitted";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kStaleCache: return "StaleCache";
    case ErrorCode::kInvalidKind: return "InvalidKind";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kDivergence: return "Divergence";
  }
  return "Unknown";
}

}  // namespace spoc

namespace spoc::stats {
namespace {

struct CentralMoments {
  double mean;
  double m2;
  double m3;
  double m4;
  std::size_t n;
};

CentralMoments central_moments(std::span<const double> x) {
  if (x.size() < 2) {
    throw Error(ErrorCode::kDegenerateInput,
                "need at least 2 values, got " + std::to_string(x.size()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kDegenerateInput, "non-finite value in input");
    }
  }
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*lo == *hi) {
    throw Error(ErrorCode::kDegenerateInput, "all values identical; standard deviation is zero");
  }

  const double n = static_cast<double>(x.size());
  double sum = 0.0;
  for (double v : x) sum += v;
  const double mean = sum / n;

  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  return {mean, m2 / n, m3 / n, m4 / n, x.size()};
}

double skew_of(const CentralMoments& m) { return m.m3 / (m.m2 * std::sqrt(m.m2)); }
double kurt_of(const CentralMoments& m) { return m.m4 / (m.m2 * m.m2) - 3.0; }

}  // namespace

void DiagnosticsConfig::validate() const {
  if (!(sigma_ref > 0.0) || !std::isfinite(sigma_ref)) {
    throw Error(ErrorCode::kInvalidSpec, "sigma_ref must be a positive finite number");
  }
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorCode::kInvalidSpec, "epsilon must be a positive finite number");
  }
}

double skewness(std::span<const double> grades) { return skew_of(central_moments(grades)); }

double kurtosis(std::span<const double> grades) { return kurt_of(central_moments(grades)); }

double max_score(double skewness, double kurtosis) {
  if (!std::isfinite(skewness) || !std::isfinite(kurtosis)) {
    throw Error(ErrorCode::kDegenerateInput, "max_score needs finite skewness and kurtosis");
  }
  return std::max(std::abs(skewness), std::abs(kurtosis));
}

double z_statistic(double max_score, const DiagnosticsConfig& config) {
  config.validate();
  return max_score / config.sigma_ref;
}

bool passes_gaussian_test(const DistributionDiagnostics& diag, const DiagnosticsConfig& config) {
  return diag.z_statistic < config.epsilon;
}

DistributionDiagnostics diagnostics_from_moments(double skewness, double kurtosis, double mean, double std_dev,
                                                 std::size_t n, const DiagnosticsConfig& config) {
  DistributionDiagnostics d;
  d.skewness = skewness;
  d.kurtosis = kurtosis;
  d.max_score = max_score(skewness, kurtosis);
  d.z_statistic = z_statistic(d.max_score, config);
  d.mean = mean;
  d.std_dev = std_dev;
  d.n = n;
  return d;
}

DistributionDiagnostics diagnose(std::span<const double> grades, const DiagnosticsConfig& config) {
  config.validate();
  const CentralMoments m = central_moments(grades);
  return diagnostics_from_moments(skew_of(m), kurt_of(m), m.mean, std::sqrt(m.m2), m.n, config);
}

Json to_json(const DistributionDiagnostics& diag, const DiagnosticsConfig& config) {
  Json j;
  j["skewness"] = diag.skewness;
  j["kurtosis"] = diag.kurtosis;
  j["max_score"] = diag.max_score;
  j["z_statistic"] = diag.z_statistic;
  j["mean"] = diag.mean;
  j["std_dev"] = diag.std_dev;
  j["n"] = diag.n;
  j["passes"] = passes_gaussian_test(diag, config);
  return j;
}

}  // namespace spoc::stats
