#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spoc/dataset.hpp"
#include "spoc/json.hpp"

namespace spoc::eval {

/// Per-class recall ("Acc of Lk") and overall accuracy. Classes with no
/// support have no recall rather than a recall of zero.
struct EvaluationReport {
  std::size_t num_classes = data::kNumLevels;
  std::vector<std::vector<std::size_t>> confusion;  // [actual][predicted]
  std::vector<std::size_t> support;
  std::vector<std::optional<double>> per_class_recall;
  double total_accuracy = 0.0;
  std::size_t total = 0;
};

/// Throws Error(kLengthMismatch), Error(kEmptyInput), or
/// Error(kLabelOutOfRange) for labels outside [0, num_classes).
[[nodiscard]] EvaluationReport evaluate(std::span<const int> predictions, std::span<const int> labels,
                                        std::size_t num_classes = data::kNumLevels);

/// {per_class_recall, total_accuracy, confusion, support}
[[nodiscard]] Json to_json(const EvaluationReport& report);

struct AblationTable {
  std::string csv;
  std::string text;
};

/// One row per run (sorted by name): per-class recalls then total accuracy.
[[nodiscard]] AblationTable ablation_table(const std::map<std::string, EvaluationReport>& reports);

}  // namespace spoc::eval
