#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spoc/json.hpp"
#include "spoc/matrix.hpp"

namespace spoc::data {

inline constexpr int kNumLevels = 6;

/// Grade bins as half-open intervals [lo, hi); the last bin is closed at 100.
struct LevelBin {
  double lo;
  double hi;
};
inline constexpr std::array<LevelBin, kNumLevels> kLevelBins{{
    {0.0, 70.0}, {70.0, 80.0}, {80.0, 90.0}, {90.0, 93.0}, {93.0, 95.0}, {95.0, 100.0}}};

/// Zero-based class index (0 is L1, 5 is L6). Throws Error(kOutOfRange)
/// outside [0, 100].
[[nodiscard]] int bin_grade(double grade);

/// "L1".."L6".
[[nodiscard]] std::string level_name(int level);

enum class FeatureCategory { kUnknown, kAudioVideo, kChapterTest, kDiscussion };

[[nodiscard]] std::string_view category_name(FeatureCategory c) noexcept;

struct ScoreDataset {
  Matrix features;  // n x d, every entry in [0, 100]
  std::vector<double> grades;
  std::vector<int> levels;  // levels[i] == bin_grade(grades[i])
  std::vector<std::string> feature_names;
  std::vector<FeatureCategory> feature_categories;

  [[nodiscard]] std::size_t size() const noexcept { return grades.size(); }
  [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(features.cols()); }
  [[nodiscard]] bool empty() const noexcept { return grades.empty(); }

  /// Throws Error(kSchemaError) when the invariants above do not hold.
  void validate() const;
};

/// Rows in the given order (duplicates allowed). Metadata is copied.
[[nodiscard]] ScoreDataset select_rows(const ScoreDataset& ds, std::span<const std::size_t> rows);

[[nodiscard]] std::array<std::size_t, kNumLevels> class_counts(const ScoreDataset& ds);

struct LoadResult {
  ScoreDataset dataset;
  std::size_t dropped_count = 0;
};

/// Reads a header-first CSV with one `grade` column; every other column is a
/// numeric feature. An optional second header line may carry a category tag
/// per column (AudioVideo, ChapterTest, Discussion, Unknown). Empty cells and
/// `NA` mark missing values; such rows are dropped.
[[nodiscard]] LoadResult load_csv(const std::filesystem::path& path);
[[nodiscard]] LoadResult parse_csv(std::string_view text);

/// Features in order, `grade` last, category line included. Values are
/// written in shortest round-trip form so a reload is exact.
void write_csv(const ScoreDataset& ds, const std::filesystem::path& path);
[[nodiscard]] std::string format_csv(const ScoreDataset& ds);

struct SplitDataset {
  ScoreDataset train;
  ScoreDataset test;
  std::vector<std::size_t> train_rows;  // indices into the source dataset
  std::vector<std::size_t> test_rows;
  std::uint64_t split_seed = 0;
  bool test_empty = false;
};

/// Seeded uniform shuffle, then prefix (train) / suffix (test). With
/// `stratified` the shuffle and cut happen per class.
[[nodiscard]] SplitDataset split(const ScoreDataset& ds, double ratio, std::uint64_t seed, bool stratified = false);

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> std;  // 1.0 where zero_variance is set
  std::vector<bool> zero_variance;

  [[nodiscard]] std::size_t dim() const noexcept { return mean.size(); }
};

[[nodiscard]] Standardizer fit_standardizer(const ScoreDataset& train);
[[nodiscard]] Standardizer fit_standardizer(const Matrix& features);
/// (x - mean) / std per column; zero-variance columns become 0.
[[nodiscard]] Matrix apply_standardizer(const Standardizer& s, const Matrix& features);
[[nodiscard]] Matrix apply_standardizer(const Standardizer& s, const ScoreDataset& ds);

[[nodiscard]] Json to_json(const Standardizer& s);
[[nodiscard]] Standardizer standardizer_from_json(const Json& j);

/// Class-prototype generator standing in for private learner records.
struct SyntheticSpec {
  std::size_t n = 10000;
  std::size_t d = 69;
  /// L6 dominant, L4 smallest: the long-tail shape of real course grades.
  std::array<double, kNumLevels> class_proportions{0.15, 0.12, 0.04, 0.02, 0.15, 0.52};
  /// Standard deviation of the Gaussian noise around each class prototype.
  double noise = 10.0;
  std::uint64_t seed = 0;

  void validate() const;
};

[[nodiscard]] Json to_json(const SyntheticSpec& spec);
[[nodiscard]] SyntheticSpec synthetic_spec_from_json(const Json& j);

/// Per-class prototype vectors used by synthesize_dataset (kNumLevels x d).
[[nodiscard]] Matrix class_prototypes(const SyntheticSpec& spec);

[[nodiscard]] ScoreDataset synthesize_dataset(const SyntheticSpec& spec);

}  // namespace spoc::data
