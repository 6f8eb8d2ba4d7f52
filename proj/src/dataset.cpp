#include "spoc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "spoc/error.hpp"
#include "spoc/seed.hpp"

namespace spoc::data {
namespace {

constexpr std::string_view kGradeColumn = "grade";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

bool is_missing(std::string_view cell) { return cell.empty() || cell == "NA"; }

std::optional<double> parse_number(std::string_view cell) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<FeatureCategory> parse_category(std::string_view s) {
  if (s == "AudioVideo") return FeatureCategory::kAudioVideo;
  if (s == "ChapterTest") return FeatureCategory::kChapterTest;
  if (s == "Discussion") return FeatureCategory::kDiscussion;
  if (s == "Unknown") return FeatureCategory::kUnknown;
  return std::nullopt;
}

void append_number(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

}  // namespace

int bin_grade(double grade) {
  if (!(grade >= 0.0 && grade <= 100.0)) {
    throw Error(ErrorCode::kOutOfRange, "grade " + std::to_string(grade) + " outside [0, 100]");
  }
  for (int i = 0; i < kNumLevels - 1; ++i) {
    if (grade < kLevelBins[static_cast<std::size_t>(i)].hi) return i;
  }
  return kNumLevels - 1;
}

std::string level_name(int level) { return "L" + std::to_string(level + 1); }

std::string_view category_name(FeatureCategory c) noexcept {
  switch (c) {
    case FeatureCategory::kAudioVideo: return "AudioVideo";
    case FeatureCategory::kChapterTest: return "ChapterTest";
    case FeatureCategory::kDiscussion: return "Discussion";
    case FeatureCategory::kUnknown: break;
  }
  return "Unknown";
}

void ScoreDataset::validate() const {
  const auto n = grades.size();
  if (static_cast<std::size_t>(features.rows()) != n || levels.size() != n) {
    throw Error(ErrorCode::kSchemaError, "row counts of features, grades and levels disagree");
  }
  if (feature_names.size() != dim() || feature_categories.size() != dim()) {
    throw Error(ErrorCode::kSchemaError, "feature metadata does not match feature count");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (levels[i] != bin_grade(grades[i])) {
      throw Error(ErrorCode::kSchemaError, "level of row " + std::to_string(i) + " does not match its grade");
    }
  }
  if (features.size() > 0 && (features.minCoeff() < 0.0 || features.maxCoeff() > 100.0 || !features.allFinite())) {
    throw Error(ErrorCode::kSchemaError, "feature values must lie in [0, 100]");
  }
}

ScoreDataset select_rows(const ScoreDataset& ds, std::span<const std::size_t> rows) {
  ScoreDataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), ds.features.cols());
  out.grades.reserve(rows.size());
  out.levels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    out.features.row(static_cast<Eigen::Index>(i)) = ds.features.row(static_cast<Eigen::Index>(r));
    out.grades.push_back(ds.grades[r]);
    out.levels.push_back(ds.levels[r]);
  }
  out.feature_names = ds.feature_names;
  out.feature_categories = ds.feature_categories;
  return out;
}

std::array<std::size_t, kNumLevels> class_counts(const ScoreDataset& ds) {
  std::array<std::size_t, kNumLevels> counts{};
  for (int level : ds.levels) ++counts[static_cast<std::size_t>(level)];
  return counts;
}

LoadResult parse_csv(std::string_view text) {
  auto lines = split_lines(text);
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw Error(ErrorCode::kSchemaError, "missing header row");

  const auto header = split_cells(lines[0]);
  std::optional<std::size_t> grade_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == kGradeColumn) {
      if (grade_col) throw Error(ErrorCode::kSchemaError, "duplicate `grade` column");
      grade_col = c;
    }
  }
  if (!grade_col) throw Error(ErrorCode::kSchemaError, "no `grade` column in header");
  if (header.size() < 2) throw Error(ErrorCode::kSchemaError, "no feature columns in header");

  const std::size_t d = header.size() - 1;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != *grade_col) names.emplace_back(header[c]);
  }
  std::vector<FeatureCategory> categories(d, FeatureCategory::kUnknown);

  std::size_t first_data = 1;
  if (lines.size() > 1) {
    const auto tags = split_cells(lines[1]);
    bool all_tags = tags.size() == header.size();
    std::vector<FeatureCategory> parsed;
    for (std::size_t c = 0; all_tags && c < tags.size(); ++c) {
      if (c == *grade_col) continue;
      const auto cat = parse_category(tags[c]);
      if (!cat) {
        all_tags = false;
      } else {
        parsed.push_back(*cat);
      }
    }
    if (all_tags) {
      categories = std::move(parsed);
      first_data = 2;
    }
  }

  std::vector<double> values;
  std::vector<double> grades;
  std::size_t dropped = 0;
  for (std::size_t li = first_data; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const auto cells = split_cells(lines[li]);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kSchemaError, "line " + std::to_string(li + 1) + " has " +
                                               std::to_string(cells.size()) + " cells, expected " +
                                               std::to_string(header.size()));
    }
    if (std::any_of(cells.begin(), cells.end(), is_missing)) {
      ++dropped;
      continue;
    }
    double grade = 0.0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto v = parse_number(cells[c]);
      if (!v) {
        throw Error(ErrorCode::kSchemaError, "line " + std::to_string(li + 1) + ": non-numeric cell '" +
                                                 std::string(cells[c]) + "'");
      }
      if (*v < 0.0 || *v > 100.0) {
        throw Error(ErrorCode::kSchemaError, "line " + std::to_string(li + 1) + ": value " +
                                                 std::string(cells[c]) + " outside [0, 100]");
      }
      if (c == *grade_col) {
        grade = *v;
      } else {
        values.push_back(*v);
      }
    }
    grades.push_back(grade);
  }
  if (grades.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "no complete rows (" + std::to_string(dropped) + " dropped)");
  }

  LoadResult result;
  auto& ds = result.dataset;
  ds.features = Eigen::Map<const Matrix>(values.data(), static_cast<Eigen::Index>(grades.size()),
                                         static_cast<Eigen::Index>(d));
  ds.grades = std::move(grades);
  ds.levels.reserve(ds.grades.size());
  for (double g : ds.grades) ds.levels.push_back(bin_grade(g));
  ds.feature_names = std::move(names);
  ds.feature_categories = std::move(categories);
  result.dropped_count = dropped;
  return result;
}

LoadResult load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::kFileError, "failed reading " + path.string());
  return parse_csv(buf.str());
}

std::string format_csv(const ScoreDataset& ds) {
  std::string out;
  for (const auto& name : ds.feature_names) {
    out += name;
    out += ',';
  }
  out += kGradeColumn;
  out += '\n';
  for (auto c : ds.feature_categories) {
    out += category_name(c);
    out += ',';
  }
  out += "Unknown\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto row = ds.features.row(static_cast<Eigen::Index>(i));
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      append_number(out, row(j));
      out += ',';
    }
    append_number(out, ds.grades[i]);
    out += '\n';
  }
  return out;
}

void write_csv(const ScoreDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kFileError, "cannot write " + path.string());
  out << format_csv(ds);
  if (!out) throw Error(ErrorCode::kFileError, "failed writing " + path.string());
}

SplitDataset split(const ScoreDataset& ds, double ratio, std::uint64_t seed, bool stratified) {
  if (ds.empty()) throw Error(ErrorCode::kEmptyDataset, "cannot split an empty dataset");
  if (!(ratio > 0.0 && ratio < 1.0)) throw Error(ErrorCode::kInvalidSpec, "split ratio must lie in (0, 1)");

  std::mt19937_64 rng(seed);
  SplitDataset out;
  out.split_seed = seed;

  auto cut = [&](std::vector<std::size_t> rows) {
    std::shuffle(rows.begin(), rows.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(rows.size())));
    n_train = std::clamp<std::size_t>(n_train, rows.empty() ? 0 : 1, rows.size());
    out.train_rows.insert(out.train_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test_rows.insert(out.test_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  };

  if (stratified) {
    std::array<std::vector<std::size_t>, kNumLevels> by_class;
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.levels[i])].push_back(i);
    for (auto& rows : by_class) cut(std::move(rows));
  } else {
    std::vector<std::size_t> rows(ds.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    cut(std::move(rows));
  }

  out.train = select_rows(ds, out.train_rows);
  out.test = select_rows(ds, out.test_rows);
  out.test_empty = out.test_rows.empty();
  return out;
}

Standardizer fit_standardizer(const Matrix& features) {
  if (features.rows() == 0) throw Error(ErrorCode::kEmptyDataset, "cannot fit a standardizer on zero rows");
  const auto n = static_cast<double>(features.rows());
  Standardizer s;
  const auto d = static_cast<std::size_t>(features.cols());
  s.mean.resize(d);
  s.std.resize(d);
  s.zero_variance.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const auto col = features.col(static_cast<Eigen::Index>(j));
    double sum = 0.0;
    for (Eigen::Index i = 0; i < col.size(); ++i) sum += col(i);
    const double mean = sum / n;
    double ss = 0.0;
    for (Eigen::Index i = 0; i < col.size(); ++i) ss += (col(i) - mean) * (col(i) - mean);
    const double sd = std::sqrt(ss / n);
    s.mean[j] = mean;
    const bool flat = col.minCoeff() == col.maxCoeff() || sd <= 1e-12 * std::max(1.0, std::abs(mean));
    s.zero_variance[j] = flat;
    s.std[j] = flat ? 1.0 : sd;
  }
  return s;
}

Standardizer fit_standardizer(const ScoreDataset& train) { return fit_standardizer(train.features); }

Matrix apply_standardizer(const Standardizer& s, const Matrix& features) {
  if (static_cast<std::size_t>(features.cols()) != s.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "standardizer fitted on " + std::to_string(s.dim()) +
                                                   " features, input has " + std::to_string(features.cols()));
  }
  Matrix out(features.rows(), features.cols());
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    const auto js = static_cast<std::size_t>(j);
    if (s.zero_variance[js]) {
      out.col(j).setZero();
    } else {
      out.col(j) = (features.col(j).array() - s.mean[js]) / s.std[js];
    }
  }
  return out;
}

Matrix apply_standardizer(const Standardizer& s, const ScoreDataset& ds) {
  return apply_standardizer(s, ds.features);
}

Json to_json(const Standardizer& s) {
  Json j;
  j["mean"] = s.mean;
  j["std"] = s.std;
  j["zero_variance"] = s.zero_variance;
  return j;
}

Standardizer standardizer_from_json(const Json& j) {
  Standardizer s;
  s.mean = j.at("mean").get<std::vector<double>>();
  s.std = j.at("std").get<std::vector<double>>();
  s.zero_variance = j.at("zero_variance").get<std::vector<bool>>();
  if (s.std.size() != s.mean.size() || s.zero_variance.size() != s.mean.size()) {
    throw Error(ErrorCode::kSchemaError, "standardizer arrays differ in length");
  }
  return s;
}

void SyntheticSpec::validate() const {
  if (n < static_cast<std::size_t>(kNumLevels)) {
    throw Error(ErrorCode::kInvalidSpec, "synthetic n must be at least 6");
  }
  if (d == 0) throw Error(ErrorCode::kInvalidSpec, "synthetic d must be positive");
  double total = 0.0;
  for (double p : class_proportions) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw Error(ErrorCode::kInvalidSpec, "class proportions must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw Error(ErrorCode::kInvalidSpec, "class proportions must sum to 1");
  }
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw Error(ErrorCode::kInvalidSpec, "noise must be >= 0");
}

Json to_json(const SyntheticSpec& spec) {
  Json j;
  j["n"] = spec.n;
  j["d"] = spec.d;
  j["class_proportions"] = spec.class_proportions;
  j["noise"] = spec.noise;
  j["seed"] = spec.seed;
  return j;
}

SyntheticSpec synthetic_spec_from_json(const Json& j) {
  SyntheticSpec spec;
  try {
    if (j.contains("n")) spec.n = j.at("n").get<std::size_t>();
    if (j.contains("d")) spec.d = j.at("d").get<std::size_t>();
    if (j.contains("class_proportions")) {
      const auto p = j.at("class_proportions").get<std::vector<double>>();
      if (p.size() != kNumLevels) throw Error(ErrorCode::kInvalidSpec, "class_proportions needs 6 entries");
      std::copy(p.begin(), p.end(), spec.class_proportions.begin());
    }
    if (j.contains("noise")) spec.noise = j.at("noise").get<double>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidSpec, std::string("bad synthetic spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

Matrix class_prototypes(const SyntheticSpec& spec) {
  std::mt19937_64 rng(derive_seed(spec.seed, "prototypes"));
  std::uniform_real_distribution<double> jitter(-12.5, 12.5);
  Matrix protos(kNumLevels, static_cast<Eigen::Index>(spec.d));
  for (Eigen::Index c = 0; c < kNumLevels; ++c) {
    // Activity scores rise with the grade level; jitter keeps classes from
    // being a pure one-dimensional ordering.
    const double center = 25.0 + 12.5 * static_cast<double>(c);
    for (Eigen::Index j = 0; j < protos.cols(); ++j) {
      protos(c, j) = std::clamp(center + jitter(rng), 0.0, 100.0);
    }
  }
  return protos;
}

namespace {

std::pair<std::vector<std::string>, std::vector<FeatureCategory>> default_schema(std::size_t d) {
  std::vector<std::string> names;
  std::vector<FeatureCategory> cats;
  for (std::size_t j = 0; j < d; ++j) {
    if (j < 60) {
      names.push_back("av_" + std::to_string(j + 1));
      cats.push_back(FeatureCategory::kAudioVideo);
    } else if (j < 68) {
      names.push_back("chapter_test_" + std::to_string(j - 59));
      cats.push_back(FeatureCategory::kChapterTest);
    } else if (j == 68) {
      names.emplace_back("discussion");
      cats.push_back(FeatureCategory::kDiscussion);
    } else {
      names.push_back("feature_" + std::to_string(j + 1));
      cats.push_back(FeatureCategory::kUnknown);
    }
  }
  return {names, cats};
}

}  // namespace

ScoreDataset synthesize_dataset(const SyntheticSpec& spec) {
  spec.validate();
  const Matrix protos = class_prototypes(spec);

  std::mt19937_64 rng(derive_seed(spec.seed, "rows"));
  std::discrete_distribution<int> pick_class(spec.class_proportions.begin(), spec.class_proportions.end());
  std::normal_distribution<double> gauss(0.0, 1.0);

  ScoreDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(spec.d));
  ds.grades.reserve(spec.n);
  ds.levels.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const int c = pick_class(rng);
    const auto& bin = kLevelBins[static_cast<std::size_t>(c)];
    std::uniform_real_distribution<double> in_bin(bin.lo, bin.hi);
    double grade = in_bin(rng);
    // Keep the draw inside the half-open bin even under rounding.
    if (c < kNumLevels - 1 && grade >= bin.hi) grade = std::nextafter(bin.hi, bin.lo);
    ds.grades.push_back(grade);
    ds.levels.push_back(c);
    const auto row = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
      const double v = protos(c, j) + (spec.noise > 0.0 ? spec.noise * gauss(rng) : 0.0);
      ds.features(row, j) = std::clamp(v, 0.0, 100.0);
    }
  }
  std::tie(ds.feature_names, ds.feature_categories) = default_schema(spec.d);
  return ds;
}

}  // namespace spoc::data
