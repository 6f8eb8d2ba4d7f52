#include "spoc/evaluation.hpp"

#include <algorithm>
#include <cstdio>

#include "spoc/error.hpp"

namespace spoc::eval {
namespace {

constexpr const char* kAbsent = "\xE2\x80\x94";  // em dash, UTF-8

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string percent(double v) { return fixed(100.0 * v, 2) + "%"; }

// Display width of a UTF-8 string (code points, all assumed single width).
std::size_t display_width(const std::string& s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

std::string pad(const std::string& s, std::size_t width, bool left_align) {
  const std::size_t w = display_width(s);
  const std::string fill(width > w ? width - w : 0, ' ');
  return left_align ? s + fill : fill + s;
}

}  // namespace

EvaluationReport evaluate(std::span<const int> predictions, std::span<const int> labels, std::size_t num_classes) {
  if (predictions.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(predictions.size()) + " predictions for " +
                                                std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw Error(ErrorCode::kEmptyInput, "nothing to evaluate");
  auto check = [num_classes](int c) {
    if (c < 0 || static_cast<std::size_t>(c) >= num_classes) {
      throw Error(ErrorCode::kLabelOutOfRange, "class index " + std::to_string(c) + " out of range");
    }
  };

  EvaluationReport r;
  r.num_classes = num_classes;
  r.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  r.support.assign(num_classes, 0);
  r.total = labels.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check(labels[i]);
    check(predictions[i]);
    const auto a = static_cast<std::size_t>(labels[i]);
    const auto p = static_cast<std::size_t>(predictions[i]);
    ++r.confusion[a][p];
    ++r.support[a];
    if (a == p) ++correct;
  }
  r.per_class_recall.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (r.support[c] > 0) {
      r.per_class_recall[c] = static_cast<double>(r.confusion[c][c]) / static_cast<double>(r.support[c]);
    }
  }
  r.total_accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
  return r;
}

Json to_json(const EvaluationReport& report) {
  Json recall = Json::object();
  Json support = Json::object();
  for (std::size_t c = 0; c < report.num_classes; ++c) {
    const auto name = data::level_name(static_cast<int>(c));
    recall[name] = report.per_class_recall[c] ? Json(*report.per_class_recall[c]) : Json(nullptr);
    support[name] = report.support[c];
  }
  Json j;
  j["per_class_recall"] = std::move(recall);
  j["total_accuracy"] = report.total_accuracy;
  j["confusion"] = report.confusion;
  j["support"] = std::move(support);
  return j;
}

AblationTable ablation_table(const std::map<std::string, EvaluationReport>& reports) {
  std::size_t num_classes = 0;
  for (const auto& [name, r] : reports) num_classes = std::max(num_classes, r.num_classes);

  std::vector<std::string> header{"run"};
  for (std::size_t c = 0; c < num_classes; ++c) header.push_back("Acc of " + data::level_name(static_cast<int>(c)));
  header.emplace_back("Tol acc");

  std::vector<std::vector<std::string>> csv_rows;
  std::vector<std::vector<std::string>> text_rows;
  for (const auto& [name, r] : reports) {
    std::vector<std::string> csv_row{name};
    std::vector<std::string> text_row{name};
    for (std::size_t c = 0; c < num_classes; ++c) {
      const bool present = c < r.per_class_recall.size() && r.per_class_recall[c];
      csv_row.push_back(present ? fixed(*r.per_class_recall[c], 6) : kAbsent);
      text_row.push_back(present ? percent(*r.per_class_recall[c]) : kAbsent);
    }
    csv_row.push_back(fixed(r.total_accuracy, 6));
    text_row.push_back(percent(r.total_accuracy));
    csv_rows.push_back(std::move(csv_row));
    text_rows.push_back(std::move(text_row));
  }

  AblationTable t;
  auto join_csv = [](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + cells[i];
    return line + "\n";
  };
  t.csv = join_csv(header);
  for (const auto& row : csv_rows) t.csv += join_csv(row);

  std::vector<std::size_t> widths(header.size(), 0);
  auto widen = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) widths[i] = std::max(widths[i], display_width(cells[i]));
  };
  widen(header);
  for (const auto& row : text_rows) widen(row);
  auto join_text = [&](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line += "  ";
      line += pad(cells[i], widths[i], i == 0);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    return line + "\n";
  };
  t.text = join_text(header);
  for (const auto& row : text_rows) t.text += join_text(row);
  return t;
}

}  // namespace spoc::eval
