#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "speechcue/error.hpp"
#include "speechcue/jsonl.hpp"

namespace speechcue::metrics {

struct EvalReport {
  std::vector<std::string> labels;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> per_class_f1;
  std::vector<std::size_t> support;
  double weighted_f1 = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  // Row = gold label, column = predicted label, with one trailing column for
  // unparseable predictions. Rows are normalized by support; rows without
  // support stay all-zero and are listed in `empty_rows`.
  std::vector<std::vector<double>> confusion;
  std::vector<std::string> empty_rows;
  std::size_t unparseable_count = 0;
  std::size_t total = 0;

  double f1(const std::string& label) const {
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw Error(ErrorCode::LabelOutsideSet, label);
    return per_class_f1[static_cast<std::size_t>(it - labels.begin())];
  }
};

inline double f1_from(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

// Unparseable predictions (nullopt) count against recall of the gold class
// and against no class's precision.
inline EvalReport score(std::span<const std::string> gold, std::span<const std::optional<std::string>> predicted,
                        const std::vector<std::string>& label_set) {
  if (gold.size() != predicted.size())
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(gold.size()) + " gold vs " + std::to_string(predicted.size()) + " predicted");
  if (gold.empty()) throw Error(ErrorCode::LengthMismatch, "nothing to score");

  const std::size_t k = label_set.size();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < k; ++i) index.emplace(label_set[i], i);
  auto lookup = [&](const std::string& label) {
    auto it = index.find(label);
    if (it == index.end()) throw Error(ErrorCode::LabelOutsideSet, label);
    return it->second;
  };

  std::vector<std::vector<std::size_t>> counts(k, std::vector<std::size_t>(k + 1, 0));
  EvalReport r;
  r.labels = label_set;
  r.total = gold.size();
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::size_t g = lookup(gold[i]);
    std::size_t p = k;
    if (predicted[i]) p = lookup(*predicted[i]);
    else ++r.unparseable_count;
    ++counts[g][p];
  }

  r.precision.assign(k, 0.0);
  r.recall.assign(k, 0.0);
  r.per_class_f1.assign(k, 0.0);
  r.support.assign(k, 0);
  r.confusion.assign(k, std::vector<double>(k + 1, 0.0));
  std::size_t correct = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t tp = counts[c][c];
    std::size_t predicted_c = 0;
    for (std::size_t g = 0; g < k; ++g) predicted_c += counts[g][c];
    for (std::size_t p = 0; p <= k; ++p) r.support[c] += counts[c][p];
    correct += tp;
    r.precision[c] = predicted_c ? static_cast<double>(tp) / predicted_c : 0.0;
    r.recall[c] = r.support[c] ? static_cast<double>(tp) / r.support[c] : 0.0;
    r.per_class_f1[c] = f1_from(r.precision[c], r.recall[c]);
    if (r.support[c] == 0) {
      r.empty_rows.push_back(label_set[c]);
    } else {
      for (std::size_t p = 0; p <= k; ++p)
        r.confusion[c][p] = static_cast<double>(counts[c][p]) / static_cast<double>(r.support[c]);
    }
  }

  double weighted = 0.0, macro = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    weighted += r.per_class_f1[c] * static_cast<double>(r.support[c]);
    macro += r.per_class_f1[c];
  }
  r.weighted_f1 = weighted / static_cast<double>(r.total);
  r.macro_f1 = macro / static_cast<double>(k);
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.total);
  return r;
}

// ---------------------------------------------------------------------------
// Report comparison

struct ReportDiff {
  std::vector<std::string> labels;
  std::vector<double> per_class_f1;  // b - a, fractions
  double weighted_f1 = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
};

inline ReportDiff diff_reports(const EvalReport& a, const EvalReport& b) {
  if (a.labels != b.labels) throw Error(ErrorCode::LabelSetMismatch, "reports cover different label sets");
  ReportDiff d;
  d.labels = a.labels;
  for (std::size_t i = 0; i < a.labels.size(); ++i) d.per_class_f1.push_back(b.per_class_f1[i] - a.per_class_f1[i]);
  d.weighted_f1 = b.weighted_f1 - a.weighted_f1;
  d.macro_f1 = b.macro_f1 - a.macro_f1;
  d.accuracy = b.accuracy - a.accuracy;
  return d;
}

inline std::string format_percent(double fraction, int decimals = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, fraction * 100.0);
  return buf;
}

// Signed percentage-point delta, e.g. "+1.98%".
inline std::string format_delta(double fraction, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.*f%%", decimals, fraction * 100.0);
  return buf;
}

// ---------------------------------------------------------------------------
// Output

inline Json to_json(const EvalReport& r) {
  Json per_class = Json::object();
  for (std::size_t i = 0; i < r.labels.size(); ++i)
    per_class[r.labels[i]] = Json{{"precision", r.precision[i]},
                                  {"recall", r.recall[i]},
                                  {"f1", r.per_class_f1[i]},
                                  {"support", r.support[i]}};
  Json columns = r.labels;
  columns.push_back("<unparseable>");
  Json j;
  j["schema"] = schema::kReport;
  j["labels"] = r.labels;
  j["weighted_f1"] = r.weighted_f1;
  j["macro_f1"] = r.macro_f1;
  j["accuracy"] = r.accuracy;
  j["weighted_f1_percent"] = format_percent(r.weighted_f1);
  j["macro_f1_percent"] = format_percent(r.macro_f1);
  j["per_class"] = per_class;
  j["confusion_columns"] = columns;
  j["confusion"] = r.confusion;
  j["empty_rows"] = r.empty_rows;
  j["unparseable_count"] = r.unparseable_count;
  j["total"] = r.total;
  return j;
}

inline EvalReport report_from_json(const Json& j) {
  expect_schema(j, schema::kReport, "report document");
  try {
    EvalReport r;
    r.labels = j.at("labels").get<std::vector<std::string>>();
    for (const auto& label : r.labels) {
      const auto& c = j.at("per_class").at(label);
      r.precision.push_back(c.at("precision").get<double>());
      r.recall.push_back(c.at("recall").get<double>());
      r.per_class_f1.push_back(c.at("f1").get<double>());
      r.support.push_back(c.at("support").get<std::size_t>());
    }
    r.weighted_f1 = j.at("weighted_f1").get<double>();
    r.macro_f1 = j.at("macro_f1").get<double>();
    r.accuracy = j.at("accuracy").get<double>();
    r.confusion = j.at("confusion").get<std::vector<std::vector<double>>>();
    r.empty_rows = j.at("empty_rows").get<std::vector<std::string>>();
    r.unparseable_count = j.at("unparseable_count").get<std::size_t>();
    r.total = j.at("total").get<std::size_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("report document: ") + e.what());
  }
}

inline std::string format_diff(const ReportDiff& d) {
  std::size_t width = 12;
  for (const auto& l : d.labels) width = std::max(width, l.size() + 2);
  std::string out;
  char buf[256];
  for (std::size_t i = 0; i < d.labels.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%-*s %10s\n", static_cast<int>(width), d.labels[i].c_str(),
                  format_delta(d.per_class_f1[i]).c_str());
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "weighted F1 %s  macro F1 %s\n", format_delta(d.weighted_f1).c_str(),
                format_delta(d.macro_f1).c_str());
  out += buf;
  return out;
}

inline std::string format_table(const EvalReport& r) {
  std::size_t width = 12;
  for (const auto& l : r.labels) width = std::max(width, l.size() + 2);
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s %10s %10s %10s %8s\n", static_cast<int>(width), "label", "precision", "recall",
                "f1", "support");
  out += buf;
  for (std::size_t i = 0; i < r.labels.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%-*s %10s %10s %10s %8zu\n", static_cast<int>(width), r.labels[i].c_str(),
                  format_percent(r.precision[i]).c_str(), format_percent(r.recall[i]).c_str(),
                  format_percent(r.per_class_f1[i]).c_str(), r.support[i]);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "weighted F1 %s  macro F1 %s  accuracy %s  unparseable %zu/%zu\n",
                format_percent(r.weighted_f1).c_str(), format_percent(r.macro_f1).c_str(),
                format_percent(r.accuracy).c_str(), r.unparseable_count, r.total);
  out += buf;
  return out;
}

}  // namespace speechcue::metrics
