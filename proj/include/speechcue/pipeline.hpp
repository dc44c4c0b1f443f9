#pragma once

// File-to-file pipeline stages. Each stage reads the line-delimited output of
// its upstream stage (checking the embedded schema tag) and writes its own.

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "speechcue/baseline.hpp"
#include "speechcue/corpus.hpp"
#include "speechcue/describe.hpp"
#include "speechcue/dsp.hpp"
#include "speechcue/error.hpp"
#include "speechcue/inference.hpp"
#include "speechcue/jsonl.hpp"
#include "speechcue/metrics.hpp"
#include "speechcue/prompt.hpp"
#include "speechcue/thresholds.hpp"

namespace speechcue::pipeline {

namespace fs = std::filesystem;

// "auto" (labels present in the manifest, sorted), "iemocap", "meld", or a
// comma-separated list.
inline std::optional<std::vector<std::string>> resolve_label_spec(const std::string& spec) {
  if (spec.empty() || spec == "auto") return std::nullopt;
  if (auto ds = parse_dataset(spec); ds && *ds != Dataset::Custom) return label_set_for(*ds);
  std::vector<std::string> labels;
  std::string current;
  for (char c : spec + ",") {
    if (c == ',') {
      auto t = text::trim(current);
      if (!t.empty()) labels.push_back(t);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  return labels;
}

inline Manifest load_manifest_with(const fs::path& path, const std::string& label_spec) {
  return load_manifest(path, resolve_label_spec(label_spec));
}

inline std::map<std::string, dsp::ProsodicFeatures> read_features(const fs::path& path) {
  std::map<std::string, dsp::ProsodicFeatures> out;
  for (const auto& line : read_jsonl(path)) {
    try {
      out.emplace(line.value.at("utterance_id").get<std::string>(), dsp::features_from_json(line.value));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, path.string() + ":" + std::to_string(line.line_number) + ": " + e.what());
    }
  }
  return out;
}

inline FeatureSet to_feature_set(const std::map<std::string, dsp::ProsodicFeatures>& features) {
  FeatureSet out;
  for (const auto& [id, f] : features) out.emplace(id, feature_values(f));
  return out;
}

inline AnnotationIndex read_annotations(const fs::path& path) {
  AnnotationIndex out;
  for (const auto& line : read_jsonl(path)) {
    auto a = annotation_from_json(line.value);
    out.emplace(a.utterance_id, std::move(a));
  }
  return out;
}

inline std::vector<PromptRecord> read_prompts(const fs::path& path) {
  std::vector<PromptRecord> out;
  for (const auto& line : read_jsonl(path)) out.push_back(prompt_record_from_json(line.value));
  return out;
}

// Runs `body(i)` for i in [0, n) on up to `jobs` threads; the first exception
// stops the remaining work and is rethrown.
template <typename Body>
void parallel_for(std::size_t n, std::size_t jobs, Body body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;
  std::mutex mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n && !stop; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        stop = true;
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// extract

struct ExtractOptions {
  fs::path manifest;
  fs::path audio_root = ".";
  fs::path out;
  std::string labels = "auto";
  dsp::DspConfig dsp;
  std::size_t jobs = 1;
};

inline std::size_t run_extract(const ExtractOptions& opt, std::ostream& log = std::cerr) {
  auto manifest = load_manifest_with(opt.manifest, opt.labels);
  std::vector<const Utterance*> todo;
  for (const auto& u : manifest.utterances()) {
    if (u.audio_path) todo.push_back(&u);
    else log << "extract: skipping " << u.utterance_id << " (no audio)\n";
  }
  std::vector<Json> records(todo.size());
  parallel_for(todo.size(), opt.jobs, [&](std::size_t i) {
    const auto& u = *todo[i];
    try {
      auto clip = dsp::decode_wav(opt.audio_root / *u.audio_path);
      records[i] = dsp::to_json(u.utterance_id, dsp::extract_features(clip, u.transcript, opt.dsp));
    } catch (const Error& e) {
      throw Error(e.code(), "utterance " + u.utterance_id + ": " + e.detail());
    }
  });
  write_jsonl(opt.out, records);
  return records.size();
}

// ---------------------------------------------------------------------------
// thresholds

struct ThresholdOptions {
  fs::path manifest;
  fs::path features;
  fs::path out;
  std::string labels = "auto";
  int classes = 5;
  Grouping group = Grouping::PerSpeaker;
  std::size_t min_count = 24;
  std::optional<Grouping> standardize;  // nullopt skips standardization
};

inline FeatureModel run_thresholds(const ThresholdOptions& opt) {
  auto manifest = load_manifest_with(opt.manifest, opt.labels);
  auto features = to_feature_set(read_features(opt.features));
  NormalizationPolicy policy{opt.group, opt.min_count};
  std::optional<NormalizationPolicy> standardize;
  if (opt.standardize) standardize = NormalizationPolicy{*opt.standardize, opt.min_count};
  auto model = fit_feature_model(features, manifest, QuantileScheme::for_classes(opt.classes), policy, standardize);
  write_json_document(opt.out, to_json(model));
  return model;
}

// ---------------------------------------------------------------------------
// describe

struct DescribeOptions {
  fs::path manifest;
  fs::path features;
  fs::path thresholds;
  fs::path out;
  std::string labels = "auto";
  double hedge_margin = 0.05;
};

inline std::size_t run_describe(const DescribeOptions& opt) {
  auto manifest = load_manifest_with(opt.manifest, opt.labels);
  auto features = read_features(opt.features);
  auto model = feature_model_from_json(read_json_document(opt.thresholds));
  for (const auto& [id, f] : features) manifest.at(id);  // every record must name a known utterance
  std::vector<Json> records;
  for (const auto& u : manifest.utterances()) {
    auto it = features.find(u.utterance_id);
    if (it == features.end()) continue;
    auto cf = model.categorize(feature_values(it->second), u);
    records.push_back(to_json(annotate(u.utterance_id, cf, opt.hedge_margin)));
  }
  write_jsonl(opt.out, records);
  return records.size();
}

// ---------------------------------------------------------------------------
// prompt

struct PromptOptions {
  fs::path manifest;
  std::optional<fs::path> annotations;
  fs::path out;
  std::string labels = "auto";
  PromptConfig config;
  std::optional<Split> split;  // nullopt = every split
  bool labeled_only = false;
};

inline std::vector<PromptRecord> build_prompt_records(const Manifest& manifest, const AnnotationIndex& annotations,
                                                      const PromptConfig& config, std::optional<Split> split,
                                                      bool labeled_only) {
  std::vector<PromptRecord> out;
  for (const auto& u : manifest.utterances()) {
    if (split && u.split != *split) continue;
    if (labeled_only && !u.label) continue;
    out.push_back(make_prompt_record(manifest, u.utterance_id, annotations, config));
  }
  return out;
}

inline std::size_t run_prompt(const PromptOptions& opt) {
  auto manifest = load_manifest_with(opt.manifest, opt.labels);
  AnnotationIndex annotations;
  if (opt.annotations) annotations = read_annotations(*opt.annotations);
  auto records = build_prompt_records(manifest, annotations, opt.config, opt.split, opt.labeled_only);
  std::vector<Json> lines;
  for (const auto& r : records) lines.push_back(to_json(r));
  write_jsonl(opt.out, lines);
  return lines.size();
}

// ---------------------------------------------------------------------------
// classify

struct ClassifyOptions {
  fs::path prompts;
  fs::path manifest;
  fs::path out;
  std::string labels = "auto";
  inference::EndpointConfig endpoint;
  bool record_latency = true;
};

inline std::vector<inference::Prediction> run_classify(const ClassifyOptions& opt) {
  auto manifest = load_manifest_with(opt.manifest, opt.labels);
  auto prompts = read_prompts(opt.prompts);
  auto predictions = inference::classify_zero_shot(prompts, opt.endpoint, manifest.label_set());
  std::vector<Json> lines;
  for (const auto& p : predictions) lines.push_back(inference::to_json(p, opt.record_latency));
  write_jsonl(opt.out, lines);
  return predictions;
}

// ---------------------------------------------------------------------------
// export-finetune

inline std::size_t run_export_finetune(const fs::path& prompts, const fs::path& out) {
  auto records = read_prompts(prompts);
  return inference::export_finetune_records(records, out);
}

// ---------------------------------------------------------------------------
// score

struct ScoreOptions {
  fs::path predictions;
  fs::path gold;
  std::optional<fs::path> out;
  std::optional<fs::path> compare;  // earlier report to diff against
  std::string labels = "auto";
};

// Prediction files are either classify output or anything carrying a
// "label" per utterance (a manifest scores as perfect predictions).
inline std::map<std::string, std::optional<std::string>> read_predicted_labels(const fs::path& path) {
  std::map<std::string, std::optional<std::string>> out;
  for (const auto& line : read_jsonl(path)) {
    const auto& j = line.value;
    std::string key;
    if (j.contains("schema")) {
      expect_schema(j, schema::kPredictions, "prediction record");
      key = "parsed_label";
    } else {
      key = "label";
    }
    try {
      const auto& v = j.at(key);
      out[j.at("utterance_id").get<std::string>()] =
          v.is_null() ? std::nullopt : std::optional<std::string>(text::to_lower(text::trim(v.get<std::string>())));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, path.string() + ":" + std::to_string(line.line_number) + ": " + e.what());
    }
  }
  return out;
}

inline metrics::EvalReport run_score(const ScoreOptions& opt, std::ostream& table) {
  auto manifest = load_manifest_with(opt.gold, opt.labels);
  auto predicted = read_predicted_labels(opt.predictions);
  std::vector<std::string> gold;
  std::vector<std::optional<std::string>> pred;
  for (const auto& [id, label] : predicted) {
    const auto& u = manifest.at(id);
    if (!u.label) continue;
    gold.push_back(*u.label);
    pred.push_back(label);
  }
  auto report = metrics::score(gold, pred, manifest.label_set());
  table << metrics::format_table(report);
  if (opt.compare) {
    auto before = metrics::report_from_json(read_json_document(*opt.compare));
    table << "delta vs " << opt.compare->string() << ":\n" << metrics::format_diff(metrics::diff_reports(before, report));
  }
  if (opt.out) write_json_document(*opt.out, metrics::to_json(report));
  return report;
}

// ---------------------------------------------------------------------------
// eval-ml

struct EvalMlOptions {
  fs::path manifest;
  fs::path features;
  std::optional<fs::path> thresholds;  // required for onehot
  std::optional<fs::path> out;
  std::optional<fs::path> model_out;
  std::string labels = "auto";
  baseline::Encoding encoding = baseline::Encoding::Numerical;
  baseline::TrainConfig train;
  std::size_t random_trials = 10000;
};

struct EvalMlResult {
  metrics::EvalReport report;
  double random_weighted_f1 = 0.0;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

// Trains on the train split and scores the test split (dev when the manifest
// has no test utterances). Numerical vectors are z-scored with statistics
// from the training utterances.
inline EvalMlResult run_eval_ml(const EvalMlOptions& opt, std::ostream& table) {
  auto manifest = load_manifest_with(opt.manifest, opt.labels);
  auto raw = read_features(opt.features);
  const auto& labels = manifest.label_set();

  bool has_test = std::any_of(manifest.utterances().begin(), manifest.utterances().end(), [&](const Utterance& u) {
    return u.split == Split::Test && u.label && raw.count(u.utterance_id);
  });
  const Split held_out = has_test ? Split::Test : Split::Dev;

  std::optional<FeatureModel> feature_model;
  std::optional<Standardizer> standardizer;
  if (opt.encoding == baseline::Encoding::OneHot) {
    if (!opt.thresholds) throw Error(ErrorCode::MissingInput, "onehot encoding needs --thresholds");
    feature_model = feature_model_from_json(read_json_document(*opt.thresholds));
  } else {
    FeatureSet train_set;
    for (const auto& [id, f] : raw)
      if (manifest.at(id).split == Split::Train) train_set.emplace(id, feature_values(f));
    if (train_set.empty()) throw Error(ErrorCode::EmptyInput, "no training utterances with features");
    standardizer = fit_standardizer(train_set, manifest, NormalizationPolicy{Grouping::Global, 2});
  }

  std::vector<std::vector<double>> train_x, test_x;
  std::vector<int> train_y;
  std::vector<std::string> test_gold;
  for (const auto& [id, f] : raw) {
    const auto& u = manifest.at(id);
    if (!u.label || (u.split != Split::Train && u.split != held_out)) continue;
    auto values = feature_values(f);
    baseline::FeatureVector v = feature_model
                                    ? baseline::encode(feature_model->categorize(values, u), feature_model->table.scheme.num_classes)
                                    : baseline::encode(standardizer->apply(values, u));
    if (u.split == Split::Train) {
      train_x.push_back(std::move(v.values));
      train_y.push_back(static_cast<int>(std::find(labels.begin(), labels.end(), *u.label) - labels.begin()));
    } else {
      test_x.push_back(std::move(v.values));
      test_gold.push_back(*u.label);
    }
  }
  if (train_x.empty() || test_x.empty()) throw Error(ErrorCode::EmptyInput, "need labeled train and held-out utterances");

  auto model = baseline::train(train_x, train_y, labels.size(), opt.train);
  std::vector<std::optional<std::string>> predicted;
  for (const auto& p : baseline::predict(model, test_x)) predicted.push_back(labels[static_cast<std::size_t>(p.label)]);

  EvalMlResult result;
  result.report = metrics::score(test_gold, predicted, labels);
  result.train_size = train_x.size();
  result.test_size = test_x.size();
  std::vector<double> distribution(labels.size(), 0.0);
  for (const auto& g : test_gold)
    distribution[static_cast<std::size_t>(std::find(labels.begin(), labels.end(), g) - labels.begin())] +=
        1.0 / static_cast<double>(test_gold.size());
  result.random_weighted_f1 = baseline::expected_random_f1(distribution, opt.random_trials, opt.train.seed);

  table << "encoding " << baseline::to_string(opt.encoding) << ", train " << result.train_size << ", held-out "
        << result.test_size << " (" << to_string(held_out) << ")\n"
        << metrics::format_table(result.report) << "random-guess weighted F1 "
        << metrics::format_percent(result.random_weighted_f1) << "\n";

  if (opt.out) {
    auto j = metrics::to_json(result.report);
    j["encoding"] = std::string(baseline::to_string(opt.encoding));
    j["random_weighted_f1"] = result.random_weighted_f1;
    j["train_size"] = result.train_size;
    j["test_size"] = result.test_size;
    write_json_document(*opt.out, j);
  }
  if (opt.model_out) {
    int classes = feature_model ? feature_model->table.scheme.num_classes : 0;
    write_json_document(*opt.model_out, baseline::to_json(model, labels, opt.encoding, classes));
  }
  return result;
}

}  // namespace speechcue::pipeline
