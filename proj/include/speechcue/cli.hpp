#pragma once

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "speechcue/pipeline.hpp"

namespace speechcue::cli {

namespace detail {

inline const std::map<std::string, Grouping> kGroupings = {
    {"global", Grouping::Global}, {"speaker", Grouping::PerSpeaker}, {"group", Grouping::PerGroup}};

inline std::optional<Split> split_filter(const std::string& s) {
  if (s == "all") return std::nullopt;
  if (auto split = parse_split(s)) return split;
  throw Error(ErrorCode::InvalidArgument, "unknown split '" + s + "'");
}

}  // namespace detail

// Parses `argv` and runs one pipeline stage. Returns the process exit code:
// 0 on success, 1 on a pipeline error, CLI11's code on a usage error.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Prosodic speech cues for LLM emotion recognition", "speechcue"};
  app.set_config("--config", "", "TOML/INI file providing default flag values");
  app.require_subcommand(1);
  app.fallthrough();

  std::string labels = "auto";
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  app.add_option("--labels", labels, "label set: auto, iemocap, meld, or a comma-separated list")
      ->capture_default_str();
  app.add_option("--seed", seed, "seed for every randomized step")->capture_default_str();
  app.add_option("--jobs", jobs, "parallel workers for extract/classify")->capture_default_str()
      ->check(CLI::PositiveNumber);

  // extract
  pipeline::ExtractOptions ex;
  auto* extract = app.add_subcommand("extract", "decode audio and compute prosodic features");
  extract->add_option("--manifest", ex.manifest)->required();
  extract->add_option("--audio-root", ex.audio_root)->capture_default_str();
  extract->add_option("--out", ex.out)->required();
  extract->add_option("--f-min", ex.dsp.pitch.f_min, "pitch search floor (Hz)")->capture_default_str();
  extract->add_option("--f-max", ex.dsp.pitch.f_max, "pitch search ceiling (Hz)")->capture_default_str();

  // thresholds
  pipeline::ThresholdOptions th;
  std::string standardize = "none";
  auto* thresholds = app.add_subcommand("thresholds", "fit quantile thresholds over a feature file");
  thresholds->add_option("--manifest", th.manifest)->required();
  thresholds->add_option("--features", th.features)->required();
  thresholds->add_option("--out", th.out)->required();
  thresholds->add_option("--classes", th.classes)->capture_default_str()->check(CLI::IsMember({3, 4, 5, 6}));
  std::string group = "speaker";
  thresholds->add_option("--group", group, "threshold grouping: global, speaker, group")
      ->capture_default_str()
      ->check(CLI::IsMember({"global", "speaker", "group"}));
  thresholds->add_option("--min-count", th.min_count, "smallest group with its own statistics")
      ->capture_default_str();
  thresholds->add_option("--standardize", standardize, "z-score first: none, global, speaker, group")
      ->capture_default_str()
      ->check(CLI::IsMember({"none", "global", "speaker", "group"}));

  // describe
  pipeline::DescribeOptions de;
  auto* describe = app.add_subcommand("describe", "render feature descriptions and impressions");
  describe->add_option("--manifest", de.manifest)->required();
  describe->add_option("--features", de.features)->required();
  describe->add_option("--thresholds", de.thresholds)->required();
  describe->add_option("--out", de.out)->required();
  describe->add_option("--hedge-margin", de.hedge_margin)->capture_default_str();

  // prompt
  pipeline::PromptOptions pr;
  std::string annotations_path, mode = "with_description", context_feature = "pitch", split = "all",
                                speech_only_source = "description";
  auto* prompt = app.add_subcommand("prompt", "assemble prompts");
  prompt->add_option("--manifest", pr.manifest)->required();
  prompt->add_option("--annotations", annotations_path);
  prompt->add_option("--out", pr.out)->required();
  prompt->add_option("--mode", mode)->capture_default_str()->check(
      CLI::IsMember({"text_only", "with_description", "with_impression", "speech_only"}));
  prompt->add_option("--window", pr.config.context_window)->capture_default_str();
  prompt->add_option("--context-feature", context_feature)->capture_default_str()->check(
      CLI::IsMember({"none", "pitch", "volume", "all"}));
  prompt->add_option("--context-depth", pr.config.context_depth)->capture_default_str();
  prompt->add_option("--speech-only-source", speech_only_source)->capture_default_str()->check(
      CLI::IsMember({"description", "impression"}));
  prompt->add_option("--instruction", pr.config.instruction);
  prompt->add_option("--split", split, "train, dev, test or all")->capture_default_str();
  prompt->add_flag("--labeled-only", pr.labeled_only, "skip utterances without a gold label");

  // classify
  pipeline::ClassifyOptions cl;
  auto* classify = app.add_subcommand("classify", "zero-shot classification through a chat-completion endpoint");
  classify->add_option("--prompts", cl.prompts)->required();
  classify->add_option("--manifest", cl.manifest)->required();
  classify->add_option("--out", cl.out)->required();
  classify->add_option("--base-url", cl.endpoint.base_url)->required();
  classify->add_option("--model", cl.endpoint.model_name)->required();
  classify->add_option("--timeout", cl.endpoint.timeout_s)->capture_default_str();
  classify->add_option("--retries", cl.endpoint.max_retries)->capture_default_str();
  classify->add_option("--backoff", cl.endpoint.initial_backoff_s, "first retry delay (s)")->capture_default_str();
  classify->add_option("--temperature", cl.endpoint.temperature)->capture_default_str();
  bool no_latency = false;
  classify->add_flag("--no-latency", no_latency, "omit latency_ms from the output");

  // export-finetune
  std::string ft_prompts, ft_out;
  auto* exportft = app.add_subcommand("export-finetune", "write prompt/completion records for external trainers");
  exportft->add_option("--prompts", ft_prompts)->required();
  exportft->add_option("--out", ft_out)->required();

  // eval-ml
  pipeline::EvalMlOptions ml;
  std::string ml_thresholds, ml_out, ml_model_out, encoding = "numerical";
  auto* evalml = app.add_subcommand("eval-ml", "feature-only MLP baseline");
  evalml->add_option("--manifest", ml.manifest)->required();
  evalml->add_option("--features", ml.features)->required();
  evalml->add_option("--thresholds", ml_thresholds, "threshold document (onehot encoding)");
  evalml->add_option("--encoding", encoding)->capture_default_str()->check(CLI::IsMember({"numerical", "onehot"}));
  evalml->add_option("--out", ml_out);
  evalml->add_option("--model-out", ml_model_out);
  evalml->add_option("--epochs", ml.train.epochs)->capture_default_str();
  evalml->add_option("--learning-rate", ml.train.learning_rate)->capture_default_str();
  evalml->add_option("--batch-size", ml.train.batch_size)->capture_default_str();
  evalml->add_option("--l2", ml.train.l2)->capture_default_str();

  // score
  pipeline::ScoreOptions sc;
  std::string sc_out, sc_compare;
  auto* score = app.add_subcommand("score", "weighted/macro F1 and confusion matrix");
  score->add_option("--pred", sc.predictions)->required();
  score->add_option("--gold", sc.gold)->required();
  score->add_option("--out", sc_out);
  score->add_option("--compare", sc_compare, "earlier report to print deltas against");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (*extract) {
      ex.labels = labels;
      ex.jobs = jobs;
      auto n = pipeline::run_extract(ex, err);
      out << "extract: wrote " << n << " feature records to " << ex.out.string() << "\n";
    } else if (*thresholds) {
      th.labels = labels;
      th.group = detail::kGroupings.at(group);
      if (standardize != "none") th.standardize = detail::kGroupings.at(standardize);
      pipeline::run_thresholds(th);
      out << "thresholds: wrote " << th.out.string() << "\n";
    } else if (*describe) {
      de.labels = labels;
      auto n = pipeline::run_describe(de);
      out << "describe: wrote " << n << " annotations to " << de.out.string() << "\n";
    } else if (*prompt) {
      pr.labels = labels;
      if (!annotations_path.empty()) pr.annotations = annotations_path;
      pr.config.mode = parse_prompt_mode(mode);
      pr.config.context_feature = parse_context_feature(context_feature);
      pr.config.speech_only_use_impression = speech_only_source == "impression";
      pr.split = detail::split_filter(split);
      auto n = pipeline::run_prompt(pr);
      out << "prompt: wrote " << n << " prompts to " << pr.out.string() << "\n";
    } else if (*classify) {
      cl.labels = labels;
      cl.endpoint.api_key = inference::EndpointConfig::api_key_from_env();
      cl.endpoint.max_concurrency = jobs;
      cl.record_latency = !no_latency;
      auto predictions = pipeline::run_classify(cl);
      std::size_t unparseable = 0;
      for (const auto& p : predictions) unparseable += p.parsed_label ? 0 : 1;
      out << "classify: " << predictions.size() << " predictions (" << unparseable << " unparseable) to "
          << cl.out.string() << "\n";
    } else if (*exportft) {
      auto n = pipeline::run_export_finetune(ft_prompts, ft_out);
      out << "export-finetune: wrote " << n << " records to " << ft_out << "\n";
    } else if (*evalml) {
      ml.labels = labels;
      ml.encoding = baseline::parse_encoding(encoding);
      ml.train.seed = seed;
      if (!ml_thresholds.empty()) ml.thresholds = ml_thresholds;
      if (!ml_out.empty()) ml.out = ml_out;
      if (!ml_model_out.empty()) ml.model_out = ml_model_out;
      pipeline::run_eval_ml(ml, out);
    } else if (*score) {
      sc.labels = labels;
      if (!sc_out.empty()) sc.out = sc_out;
      if (!sc_compare.empty()) sc.compare = sc_compare;
      pipeline::run_score(sc, out);
    }
  } catch (const Error& e) {
    err << "speechcue " << stage << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "speechcue " << stage << ": " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace speechcue::cli
