#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "speechcue/corpus.hpp"
#include "speechcue/describe.hpp"
#include "speechcue/error.hpp"
#include "speechcue/jsonl.hpp"
#include "speechcue/text.hpp"

namespace speechcue {

// ---------------------------------------------------------------------------
// Label sets

enum class Dataset { Iemocap, Meld, Custom };

inline std::optional<Dataset> parse_dataset(std::string_view s) {
  auto lower = text::to_lower(s);
  if (lower == "iemocap") return Dataset::Iemocap;
  if (lower == "meld") return Dataset::Meld;
  if (lower == "custom") return Dataset::Custom;
  return std::nullopt;
}

inline std::vector<std::string> label_set_for(Dataset dataset, const std::vector<std::string>& custom = {}) {
  switch (dataset) {
    case Dataset::Iemocap: return {"anger", "happiness", "excitement", "sadness", "frustration", "neutral"};
    case Dataset::Meld: return {"anger", "disgust", "fear", "joy", "neutral", "sadness", "surprise"};
    case Dataset::Custom: return custom;
  }
  return custom;
}

// ---------------------------------------------------------------------------
// Configuration

enum class PromptMode { TextOnly, WithDescription, WithImpression, SpeechOnly };
enum class ContextFeature { None, Pitch, Volume, All };

inline std::string_view to_string(PromptMode m) {
  switch (m) {
    case PromptMode::TextOnly: return "text_only";
    case PromptMode::WithDescription: return "with_description";
    case PromptMode::WithImpression: return "with_impression";
    case PromptMode::SpeechOnly: return "speech_only";
  }
  return "";
}

inline PromptMode parse_prompt_mode(std::string_view s) {
  if (s == "text_only") return PromptMode::TextOnly;
  if (s == "with_description") return PromptMode::WithDescription;
  if (s == "with_impression") return PromptMode::WithImpression;
  if (s == "speech_only") return PromptMode::SpeechOnly;
  throw Error(ErrorCode::InvalidArgument, "unknown prompt mode '" + std::string(s) + "'");
}

inline std::string_view to_string(ContextFeature f) {
  switch (f) {
    case ContextFeature::None: return "none";
    case ContextFeature::Pitch: return "pitch";
    case ContextFeature::Volume: return "volume";
    case ContextFeature::All: return "all";
  }
  return "";
}

inline ContextFeature parse_context_feature(std::string_view s) {
  if (s == "none") return ContextFeature::None;
  if (s == "pitch") return ContextFeature::Pitch;
  if (s == "volume") return ContextFeature::Volume;
  if (s == "all") return ContextFeature::All;
  throw Error(ErrorCode::InvalidArgument, "unknown context feature '" + std::string(s) + "'");
}

inline constexpr std::string_view kDefaultInstruction = "You are an expert in sentiment and emotion analysis.";

struct PromptConfig {
  PromptMode mode = PromptMode::WithDescription;
  std::size_t context_window = 12;
  ContextFeature context_feature = ContextFeature::Pitch;
  std::size_t context_depth = 3;
  std::string instruction = std::string(kDefaultInstruction);
  bool speech_only_use_impression = false;  // speech_only renders the description unless set

  void validate() const {
    if (mode != PromptMode::SpeechOnly && context_depth > context_window)
      throw Error(ErrorCode::InvalidArgument, "context_depth must not exceed context_window");
  }
};

struct PromptBundle {
  std::string instruction;
  std::string context_block;
  std::string speech_block;
  std::string question;
  std::string full_text;
};

using AnnotationIndex = std::map<std::string, UtteranceAnnotation>;

// ---------------------------------------------------------------------------
// Assembly

inline std::string label_list(const std::vector<std::string>& labels) { return text::join(labels, ", "); }

inline std::string context_question(const std::vector<std::string>& labels, bool with_speech) {
  if (with_speech)
    return "Considering both the conversational context and the described speech characteristics, select exactly "
           "one emotion label for the last utterance from: " +
           label_list(labels) + ". Answer with the label only.";
  return "Considering the conversational context, select exactly one emotion label for the last utterance from: " +
         label_list(labels) + ". Answer with the label only.";
}

inline std::string speech_only_question(const std::vector<std::string>& labels) {
  return "Based only on the described speech characteristics, select exactly one emotion label for the utterance "
         "from: " +
         label_list(labels) + ". Answer with the label only.";
}

// Blocks joined by a blank line; empty blocks are dropped.
inline void assemble(PromptBundle& b) {
  std::vector<std::string> parts;
  for (const auto* block : {&b.instruction, &b.context_block, &b.speech_block, &b.question})
    if (!block->empty()) parts.push_back(*block);
  b.full_text = text::join(parts, "\n\n");
}

inline std::string context_annotation(const UtteranceAnnotation& a, ContextFeature feature) {
  switch (feature) {
    case ContextFeature::None: return {};
    case ContextFeature::Pitch: return "(pitch: " + pitch_phrase(a.levels) + ")";
    case ContextFeature::Volume: return "(volume: " + volume_phrase(a.levels) + ")";
    case ContextFeature::All: return "(" + a.description + ")";
  }
  return {};
}

inline const UtteranceAnnotation& require_annotation(const AnnotationIndex& annotations, const std::string& id) {
  auto it = annotations.find(id);
  if (it == annotations.end()) throw Error(ErrorCode::MissingAnnotation, id);
  return it->second;
}

inline std::string speech_text(const UtteranceAnnotation& a, PromptMode mode) {
  return mode == PromptMode::WithImpression || mode == PromptMode::SpeechOnly ? a.impression : a.description;
}

inline PromptBundle build_prompt(const Manifest& manifest, const std::string& target,
                                 const AnnotationIndex& annotations, const PromptConfig& config) {
  config.validate();
  const auto& utt = manifest.at(target);
  if (config.mode == PromptMode::SpeechOnly)
    throw Error(ErrorCode::InvalidArgument, "use build_speech_only_prompt for speech_only mode");

  std::vector<Utterance> context = config.context_window == 0
                                       ? std::vector<Utterance>{utt}
                                       : dialogue_context(manifest, target, config.context_window);
  const std::size_t preceding = context.size() - 1;
  const bool with_speech = config.mode != PromptMode::TextOnly;
  // Only the trailing `context_depth` non-target lines carry annotations.
  const std::size_t annotated_from = !with_speech || config.context_feature == ContextFeature::None
                                         ? preceding
                                         : preceding - std::min(config.context_depth, preceding);

  std::vector<std::string> lines;
  lines.push_back("Conversation:");
  for (std::size_t i = 0; i < context.size(); ++i) {
    std::string line = context[i].speaker_id + ": " + context[i].transcript;
    if (i >= annotated_from && i < preceding)
      line += " " + context_annotation(require_annotation(annotations, context[i].utterance_id), config.context_feature);
    lines.push_back(std::move(line));
  }

  PromptBundle b;
  b.instruction = config.instruction;
  b.context_block = text::join(lines, "\n");
  if (with_speech) {
    const auto& a = require_annotation(annotations, target);
    b.speech_block = "Speech characteristics of the last utterance (" + utt.speaker_id + "): " +
                     speech_text(a, config.mode);
  }
  b.question = context_question(manifest.label_set(), with_speech);
  assemble(b);
  return b;
}

// Speech-only variant: no transcript text anywhere in the prompt.
inline PromptBundle build_speech_only_prompt(const UtteranceAnnotation* annotation,
                                             const std::vector<std::string>& label_set,
                                             bool use_impression,
                                             std::string_view instruction = kDefaultInstruction) {
  if (!annotation) throw Error(ErrorCode::MissingAnnotation, "speech-only prompt needs an annotation");
  PromptBundle b;
  b.instruction = std::string(instruction);
  b.speech_block = "Speech characteristics of the utterance: " +
                   (use_impression ? annotation->impression : annotation->description);
  b.question = speech_only_question(label_set);
  assemble(b);
  return b;
}

struct PromptRecord {
  std::string utterance_id;
  PromptMode mode = PromptMode::TextOnly;
  std::string full_text;
  std::optional<std::string> gold_label;
};

inline PromptRecord make_prompt_record(const Manifest& manifest, const std::string& target,
                                       const AnnotationIndex& annotations, const PromptConfig& config) {
  const auto& utt = manifest.at(target);
  PromptBundle b = config.mode == PromptMode::SpeechOnly
                       ? build_speech_only_prompt(
                             [&]() -> const UtteranceAnnotation* {
                               auto it = annotations.find(target);
                               return it == annotations.end() ? nullptr : &it->second;
                             }(),
                             manifest.label_set(), config.speech_only_use_impression, config.instruction)
                       : build_prompt(manifest, target, annotations, config);
  return {target, config.mode, std::move(b.full_text), utt.label};
}

inline Json to_json(const PromptRecord& r) {
  Json j;
  j["schema"] = schema::kPrompts;
  j["utterance_id"] = r.utterance_id;
  j["mode"] = std::string(to_string(r.mode));
  j["full_text"] = r.full_text;
  j["gold_label"] = r.gold_label ? Json(*r.gold_label) : Json(nullptr);
  return j;
}

inline PromptRecord prompt_record_from_json(const Json& j) {
  expect_schema(j, schema::kPrompts, "prompt record");
  try {
    PromptRecord r;
    r.utterance_id = j.at("utterance_id").get<std::string>();
    r.mode = parse_prompt_mode(j.at("mode").get<std::string>());
    r.full_text = j.at("full_text").get<std::string>();
    if (!j.at("gold_label").is_null()) r.gold_label = j.at("gold_label").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("prompt record: ") + e.what());
  }
}

}  // namespace speechcue
