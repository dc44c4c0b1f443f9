#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "speechcue/error.hpp"
#include "speechcue/jsonl.hpp"
#include "speechcue/text.hpp"

namespace speechcue {

enum class Split { Train, Dev, Test };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "train";
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "dev") return Split::Dev;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

struct Utterance {
  std::string dataset_id;
  std::string dialogue_id;
  std::uint32_t turn_index = 0;
  std::string utterance_id;
  std::string speaker_id;
  std::optional<std::string> speaker_group;
  std::string transcript;
  std::optional<std::string> label;
  std::optional<std::string> audio_path;
  Split split = Split::Train;

  bool operator==(const Utterance&) const = default;
};

// Immutable, validated set of utterances ordered by (dialogue_id, turn_index).
class Manifest {
 public:
  // Validates every invariant; `label_set` of nullopt derives the sorted set
  // of distinct labels present.
  static Manifest from_utterances(std::vector<Utterance> utterances,
                                  std::optional<std::vector<std::string>> label_set = std::nullopt) {
    Manifest m;
    for (auto& u : utterances) {
      if (u.label) {
        *u.label = text::to_lower(text::trim(*u.label));
        if (u.label->empty()) u.label.reset();
      }
    }
    std::vector<std::string> labels;
    if (label_set) {
      for (const auto& l : *label_set) {
        auto norm = text::to_lower(text::trim(l));
        if (std::find(labels.begin(), labels.end(), norm) != labels.end())
          throw Error(ErrorCode::InvalidArgument, "label_set repeats '" + norm + "'");
        labels.push_back(std::move(norm));
      }
    } else {
      std::set<std::string> distinct;
      for (const auto& u : utterances)
        if (u.label) distinct.insert(*u.label);
      labels.assign(distinct.begin(), distinct.end());
    }
    if (labels.size() < 2)
      throw Error(ErrorCode::InvalidArgument, "label_set needs at least 2 labels");

    std::unordered_map<std::string, std::size_t> seen;
    for (const auto& u : utterances) {
      if (!seen.emplace(u.utterance_id, 0).second)
        throw Error(ErrorCode::DuplicateUtteranceId, u.utterance_id);
      if (u.label && std::find(labels.begin(), labels.end(), *u.label) == labels.end())
        throw Error(ErrorCode::UnknownLabel, *u.label + " (utterance " + u.utterance_id + ")");
      if (text::trim(u.transcript).empty() && !u.audio_path)
        throw Error(ErrorCode::MalformedRecord,
                    "utterance " + u.utterance_id + " has neither transcript nor audio");
    }

    std::stable_sort(utterances.begin(), utterances.end(), [](const Utterance& a, const Utterance& b) {
      return std::tie(a.dialogue_id, a.turn_index) < std::tie(b.dialogue_id, b.turn_index);
    });

    for (std::size_t i = 0; i < utterances.size(); ++i) {
      const auto& u = utterances[i];
      bool first_of_dialogue = i == 0 || utterances[i - 1].dialogue_id != u.dialogue_id;
      std::uint32_t expected = first_of_dialogue ? 0 : utterances[i - 1].turn_index + 1;
      if (u.turn_index != expected)
        throw Error(ErrorCode::GapInTurnIndex, u.dialogue_id);
      if (first_of_dialogue) m.dialogue_start_[u.dialogue_id] = i;
      m.index_[u.utterance_id] = i;
    }
    m.utterances_ = std::move(utterances);
    m.label_set_ = std::move(labels);
    return m;
  }

  const std::vector<Utterance>& utterances() const noexcept { return utterances_; }
  const std::vector<std::string>& label_set() const noexcept { return label_set_; }
  std::size_t size() const noexcept { return utterances_.size(); }

  const Utterance* find(std::string_view utterance_id) const {
    auto it = index_.find(std::string(utterance_id));
    return it == index_.end() ? nullptr : &utterances_[it->second];
  }

  const Utterance& at(std::string_view utterance_id) const {
    if (const auto* u = find(utterance_id)) return *u;
    throw Error(ErrorCode::UnknownUtterance, std::string(utterance_id));
  }

  std::size_t position(std::string_view utterance_id) const {
    auto it = index_.find(std::string(utterance_id));
    if (it == index_.end()) throw Error(ErrorCode::UnknownUtterance, std::string(utterance_id));
    return it->second;
  }

  std::size_t dialogue_start(const std::string& dialogue_id) const { return dialogue_start_.at(dialogue_id); }

  bool operator==(const Manifest& other) const {
    return utterances_ == other.utterances_ && label_set_ == other.label_set_;
  }

 private:
  std::vector<Utterance> utterances_;
  std::vector<std::string> label_set_;
  std::unordered_map<std::string, std::size_t> index_;
  std::unordered_map<std::string, std::size_t> dialogue_start_;
};

namespace detail {

inline std::string required_string(const Json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string())
    throw Error(ErrorCode::MalformedRecord,
                "line " + std::to_string(line) + ": '" + key + "' must be a string");
  return it->get<std::string>();
}

inline std::optional<std::string> nullable_string(const Json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": missing '" + key + "'");
  if (it->is_null()) return std::nullopt;
  if (!it->is_string())
    throw Error(ErrorCode::MalformedRecord,
                "line " + std::to_string(line) + ": '" + key + "' must be a string or null");
  return it->get<std::string>();
}

inline constexpr std::string_view kManifestKeys[] = {
    "dataset_id", "dialogue_id", "turn_index", "utterance_id", "speaker_id",
    "speaker_group", "transcript", "label", "audio_path", "split"};

}  // namespace detail

inline Utterance utterance_from_json(const Json& obj, std::size_t line) {
  if (obj.size() != std::size(detail::kManifestKeys))
    throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": expected exactly " +
                                                std::to_string(std::size(detail::kManifestKeys)) + " keys");
  for (auto key : detail::kManifestKeys)
    if (!obj.contains(std::string(key)))
      throw Error(ErrorCode::MalformedRecord,
                  "line " + std::to_string(line) + ": missing '" + std::string(key) + "'");
  Utterance u;
  u.dataset_id = detail::required_string(obj, "dataset_id", line);
  u.dialogue_id = detail::required_string(obj, "dialogue_id", line);
  const auto& turn = obj.at("turn_index");
  if (!turn.is_number_integer() || turn.get<std::int64_t>() < 0)
    throw Error(ErrorCode::MalformedRecord,
                "line " + std::to_string(line) + ": 'turn_index' must be a non-negative integer");
  u.turn_index = turn.get<std::uint32_t>();
  u.utterance_id = detail::required_string(obj, "utterance_id", line);
  u.speaker_id = detail::required_string(obj, "speaker_id", line);
  u.speaker_group = detail::nullable_string(obj, "speaker_group", line);
  u.transcript = detail::required_string(obj, "transcript", line);
  u.label = detail::nullable_string(obj, "label", line);
  u.audio_path = detail::nullable_string(obj, "audio_path", line);
  auto split = parse_split(detail::required_string(obj, "split", line));
  if (!split)
    throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": bad 'split'");
  u.split = *split;
  return u;
}

inline Json to_json(const Utterance& u) {
  auto nullable = [](const std::optional<std::string>& v) { return v ? Json(*v) : Json(nullptr); };
  Json j;
  j["dataset_id"] = u.dataset_id;
  j["dialogue_id"] = u.dialogue_id;
  j["turn_index"] = u.turn_index;
  j["utterance_id"] = u.utterance_id;
  j["speaker_id"] = u.speaker_id;
  j["speaker_group"] = nullable(u.speaker_group);
  j["transcript"] = u.transcript;
  j["label"] = nullable(u.label);
  j["audio_path"] = nullable(u.audio_path);
  j["split"] = std::string(to_string(u.split));
  return j;
}

inline Manifest load_manifest(const std::filesystem::path& path,
                              std::optional<std::vector<std::string>> label_set = std::nullopt) {
  std::vector<Utterance> utterances;
  for (const auto& line : read_jsonl(path)) utterances.push_back(utterance_from_json(line.value, line.line_number));
  return Manifest::from_utterances(std::move(utterances), std::move(label_set));
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::vector<Json> records;
  records.reserve(manifest.size());
  for (const auto& u : manifest.utterances()) records.push_back(to_json(u));
  write_jsonl(path, records);
}

// Up to `window` utterances preceding `target` in its dialogue, then the
// target itself. Context never crosses a dialogue boundary.
inline std::vector<Utterance> dialogue_context(const Manifest& manifest, std::string_view target,
                                               std::size_t window) {
  if (window == 0) throw Error(ErrorCode::InvalidArgument, "context window must be positive");
  std::size_t pos = manifest.position(target);
  const auto& all = manifest.utterances();
  std::size_t start = manifest.dialogue_start(all[pos].dialogue_id);
  std::size_t first = pos - std::min(window, pos - start);
  return {all.begin() + static_cast<std::ptrdiff_t>(first), all.begin() + static_cast<std::ptrdiff_t>(pos) + 1};
}

}  // namespace speechcue
