#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "speechcue/error.hpp"
#include "speechcue/jsonl.hpp"
#include "speechcue/text.hpp"
#include "speechcue/thresholds.hpp"

namespace speechcue {

enum class ImpressionFeature { Pitch, PitchVariation, Volume, VolumeVariation, Rate };
enum class LevelBand { High, Low, Medium };

// "high"/"very high" -> High, "low"/"very low" -> Low, everything in between
// (including the 4/6-class medium-low and medium-high) -> Medium.
inline LevelBand band_of(const CategoryLevel& level) {
  if (level.name == "high" || level.name == "very high") return LevelBand::High;
  if (level.name == "low" || level.name == "very low") return LevelBand::Low;
  return LevelBand::Medium;
}

namespace detail {

struct ImpressionCell {
  std::string_view table_text;  // as printed in the feature-impression table
  std::string_view hedged;      // fragment with the interpretive clause softened
};

// Indexed [feature][band] with band order High, Low, Medium.
inline constexpr std::array<std::array<ImpressionCell, 3>, 5> kImpressionTable = {{
    {{{"Uses a higher pitch", "uses a higher pitch"},
      {"Uses a lower pitch", "uses a lower pitch"},
      {"Has a moderate pitch", "has a moderate pitch"}}},
    {{{"With noticeable variation, suggesting expressiveness",
       "with noticeable variation, likely suggesting expressiveness"},
      {"That remains steady, potentially indicating calmness or seriousness",
       "that remains steady, likely indicating calmness or seriousness"},
      {"With typical variation", "with typical variation"}}},
    {{{"Speaking loudly, which might indicate excitement, confidence, or urgency",
       "speaking loudly, which likely indicates excitement, confidence, or urgency"},
      {"Speaking softly, possibly suggesting calmness, shyness, or caution",
       "speaking softly, likely suggesting calmness, shyness, or caution"},
      {"Using a moderate volume", "using a moderate volume"}}},
    {{{"With significant volume changes", "with significant volume changes"},
      {"With little volume variation", "with little volume variation"},
      {"With normal volume variation", "with normal volume variation"}}},
    {{{"Talking quickly, which could indicate excitement, urgency, or nervousness",
       "talking quickly, which likely indicates excitement, urgency, or nervousness"},
      {"Talking slowly, possibly suggesting thoughtfulness, hesitation, or calmness",
       "talking slowly, likely suggesting thoughtfulness, hesitation, or calmness"},
      {"Speaking at a moderate pace", "speaking at a moderate pace"}}},
}};

inline const ImpressionCell& cell(ImpressionFeature feature, LevelBand band) {
  return kImpressionTable[static_cast<std::size_t>(feature)][static_cast<std::size_t>(band)];
}

}  // namespace detail

// The table entry exactly as printed (sentence case).
inline std::string impression_table_text(ImpressionFeature feature, LevelBand band) {
  return std::string(detail::cell(feature, band).table_text);
}

// The table entry as a mid-sentence fragment.
inline std::string impression_fragment(ImpressionFeature feature, const CategoryLevel& level) {
  return text::lowercase_first(impression_table_text(feature, band_of(level)));
}

inline std::string hedged_impression_fragment(ImpressionFeature feature, const CategoryLevel& level) {
  return std::string(detail::cell(feature, band_of(level)).hedged);
}

inline bool is_hedgeable(ImpressionFeature feature, const CategoryLevel& level) {
  return impression_fragment(feature, level) != hedged_impression_fragment(feature, level);
}

// "medium" variation reads as "moderate"; other level names pass through.
inline std::string variation_adjective(const CategoryLevel& level) {
  return level.name == "medium" ? "moderate" : level.name;
}

inline std::string pitch_phrase(const CategorizedFeatures& cf) {
  if (!cf.has_pitch()) return "no detectable pitch";
  return cf.avg_pitch->level.name + " pitch with " + variation_adjective(cf.pitch_variation->level) + " variation";
}

inline std::string volume_phrase(const CategorizedFeatures& cf) {
  return cf.avg_volume.level.name + " volume with " + variation_adjective(cf.volume_variation.level) + " variation";
}

struct SpeechDescription {
  std::string text;
};

struct SpeechImpression {
  std::string text;
};

inline SpeechDescription describe_features(const CategorizedFeatures& cf) {
  return {volume_phrase(cf) + "; " + pitch_phrase(cf) + "; " + cf.speaking_rate.level.name + " speaking rate"};
}

// One sentence: pitch clause, volume clause, rate clause. A fragment whose
// feature lies within `hedge_margin` of a boundary gets the hedged wording.
inline SpeechImpression render_impression(const CategorizedFeatures& cf, double hedge_margin = 0.05) {
  if (!(hedge_margin >= 0.0)) throw Error(ErrorCode::InvalidArgument, "hedge_margin must be >= 0");
  auto fragment = [&](ImpressionFeature feature, const CategorizedFeature& c) {
    return c.margin < hedge_margin ? hedged_impression_fragment(feature, c.level)
                                   : impression_fragment(feature, c.level);
  };
  std::vector<std::string> clauses;
  if (cf.has_pitch())
    clauses.push_back(fragment(ImpressionFeature::Pitch, *cf.avg_pitch) + " " +
                      fragment(ImpressionFeature::PitchVariation, *cf.pitch_variation));
  clauses.push_back(fragment(ImpressionFeature::Volume, cf.avg_volume) + " " +
                    fragment(ImpressionFeature::VolumeVariation, cf.volume_variation));
  clauses.push_back(fragment(ImpressionFeature::Rate, cf.speaking_rate));
  return {text::capitalize_first(text::join(clauses, ", ")) + "."};
}

// ---------------------------------------------------------------------------
// Annotation records

struct UtteranceAnnotation {
  std::string utterance_id;
  std::string description;
  std::string impression;
  CategorizedFeatures levels;
};

inline Json to_json(const CategorizedFeature& c) {
  return Json{{"level", c.level.name}, {"index", c.level.index}, {"margin", c.margin}};
}

inline Json to_json(const UtteranceAnnotation& a) {
  Json levels;
  levels["avg_volume"] = to_json(a.levels.avg_volume);
  levels["volume_variation"] = to_json(a.levels.volume_variation);
  levels["avg_pitch"] = a.levels.avg_pitch ? to_json(*a.levels.avg_pitch) : Json(nullptr);
  levels["pitch_variation"] = a.levels.pitch_variation ? to_json(*a.levels.pitch_variation) : Json(nullptr);
  levels["speaking_rate"] = to_json(a.levels.speaking_rate);
  Json j;
  j["schema"] = schema::kAnnotations;
  j["utterance_id"] = a.utterance_id;
  j["num_classes"] = a.levels.num_classes;
  j["description"] = a.description;
  j["impression"] = a.impression;
  j["levels"] = levels;
  return j;
}

inline UtteranceAnnotation annotation_from_json(const Json& j) {
  expect_schema(j, schema::kAnnotations, "annotation record");
  try {
    UtteranceAnnotation a;
    a.utterance_id = j.at("utterance_id").get<std::string>();
    a.description = j.at("description").get<std::string>();
    a.impression = j.at("impression").get<std::string>();
    a.levels.num_classes = j.at("num_classes").get<int>();
    auto one = [&](const Json& e) {
      auto level = parse_level(e.at("level").get<std::string>(), a.levels.num_classes);
      if (!level || level->index != e.at("index").get<int>())
        throw Error(ErrorCode::SchemeMismatch, "annotation level does not match its class count");
      return CategorizedFeature{*level, e.at("margin").get<double>()};
    };
    const auto& lv = j.at("levels");
    a.levels.avg_volume = one(lv.at("avg_volume"));
    a.levels.volume_variation = one(lv.at("volume_variation"));
    if (!lv.at("avg_pitch").is_null()) a.levels.avg_pitch = one(lv.at("avg_pitch"));
    if (!lv.at("pitch_variation").is_null()) a.levels.pitch_variation = one(lv.at("pitch_variation"));
    a.levels.speaking_rate = one(lv.at("speaking_rate"));
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("annotation record: ") + e.what());
  }
}

inline UtteranceAnnotation annotate(const std::string& utterance_id, const CategorizedFeatures& cf,
                                    double hedge_margin = 0.05) {
  return {utterance_id, describe_features(cf).text, render_impression(cf, hedge_margin).text, cf};
}

}  // namespace speechcue
