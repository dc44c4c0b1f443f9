#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "speechcue/corpus.hpp"
#include "speechcue/dsp.hpp"
#include "speechcue/error.hpp"
#include "speechcue/jsonl.hpp"

namespace speechcue {

enum class Feature { AvgVolume, VolumeVariation, AvgPitch, PitchVariation, SpeakingRate };

inline constexpr std::array<Feature, 5> kAllFeatures = {Feature::AvgVolume, Feature::VolumeVariation,
                                                        Feature::AvgPitch, Feature::PitchVariation,
                                                        Feature::SpeakingRate};

inline constexpr std::string_view feature_name(Feature f) {
  switch (f) {
    case Feature::AvgVolume: return "avg_volume";
    case Feature::VolumeVariation: return "volume_variation";
    case Feature::AvgPitch: return "avg_pitch";
    case Feature::PitchVariation: return "pitch_variation";
    case Feature::SpeakingRate: return "speaking_rate";
  }
  return "";
}

inline constexpr std::size_t index_of(Feature f) { return static_cast<std::size_t>(f); }

// The five features of one utterance; pitch entries are empty when unvoiced.
struct FeatureValues {
  std::array<std::optional<double>, 5> values;

  std::optional<double>& operator[](Feature f) { return values[index_of(f)]; }
  const std::optional<double>& operator[](Feature f) const { return values[index_of(f)]; }
  bool operator==(const FeatureValues&) const = default;
};

inline FeatureValues feature_values(const dsp::ProsodicFeatures& p) {
  FeatureValues v;
  v[Feature::AvgVolume] = p.avg_volume_db;
  v[Feature::VolumeVariation] = p.volume_variation_db;
  v[Feature::AvgPitch] = p.avg_pitch_hz;
  v[Feature::PitchVariation] = p.pitch_variation_hz;
  v[Feature::SpeakingRate] = p.speaking_rate_wps;
  return v;
}

using FeatureSet = std::map<std::string, FeatureValues>;  // keyed by utterance_id

// ---------------------------------------------------------------------------
// Quantile schemes and level names

struct QuantileScheme {
  int num_classes = 5;
  std::vector<double> quantiles;

  static QuantileScheme for_classes(int num_classes) {
    switch (num_classes) {
      case 3: return {3, {0.25, 0.75}};
      case 4: return {4, {0.25, 0.5, 0.75}};
      case 5: return {5, {0.1, 0.25, 0.75, 0.9}};
      case 6: return {6, {0.1, 0.25, 0.5, 0.75, 0.9}};
      default:
        throw Error(ErrorCode::InvalidArgument,
                    "num_classes must be 3, 4, 5 or 6 (got " + std::to_string(num_classes) + ")");
    }
  }

  bool operator==(const QuantileScheme&) const = default;
};

inline const std::vector<std::string>& level_names(int num_classes) {
  static const std::vector<std::string> three = {"low", "medium", "high"};
  static const std::vector<std::string> four = {"low", "medium-low", "medium-high", "high"};
  static const std::vector<std::string> five = {"very low", "low", "medium", "high", "very high"};
  static const std::vector<std::string> six = {"very low", "low", "medium-low", "medium-high", "high", "very high"};
  switch (num_classes) {
    case 3: return three;
    case 4: return four;
    case 5: return five;
    case 6: return six;
    default: throw Error(ErrorCode::InvalidArgument, "no level names for " + std::to_string(num_classes) + " classes");
  }
}

struct CategoryLevel {
  int index = 0;
  std::string name;
  bool operator==(const CategoryLevel&) const = default;
};

inline CategoryLevel make_level(int index, int num_classes) {
  const auto& names = level_names(num_classes);
  if (index < 0 || index >= num_classes)
    throw Error(ErrorCode::InvalidArgument, "level index " + std::to_string(index) + " out of range");
  return {index, names[static_cast<std::size_t>(index)]};
}

inline std::optional<CategoryLevel> parse_level(std::string_view name, int num_classes) {
  const auto& names = level_names(num_classes);
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return CategoryLevel{static_cast<int>(i), names[i]};
  return std::nullopt;
}

struct CategorizedFeature {
  CategoryLevel level;
  double margin = 0.0;
  bool operator==(const CategorizedFeature&) const = default;
};

struct CategorizedFeatures {
  int num_classes = 5;
  CategorizedFeature avg_volume;
  CategorizedFeature volume_variation;
  std::optional<CategorizedFeature> avg_pitch;
  std::optional<CategorizedFeature> pitch_variation;
  CategorizedFeature speaking_rate;

  bool has_pitch() const { return avg_pitch && pitch_variation; }
  bool operator==(const CategorizedFeatures&) const = default;
};

// ---------------------------------------------------------------------------
// Quantiles

// Linear interpolation between order statistics at position (n-1)*q.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::EmptyInput, "quantile of empty input");
  const double pos = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return sorted[lo] + t * (sorted[hi] - sorted[lo]);
}

inline std::vector<double> compute_quantiles(std::vector<double> values, std::span<const double> quantiles) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "compute_quantiles on empty input");
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  out.reserve(quantiles.size());
  for (double q : quantiles) out.push_back(quantile_sorted(values, q));
  // Guard against rounding making neighbours cross.
  for (std::size_t i = 1; i < out.size(); ++i) out[i] = std::max(out[i], out[i - 1]);
  return out;
}

inline std::vector<double> compute_quantiles(std::vector<double> values, const QuantileScheme& scheme) {
  return compute_quantiles(std::move(values), scheme.quantiles);
}

// ---------------------------------------------------------------------------
// Grouping policy

enum class Grouping { Global, PerSpeaker, PerGroup };

inline std::string_view to_string(Grouping g) {
  switch (g) {
    case Grouping::Global: return "global";
    case Grouping::PerSpeaker: return "speaker";
    case Grouping::PerGroup: return "group";
  }
  return "global";
}

inline Grouping parse_grouping(std::string_view s) {
  if (s == "global") return Grouping::Global;
  if (s == "speaker" || s == "per_speaker") return Grouping::PerSpeaker;
  if (s == "group" || s == "per_group") return Grouping::PerGroup;
  throw Error(ErrorCode::InvalidArgument, "unknown grouping '" + std::string(s) + "'");
}

struct NormalizationPolicy {
  Grouping grouping = Grouping::PerSpeaker;
  std::size_t min_count = 24;

  void validate() const {
    if (min_count < 2) throw Error(ErrorCode::InvalidArgument, "min_count must be >= 2");
  }
  bool operator==(const NormalizationPolicy&) const = default;
};

// Key of the group an utterance belongs to under `grouping`, or nullopt when
// it only has the global population (global policy, or a missing group tag).
inline std::optional<std::string> group_key(const Utterance& u, Grouping grouping) {
  switch (grouping) {
    case Grouping::Global: return std::nullopt;
    case Grouping::PerSpeaker: return u.speaker_id;
    case Grouping::PerGroup: return u.speaker_group;
  }
  return std::nullopt;
}

namespace detail {

struct Populations {
  std::vector<double> global;
  std::map<std::string, std::vector<double>> groups;
};

inline std::array<Populations, 5> collect(const FeatureSet& features, const Manifest& manifest, Grouping grouping) {
  std::array<Populations, 5> pops;
  for (const auto& [id, values] : features) {
    const auto* u = manifest.find(id);
    if (!u) throw Error(ErrorCode::MissingUtterance, id);
    auto key = group_key(*u, grouping);
    for (auto f : kAllFeatures) {
      const auto& v = values[f];
      if (!v) continue;
      pops[index_of(f)].global.push_back(*v);
      if (key) pops[index_of(f)].groups[*key].push_back(*v);
    }
  }
  return pops;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Standardization

inline constexpr double kSigmaFloor = 1e-9;

struct Standardizer {
  NormalizationPolicy policy;
  struct Stats {
    dsp::MeanStd global;
    std::map<std::string, dsp::MeanStd> groups;  // only groups with >= min_count values
  };
  std::array<Stats, 5> stats;

  dsp::MeanStd lookup(Feature f, const std::optional<std::string>& key) const {
    const auto& s = stats[index_of(f)];
    if (key) {
      auto it = s.groups.find(*key);
      if (it != s.groups.end()) return it->second;
    }
    return s.global;
  }

  FeatureValues apply(const FeatureValues& in, const Utterance& u) const {
    FeatureValues out;
    auto key = group_key(u, policy.grouping);
    for (auto f : kAllFeatures) {
      if (!in[f]) continue;
      auto ms = lookup(f, key);
      out[f] = (*in[f] - ms.mean) / std::max(ms.std, kSigmaFloor);
    }
    return out;
  }

  bool operator==(const Standardizer& o) const {
    if (!(policy == o.policy)) return false;
    for (std::size_t i = 0; i < 5; ++i) {
      const auto& a = stats[i];
      const auto& b = o.stats[i];
      if (a.global.mean != b.global.mean || a.global.std != b.global.std || a.groups.size() != b.groups.size())
        return false;
      for (const auto& [k, v] : a.groups) {
        auto it = b.groups.find(k);
        if (it == b.groups.end() || it->second.mean != v.mean || it->second.std != v.std) return false;
      }
    }
    return true;
  }
};

inline Standardizer fit_standardizer(const FeatureSet& features, const Manifest& manifest,
                                     const NormalizationPolicy& policy) {
  policy.validate();
  Standardizer st;
  st.policy = policy;
  auto pops = detail::collect(features, manifest, policy.grouping);
  for (auto f : kAllFeatures) {
    auto& pop = pops[index_of(f)];
    auto& stats = st.stats[index_of(f)];
    stats.global = dsp::mean_std(pop.global);
    for (const auto& [key, values] : pop.groups)
      if (values.size() >= policy.min_count) stats.groups[key] = dsp::mean_std(values);
  }
  return st;
}

// Z-scores each feature within its policy group; sparse groups use the
// global mean and deviation.
inline FeatureSet standardize(const FeatureSet& features, const Manifest& manifest,
                              const NormalizationPolicy& policy) {
  auto st = fit_standardizer(features, manifest, policy);
  FeatureSet out;
  for (const auto& [id, values] : features) out.emplace(id, st.apply(values, manifest.at(id)));
  return out;
}

// ---------------------------------------------------------------------------
// Threshold table

struct GroupBoundaries {
  std::vector<double> boundaries;
  double span = 0.0;  // inter-decile range, floored at machine epsilon
  std::size_t count = 0;
  bool operator==(const GroupBoundaries&) const = default;
};

inline GroupBoundaries group_boundaries(const std::vector<double>& values, const QuantileScheme& scheme) {
  GroupBoundaries g;
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  g.boundaries = compute_quantiles(sorted, scheme);
  g.span = std::max(quantile_sorted(sorted, 0.9) - quantile_sorted(sorted, 0.1),
                    std::numeric_limits<double>::epsilon());
  g.count = sorted.size();
  return g;
}

struct ThresholdTable {
  QuantileScheme scheme;
  NormalizationPolicy policy;
  struct PerFeature {
    GroupBoundaries global;
    std::map<std::string, GroupBoundaries> groups;
  };
  std::array<PerFeature, 5> features;

  const GroupBoundaries& lookup(Feature f, const std::optional<std::string>& key) const {
    const auto& pf = features[index_of(f)];
    if (key) {
      auto it = pf.groups.find(*key);
      if (it != pf.groups.end()) return it->second;
    }
    return pf.global;
  }

  bool operator==(const ThresholdTable& o) const {
    if (!(scheme == o.scheme) || !(policy == o.policy)) return false;
    for (std::size_t i = 0; i < 5; ++i)
      if (!(features[i].global == o.features[i].global) || features[i].groups != o.features[i].groups) return false;
    return true;
  }
};

// Builds per-group boundaries for groups with at least `min_count` values of
// a feature, plus the global entry over every utterance.
inline ThresholdTable build_threshold_table(const FeatureSet& features, const Manifest& manifest,
                                            const QuantileScheme& scheme, const NormalizationPolicy& policy) {
  policy.validate();
  if (features.empty()) throw Error(ErrorCode::EmptyInput, "no feature vectors");
  ThresholdTable table;
  table.scheme = scheme;
  table.policy = policy;
  auto pops = detail::collect(features, manifest, policy.grouping);
  for (auto f : kAllFeatures) {
    const auto& pop = pops[index_of(f)];
    if (pop.global.empty())
      throw Error(ErrorCode::EmptyInput, "no values for feature " + std::string(feature_name(f)));
    auto& entry = table.features[index_of(f)];
    entry.global = group_boundaries(pop.global, scheme);
    for (const auto& [key, values] : pop.groups)
      if (values.size() >= policy.min_count) entry.groups[key] = group_boundaries(values, scheme);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Categorization

// Level index = number of boundaries b with value >= b, so a value sitting on
// a boundary lands in the upper class. Margin is the distance to the nearest
// boundary in units of `span`.
inline CategorizedFeature categorize(double value, std::span<const double> boundaries, const QuantileScheme& scheme,
                                     double span) {
  if (boundaries.size() != static_cast<std::size_t>(scheme.num_classes - 1))
    throw Error(ErrorCode::BadBoundaryCount, "expected " + std::to_string(scheme.num_classes - 1) +
                                                 " boundaries, got " + std::to_string(boundaries.size()));
  if (!(span > 0.0)) throw Error(ErrorCode::InvalidArgument, "span must be positive");
  int index = static_cast<int>(std::upper_bound(boundaries.begin(), boundaries.end(), value) - boundaries.begin());
  double nearest = std::numeric_limits<double>::infinity();
  for (double b : boundaries) nearest = std::min(nearest, std::abs(value - b));
  return {make_level(index, scheme.num_classes), nearest / span};
}

inline CategorizedFeatures categorize_utterance(const FeatureValues& values, const Utterance& u,
                                                const ThresholdTable& table) {
  auto key = group_key(u, table.policy.grouping);
  auto one = [&](Feature f) {
    const auto& g = table.lookup(f, key);
    return categorize(*values[f], g.boundaries, table.scheme, g.span);
  };
  if (!values[Feature::AvgVolume] || !values[Feature::VolumeVariation] || !values[Feature::SpeakingRate])
    throw Error(ErrorCode::MissingVolume, "utterance " + u.utterance_id + " lacks volume or rate values");
  CategorizedFeatures cf;
  cf.num_classes = table.scheme.num_classes;
  cf.avg_volume = one(Feature::AvgVolume);
  cf.volume_variation = one(Feature::VolumeVariation);
  if (values[Feature::AvgPitch] && values[Feature::PitchVariation]) {
    cf.avg_pitch = one(Feature::AvgPitch);
    cf.pitch_variation = one(Feature::PitchVariation);
  }
  cf.speaking_rate = one(Feature::SpeakingRate);
  return cf;
}

// ---------------------------------------------------------------------------
// Serialization

inline Json to_json(const QuantileScheme& s) { return Json{{"num_classes", s.num_classes}, {"quantiles", s.quantiles}}; }

inline Json to_json(const NormalizationPolicy& p) {
  return Json{{"grouping", std::string(to_string(p.grouping))}, {"min_count", p.min_count}};
}

inline NormalizationPolicy policy_from_json(const Json& j) {
  NormalizationPolicy p;
  p.grouping = parse_grouping(j.at("grouping").get<std::string>());
  p.min_count = j.at("min_count").get<std::size_t>();
  p.validate();
  return p;
}

inline Json to_json(const ThresholdTable& t) {
  Json features = Json::object();
  for (auto f : kAllFeatures) {
    const auto& pf = t.features[index_of(f)];
    auto entry = [](const GroupBoundaries& g) {
      return Json{{"boundaries", g.boundaries}, {"span", g.span}, {"count", g.count}};
    };
    Json groups = Json::object();
    for (const auto& [k, g] : pf.groups) groups[k] = entry(g);
    features[std::string(feature_name(f))] = Json{{"global", entry(pf.global)}, {"groups", groups}};
  }
  return Json{{"scheme", to_json(t.scheme)}, {"policy", to_json(t.policy)}, {"features", features}};
}

inline ThresholdTable threshold_table_from_json(const Json& j) {
  ThresholdTable t;
  t.scheme = QuantileScheme::for_classes(j.at("scheme").at("num_classes").get<int>());
  if (j.at("scheme").at("quantiles").get<std::vector<double>>() != t.scheme.quantiles)
    throw Error(ErrorCode::SchemeMismatch, "quantile list does not match the class count");
  t.policy = policy_from_json(j.at("policy"));
  auto entry = [&](const Json& e) {
    GroupBoundaries g;
    g.boundaries = e.at("boundaries").get<std::vector<double>>();
    g.span = e.at("span").get<double>();
    g.count = e.at("count").get<std::size_t>();
    if (g.boundaries.size() != static_cast<std::size_t>(t.scheme.num_classes - 1))
      throw Error(ErrorCode::BadBoundaryCount, "threshold table entry");
    return g;
  };
  for (auto f : kAllFeatures) {
    const auto& pf = j.at("features").at(std::string(feature_name(f)));
    auto& out = t.features[index_of(f)];
    out.global = entry(pf.at("global"));
    for (const auto& [k, e] : pf.at("groups").items()) out.groups[k] = entry(e);
  }
  return t;
}

inline Json to_json(const Standardizer& s) {
  Json features = Json::object();
  for (auto f : kAllFeatures) {
    const auto& st = s.stats[index_of(f)];
    auto ms = [](const dsp::MeanStd& m) { return Json{{"mean", m.mean}, {"std", m.std}}; };
    Json groups = Json::object();
    for (const auto& [k, m] : st.groups) groups[k] = ms(m);
    features[std::string(feature_name(f))] = Json{{"global", ms(st.global)}, {"groups", groups}};
  }
  return Json{{"policy", to_json(s.policy)}, {"features", features}};
}

inline Standardizer standardizer_from_json(const Json& j) {
  Standardizer s;
  s.policy = policy_from_json(j.at("policy"));
  auto ms = [](const Json& e) { return dsp::MeanStd{e.at("mean").get<double>(), e.at("std").get<double>()}; };
  for (auto f : kAllFeatures) {
    const auto& pf = j.at("features").at(std::string(feature_name(f)));
    auto& out = s.stats[index_of(f)];
    out.global = ms(pf.at("global"));
    for (const auto& [k, e] : pf.at("groups").items()) out.groups[k] = ms(e);
  }
  return s;
}

// Everything the describe stage needs to categorize a raw feature record:
// optional standardization followed by a threshold table on its output.
struct FeatureModel {
  std::optional<Standardizer> standardizer;
  ThresholdTable table;

  FeatureValues prepare(const FeatureValues& raw, const Utterance& u) const {
    return standardizer ? standardizer->apply(raw, u) : raw;
  }
  CategorizedFeatures categorize(const FeatureValues& raw, const Utterance& u) const {
    return categorize_utterance(prepare(raw, u), u, table);
  }
};

inline FeatureModel fit_feature_model(const FeatureSet& raw, const Manifest& manifest, const QuantileScheme& scheme,
                                      const NormalizationPolicy& threshold_policy,
                                      const std::optional<NormalizationPolicy>& standardize_policy) {
  FeatureModel model;
  FeatureSet prepared = raw;
  if (standardize_policy) {
    model.standardizer = fit_standardizer(raw, manifest, *standardize_policy);
    prepared.clear();
    for (const auto& [id, v] : raw) prepared.emplace(id, model.standardizer->apply(v, manifest.at(id)));
  }
  model.table = build_threshold_table(prepared, manifest, scheme, threshold_policy);
  return model;
}

inline Json to_json(const FeatureModel& m) {
  Json j;
  j["schema"] = schema::kThresholds;
  j["standardization"] = m.standardizer ? to_json(*m.standardizer) : Json(nullptr);
  j["thresholds"] = to_json(m.table);
  return j;
}

inline FeatureModel feature_model_from_json(const Json& j) {
  expect_schema(j, schema::kThresholds, "threshold document");
  try {
    FeatureModel m;
    if (!j.at("standardization").is_null()) m.standardizer = standardizer_from_json(j.at("standardization"));
    m.table = threshold_table_from_json(j.at("thresholds"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("threshold document: ") + e.what());
  }
}

}  // namespace speechcue
