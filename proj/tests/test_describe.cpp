#include <gtest/gtest.h>

#include "speechcue/describe.hpp"
#include "test_support.hpp"

namespace sc = speechcue;
using sc::ImpressionFeature;
using sc::testing::levels5;

namespace {

ImpressionFeature feature_named(const std::string& name) {
  if (name == "pitch") return ImpressionFeature::Pitch;
  if (name == "pitch_variation") return ImpressionFeature::PitchVariation;
  if (name == "volume") return ImpressionFeature::Volume;
  if (name == "volume_variation") return ImpressionFeature::VolumeVariation;
  return ImpressionFeature::Rate;
}

std::string lower_first(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
  return s;
}

}  // namespace

TEST(ImpressionTable, AllFifteenCellsVerbatim) {
  auto rows = sc::testing::impression_fixture();
  ASSERT_EQ(rows.size(), 15u);
  // Every level name of every scheme that falls in the row's band.
  for (const auto& row : rows) {
    auto feature = feature_named(row.feature);
    int hits = 0;
    for (int k = 3; k <= 6; ++k)
      for (int i = 0; i < k; ++i) {
        auto level = sc::make_level(i, k);
        const bool in_band = row.band == "medium" ? level.name.find("medium") != std::string::npos
                                                  : level.name == row.band || level.name == "very " + row.band;
        if (!in_band) continue;
        ++hits;
        EXPECT_EQ(sc::impression_fragment(feature, level), lower_first(row.text)) << level.name;
        EXPECT_EQ(sc::impression_table_text(feature, sc::band_of(level)), row.text);
      }
    EXPECT_GT(hits, 0);
  }
}

TEST(ImpressionTable, SpotChecks) {
  EXPECT_EQ(sc::impression_fragment(ImpressionFeature::Volume, sc::make_level(4, 5)),
            "speaking loudly, which might indicate excitement, confidence, or urgency");
  EXPECT_EQ(sc::impression_fragment(ImpressionFeature::PitchVariation, sc::make_level(1, 5)),
            "that remains steady, potentially indicating calmness or seriousness");
  EXPECT_EQ(sc::impression_fragment(ImpressionFeature::Rate, sc::make_level(2, 5)), "speaking at a moderate pace");
  EXPECT_EQ(sc::band_of(sc::make_level(2, 6)), sc::LevelBand::Medium);
  EXPECT_EQ(sc::band_of(sc::make_level(2, 4)), sc::LevelBand::Medium);
}

TEST(DescribeFeatures, Phrasing) {
  auto cf = levels5("high", "medium", "low", "high", "medium");
  auto text = sc::describe_features(cf).text;
  EXPECT_NE(text.find("high volume with moderate variation"), std::string::npos) << text;
  EXPECT_NE(text.find("low pitch with high variation"), std::string::npos) << text;
  EXPECT_EQ(sc::describe_features(levels5("medium", "medium", "medium", "medium", "medium")).text,
            "medium volume with moderate variation; medium pitch with moderate variation; medium speaking rate");
  EXPECT_EQ(sc::describe_features(levels5("very low", "low", std::nullopt, "", "very high")).text,
            "very low volume with low variation; no detectable pitch; very high speaking rate");
}

TEST(RenderImpression, AllMedium) {
  EXPECT_EQ(sc::render_impression(levels5("medium", "medium", "medium", "medium", "medium")).text,
            "Has a moderate pitch with typical variation, using a moderate volume with normal volume variation, "
            "speaking at a moderate pace.");
}

TEST(RenderImpression, NoPitchDropsThePitchClause) {
  EXPECT_EQ(sc::render_impression(levels5("low", "high", std::nullopt, "", "low")).text,
            "Speaking softly, possibly suggesting calmness, shyness, or caution with significant volume changes, "
            "talking slowly, possibly suggesting thoughtfulness, hesitation, or calmness.");
}

TEST(RenderImpression, HedgesNearBoundaries) {
  auto cf = levels5("medium", "medium", "medium", "medium", "medium");
  cf.avg_volume = {sc::make_level(3, 5), 0.01};
  auto hedged = sc::render_impression(cf, 0.05).text;
  EXPECT_NE(hedged.find("speaking loudly, which likely indicates"), std::string::npos) << hedged;
  cf.avg_volume.margin = 0.2;
  EXPECT_EQ(sc::render_impression(cf, 0.05).text.find("likely"), std::string::npos);
  EXPECT_THROW(sc::render_impression(cf, -1.0), sc::Error);
}

TEST(RenderImpression, Deterministic) {
  auto cf = levels5("very high", "low", "high", "very low", "low", 0.03);
  EXPECT_EQ(sc::render_impression(cf).text, sc::render_impression(cf).text);
  EXPECT_EQ(sc::annotate("u", cf).impression, sc::annotate("u", cf).impression);
}

TEST(RenderImpression, HedgingGrowsWithMargin) {
  // Raising hedge_margin can only add hedge words.
  auto count = [](const std::string& s) {
    std::size_t n = 0;
    for (auto p = s.find("likely"); p != std::string::npos; p = s.find("likely", p + 1)) ++n;
    return n;
  };
  auto cf = levels5("very high", "low", "high", "very low", "low");
  cf.avg_volume.margin = 0.01;
  cf.pitch_variation->margin = 0.04;
  cf.speaking_rate.margin = 0.2;
  std::size_t last = 0;
  for (double h : {0.0, 0.02, 0.05, 0.1, 0.3, 2.0}) {
    auto n = count(sc::render_impression(cf, h).text);
    EXPECT_GE(n, last) << h;
    last = n;
  }
  EXPECT_EQ(last, 3u);
}

TEST(Annotation, JsonRoundTrip) {
  auto a = sc::annotate("u7", levels5("high", "low", "medium", "high", "very low", 0.02));
  auto back = sc::annotation_from_json(sc::Json::parse(sc::to_json(a).dump()));
  EXPECT_EQ(back.utterance_id, a.utterance_id);
  EXPECT_EQ(back.description, a.description);
  EXPECT_EQ(back.impression, a.impression);
  EXPECT_EQ(back.levels, a.levels);
  auto j = sc::to_json(a);
  j["num_classes"] = 3;
  EXPECT_THROW(sc::annotation_from_json(j), sc::Error);
}
