#include <gtest/gtest.h>

#include "corpus_fixture.hpp"
#include "speechcue/prompt.hpp"

namespace sc = speechcue;
using sc::ContextFeature;
using sc::PromptConfig;
using sc::PromptMode;
using sc::testing::levels5;

namespace {

struct Dialogue {
  sc::Manifest manifest;
  sc::AnnotationIndex annotations;
};

Dialogue dialogue(int turns) {
  std::vector<sc::Utterance> us;
  sc::AnnotationIndex ann;
  const char* levels[] = {"very low", "low", "medium", "high", "very high"};
  for (int t = 0; t < turns; ++t) {
    sc::Utterance u;
    u.dialogue_id = "d";
    u.turn_index = static_cast<std::uint32_t>(t);
    u.utterance_id = "d_u" + std::to_string(t);
    u.speaker_id = t % 2 ? "B" : "A";
    u.transcript = "line number " + std::to_string(t) + " zebra";
    u.label = t % 3 ? "joy" : "anger";
    auto lv = levels[t % 5];
    ann.emplace(u.utterance_id, sc::annotate(u.utterance_id, levels5(lv, "medium", lv, "low", "high")));
    us.push_back(std::move(u));
  }
  return {sc::Manifest::from_utterances(std::move(us)), std::move(ann)};
}

std::vector<std::string> lines_of(const std::string& block) {
  std::vector<std::string> out;
  std::istringstream in(block);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

PromptConfig config(PromptMode mode) {
  PromptConfig c;
  c.mode = mode;
  return c;
}

}  // namespace

TEST(LabelSets, DatasetSizes) {
  EXPECT_EQ(sc::label_set_for(sc::Dataset::Iemocap).size(), 6u);
  EXPECT_EQ(sc::label_set_for(sc::Dataset::Meld).size(), 7u);
  EXPECT_EQ(sc::label_set_for(sc::Dataset::Custom, {"a", "b"}), (std::vector<std::string>{"a", "b"}));
}

TEST(BuildPrompt, TextOnlyHasThreeBlocksAndNoSpeech) {
  auto d = dialogue(6);
  auto b = sc::build_prompt(d.manifest, "d_u5", d.annotations, config(PromptMode::TextOnly));
  EXPECT_TRUE(b.speech_block.empty());
  EXPECT_EQ(count(b.full_text, "\n\n"), 2u);
  for (const char* word : {"pitch", "volume", "speaking rate"}) EXPECT_EQ(b.full_text.find(word), std::string::npos);
  // No annotations required at all.
  EXPECT_NO_THROW(sc::build_prompt(d.manifest, "d_u5", {}, config(PromptMode::TextOnly)));
}

TEST(BuildPrompt, AnnotatesOnlyTheLastThreeContextLines) {
  auto d = dialogue(9);
  auto b = sc::build_prompt(d.manifest, "d_u8", d.annotations, config(PromptMode::WithDescription));
  auto lines = lines_of(b.context_block);
  ASSERT_EQ(lines.size(), 10u);  // header + 8 predecessors + target
  EXPECT_EQ(lines[0], "Conversation:");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const bool annotated = lines[i].find("(pitch: ") != std::string::npos;
    EXPECT_EQ(annotated, i >= 6 && i <= 8) << lines[i];
  }
  EXPECT_EQ(lines[8], "B: line number 7 zebra (pitch: medium pitch with low variation)");
  EXPECT_EQ(lines[9], "A: line number 8 zebra");
  EXPECT_EQ(b.speech_block, "Speech characteristics of the last utterance (A): " + d.annotations.at("d_u8").description);
}

TEST(BuildPrompt, ShortHistoryAnnotatesWhatExists) {
  auto d = dialogue(3);
  auto b = sc::build_prompt(d.manifest, "d_u2", d.annotations, config(PromptMode::WithImpression));
  EXPECT_EQ(count(b.context_block, "(pitch: "), 2u);
  EXPECT_NE(b.speech_block.find(d.annotations.at("d_u2").impression), std::string::npos);
}

TEST(BuildPrompt, FirstTurnShowsOnlyTheTarget) {
  auto d = dialogue(4);
  auto b = sc::build_prompt(d.manifest, "d_u0", d.annotations, config(PromptMode::WithDescription));
  auto ctx = sc::dialogue_context(d.manifest, "d_u0", 12);
  ASSERT_EQ(ctx.size(), 1u);
  EXPECT_EQ(b.context_block, "Conversation:\nA: " + ctx[0].transcript);
}

TEST(BuildPrompt, ContextFeatureVariants) {
  auto d = dialogue(5);
  auto c = config(PromptMode::WithDescription);
  c.context_feature = ContextFeature::Volume;
  EXPECT_EQ(count(sc::build_prompt(d.manifest, "d_u4", d.annotations, c).context_block, "(volume: "), 3u);
  c.context_feature = ContextFeature::All;
  c.context_depth = 1;
  auto all = sc::build_prompt(d.manifest, "d_u4", d.annotations, c).context_block;
  EXPECT_NE(all.find("(" + d.annotations.at("d_u3").description + ")"), std::string::npos);
  EXPECT_EQ(count(all, "("), 1u);
  c.context_feature = ContextFeature::None;
  EXPECT_EQ(count(sc::build_prompt(d.manifest, "d_u4", d.annotations, c).context_block, "("), 0u);
  c.context_depth = 20;
  c.context_window = 4;
  EXPECT_THROW(sc::build_prompt(d.manifest, "d_u4", d.annotations, c), sc::Error);
}

TEST(BuildPrompt, MissingAnnotation) {
  auto d = dialogue(4);
  d.annotations.erase("d_u2");
  try {
    sc::build_prompt(d.manifest, "d_u3", d.annotations, config(PromptMode::WithDescription));
    FAIL();
  } catch (const sc::Error& e) {
    EXPECT_EQ(e.code(), sc::ErrorCode::MissingAnnotation);
  }
}

TEST(BuildPrompt, QuestionListsExactlyTheLabelSet) {
  auto d = dialogue(3);
  auto b = sc::build_prompt(d.manifest, "d_u1", d.annotations, config(PromptMode::WithDescription));
  EXPECT_NE(b.question.find("from: anger, joy. Answer"), std::string::npos) << b.question;
  EXPECT_EQ(b.instruction, std::string(sc::kDefaultInstruction));
  EXPECT_EQ(b.full_text.rfind(b.question), b.full_text.size() - b.question.size());
}

TEST(SpeechOnly, ExcludesTranscript) {
  auto d = dialogue(3);
  const auto& a = d.annotations.at("d_u1");
  auto desc = sc::build_speech_only_prompt(&a, d.manifest.label_set(), false);
  auto imp = sc::build_speech_only_prompt(&a, d.manifest.label_set(), true);
  EXPECT_NE(desc.full_text.find(a.description), std::string::npos);
  EXPECT_NE(imp.full_text.find(a.impression), std::string::npos);
  for (const auto& p : {desc, imp}) {
    EXPECT_TRUE(p.context_block.empty());
    EXPECT_EQ(p.full_text.find("zebra"), std::string::npos);
    EXPECT_EQ(p.full_text.find("line number"), std::string::npos);
  }
  EXPECT_THROW(sc::build_speech_only_prompt(nullptr, d.manifest.label_set(), false), sc::Error);
  EXPECT_THROW(sc::build_prompt(d.manifest, "d_u1", d.annotations, config(PromptMode::SpeechOnly)), sc::Error);
}

TEST(PromptRecord, JsonRoundTrip) {
  auto d = dialogue(3);
  auto r = sc::make_prompt_record(d.manifest, "d_u2", d.annotations, config(PromptMode::WithImpression));
  auto back = sc::prompt_record_from_json(sc::to_json(r));
  EXPECT_EQ(back.utterance_id, "d_u2");
  EXPECT_EQ(back.mode, PromptMode::WithImpression);
  EXPECT_EQ(back.full_text, r.full_text);
  EXPECT_EQ(back.gold_label, std::optional<std::string>("joy"));
}

TEST(CorpusGoldens, AllModesByteExact) {
  sc::testing::TempDir dir("prompt");
  sc::testing::CorpusRun run(dir.path());
  for (auto mode : {PromptMode::TextOnly, PromptMode::WithDescription, PromptMode::WithImpression,
                    PromptMode::SpeechOnly}) {
    auto path = run.prompts(dir.path(), mode);
    auto name = path.filename().string();
    EXPECT_TRUE(sc::testing::matches_golden(name, sc::testing::read_file(path))) << name;
    auto records = sc::pipeline::read_prompts(path);
    EXPECT_EQ(records.size(), 24u);
    if (mode != PromptMode::TextOnly) continue;
    for (const auto& r : records)
      for (const char* word : {"pitch", "volume", "speaking rate"})
        EXPECT_EQ(r.full_text.find(word), std::string::npos) << r.utterance_id;
  }
}
