#include <gtest/gtest.h>

#include <random>

#include "speechcue/corpus.hpp"
#include "speechcue/prompt.hpp"
#include "test_support.hpp"

namespace sc = speechcue;
using sc::ErrorCode;
using sc::testing::TempDir;

namespace {

std::string record(const std::string& dialogue, int turn, const std::string& id, const std::string& label = "neutral",
                   const std::string& transcript = "hello there") {
  sc::Json j;
  j["dataset_id"] = "test";
  j["dialogue_id"] = dialogue;
  j["turn_index"] = turn;
  j["utterance_id"] = id;
  j["speaker_id"] = turn % 2 ? "b" : "a";
  j["speaker_group"] = nullptr;
  j["transcript"] = transcript;
  j["label"] = label.empty() ? sc::Json(nullptr) : sc::Json(label);
  j["audio_path"] = "wav/" + id + ".wav";
  j["split"] = "train";
  return j.dump();
}

ErrorCode load_error(const std::filesystem::path& p, std::optional<std::vector<std::string>> labels = std::nullopt) {
  try {
    sc::load_manifest(p, std::move(labels));
  } catch (const sc::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::Io;
}

sc::Manifest dialogue_of(int turns) {
  std::vector<sc::Utterance> us;
  for (int t = 0; t < turns; ++t) {
    sc::Utterance u;
    u.dialogue_id = "d";
    u.turn_index = static_cast<std::uint32_t>(t);
    u.utterance_id = "d_u" + std::to_string(t);
    u.speaker_id = "s";
    u.transcript = "turn " + std::to_string(t);
    u.label = t % 2 ? "a" : "b";
    us.push_back(u);
  }
  sc::Utterance other = us.front();
  other.dialogue_id = "e";
  other.utterance_id = "e_u0";
  us.push_back(other);
  return sc::Manifest::from_utterances(us);
}

}  // namespace

TEST(LoadManifest, SortsByDialogueAndTurn) {
  TempDir dir("corpus");
  sc::testing::write_file(dir / "m.jsonl", record("d1", 2, "d1_u2") + "\n" + record("d1", 0, "d1_u0") + "\n" +
                                               record("d1", 1, "d1_u1", "anger") + "\n");
  auto m = sc::load_manifest(dir / "m.jsonl");
  ASSERT_EQ(m.size(), 3u);
  EXPECT_EQ(m.utterances()[0].utterance_id, "d1_u0");
  EXPECT_EQ(m.utterances()[1].utterance_id, "d1_u1");
  EXPECT_EQ(m.utterances()[2].utterance_id, "d1_u2");
  EXPECT_EQ(m.label_set(), (std::vector<std::string>{"anger", "neutral"}));
}

TEST(LoadManifest, RejectsDuplicateIds) {
  TempDir dir("corpus");
  sc::testing::write_file(dir / "m.jsonl", record("d1", 0, "d1_u0") + "\n" + record("d1", 1, "d1_u0", "anger") + "\n");
  EXPECT_EQ(load_error(dir / "m.jsonl"), ErrorCode::DuplicateUtteranceId);
}

TEST(LoadManifest, RejectsLabelOutsideRetainedSet) {
  TempDir dir("corpus");
  sc::testing::write_file(dir / "m.jsonl", record("d1", 0, "d1_u0", "anger") + "\n" + record("d1", 1, "d1_u1", "fear") + "\n");
  EXPECT_EQ(load_error(dir / "m.jsonl", sc::label_set_for(sc::Dataset::Iemocap)), ErrorCode::UnknownLabel);
}

TEST(LoadManifest, RejectsTurnGaps) {
  TempDir dir("corpus");
  sc::testing::write_file(dir / "m.jsonl", record("d1", 0, "a") + "\n" + record("d1", 2, "b", "anger") + "\n");
  EXPECT_EQ(load_error(dir / "m.jsonl"), ErrorCode::GapInTurnIndex);
  sc::testing::write_file(dir / "m.jsonl", record("d1", 1, "a") + "\n" + record("d1", 2, "b", "anger") + "\n");
  EXPECT_EQ(load_error(dir / "m.jsonl"), ErrorCode::GapInTurnIndex);
}

TEST(LoadManifest, ReportsMalformedLineNumber) {
  TempDir dir("corpus");
  sc::testing::write_file(dir / "m.jsonl", record("d1", 0, "a") + "\n{not json\n");
  try {
    sc::load_manifest(dir / "m.jsonl");
    FAIL();
  } catch (const sc::Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedRecord);
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
}

TEST(LoadManifest, RequiresExactKeySet) {
  TempDir dir("corpus");
  auto extra = sc::Json::parse(record("d1", 0, "a"));
  extra["speaker_gender"] = "f";
  sc::testing::write_file(dir / "m.jsonl", extra.dump() + "\n" + record("d1", 1, "b", "anger") + "\n");
  EXPECT_EQ(load_error(dir / "m.jsonl"), ErrorCode::MalformedRecord);
  auto missing = sc::Json::parse(record("d1", 0, "a"));
  missing.erase("split");
  sc::testing::write_file(dir / "m.jsonl", missing.dump() + "\n");
  EXPECT_EQ(load_error(dir / "m.jsonl"), ErrorCode::MalformedRecord);
}

TEST(LoadManifest, LowercasesLabels) {
  TempDir dir("corpus");
  sc::testing::write_file(dir / "m.jsonl", record("d1", 0, "a", "Anger") + "\n" + record("d1", 1, "b", "NEUTRAL") + "\n");
  auto m = sc::load_manifest(dir / "m.jsonl");
  EXPECT_EQ(*m.utterances()[0].label, "anger");
  EXPECT_EQ(*m.utterances()[1].label, "neutral");
}

TEST(LoadManifest, NeedsTwoLabelsAndSomeModality) {
  TempDir dir("corpus");
  sc::testing::write_file(dir / "m.jsonl", record("d1", 0, "a") + "\n");
  EXPECT_EQ(load_error(dir / "m.jsonl"), ErrorCode::InvalidArgument);

  auto empty = sc::Json::parse(record("d1", 1, "b", "anger", "   "));
  empty["audio_path"] = nullptr;
  sc::testing::write_file(dir / "m.jsonl", record("d1", 0, "a") + "\n" + empty.dump() + "\n");
  EXPECT_EQ(load_error(dir / "m.jsonl"), ErrorCode::MalformedRecord);
}

TEST(LoadManifest, RoundTripsThroughWriter) {
  TempDir dir("corpus");
  auto original = sc::load_manifest(sc::testing::corpus_dir() / "manifest.jsonl");
  sc::write_manifest(dir / "copy.jsonl", original);
  EXPECT_EQ(sc::load_manifest(dir / "copy.jsonl"), original);
}

TEST(DialogueContext, WindowArithmetic) {
  auto m = dialogue_of(8);
  auto first = sc::dialogue_context(m, "d_u0", 12);
  ASSERT_EQ(first.size(), 1u);
  EXPECT_EQ(first[0].utterance_id, "d_u0");

  auto three = sc::dialogue_context(m, "d_u5", 3);
  ASSERT_EQ(three.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(three[i].turn_index, i + 2);

  auto all = sc::dialogue_context(m, "d_u5", 12);
  ASSERT_EQ(all.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(all[i].turn_index, i);
}

TEST(DialogueContext, UnknownTargetAndZeroWindow) {
  auto m = dialogue_of(3);
  try {
    sc::dialogue_context(m, "nope", 3);
    FAIL();
  } catch (const sc::Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownUtterance);
  }
  EXPECT_THROW(sc::dialogue_context(m, "d_u1", 0), sc::Error);
}

TEST(DialogueContext, IsAlwaysASuffixEndingAtTarget) {
  auto m = dialogue_of(20);
  std::vector<sc::Utterance> dialogue;
  for (const auto& u : m.utterances())
    if (u.dialogue_id == "d") dialogue.push_back(u);
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t target = rng() % 20, window = 1 + rng() % 25;
    auto ctx = sc::dialogue_context(m, dialogue[target].utterance_id, window);
    // Brute-force slice of the dialogue.
    std::size_t begin = target >= window ? target - window : 0;
    std::vector<sc::Utterance> expected(dialogue.begin() + static_cast<long>(begin),
                                        dialogue.begin() + static_cast<long>(target) + 1);
    EXPECT_EQ(ctx, expected);
    EXPECT_EQ(ctx.back().utterance_id, dialogue[target].utterance_id);
    for (const auto& u : ctx) EXPECT_EQ(u.dialogue_id, "d");
  }
}
