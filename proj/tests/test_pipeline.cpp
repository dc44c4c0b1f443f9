#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "corpus_fixture.hpp"
#include "mock_endpoint.hpp"
#include "speechcue/cli.hpp"

namespace sc = speechcue;
using sc::testing::read_file;
using sc::testing::TempDir;

namespace {

struct CliResult {
  int code = 0;
  std::string out, err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "speechcue");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.code = sc::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string manifest() { return (sc::testing::corpus_dir() / "manifest.jsonl").string(); }
std::string audio_root() { return sc::testing::corpus_dir().string(); }

// extract -> thresholds -> describe -> prompt into `dir`.
void front_half(const TempDir& dir) {
  auto p = [&](const char* name) { return (dir / name).string(); };
  ASSERT_EQ(cli({"extract", "--manifest", manifest(), "--audio-root", audio_root(), "--out", p("f.jsonl")}).code, 0);
  ASSERT_EQ(cli({"thresholds", "--manifest", manifest(), "--features", p("f.jsonl"), "--out", p("t.json")}).code, 0);
  ASSERT_EQ(cli({"describe", "--manifest", manifest(), "--features", p("f.jsonl"), "--thresholds", p("t.json"),
                 "--out", p("a.jsonl")})
                .code,
            0);
  ASSERT_EQ(cli({"prompt", "--manifest", manifest(), "--annotations", p("a.jsonl"), "--out", p("p.jsonl")}).code, 0);
}

}  // namespace

TEST(Cli, ExtractWritesOneRecordPerUtterance) {
  TempDir dir("pipeline");
  auto r = cli({"extract", "--manifest", manifest(), "--audio-root", audio_root(), "--out", (dir / "f.jsonl").string(),
                "--jobs", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("wrote 24 feature records"), std::string::npos) << r.out;
  auto lines = sc::read_jsonl(dir / "f.jsonl");
  ASSERT_EQ(lines.size(), 24u);
  EXPECT_EQ(lines.front().value["utterance_id"], "dlg1_u0");
  EXPECT_EQ(lines.front().value["schema"], "speechcue.features/1");
}

TEST(Cli, ThresholdsContainGlobalEntries) {
  TempDir dir("pipeline");
  front_half(dir);
  ASSERT_EQ(cli({"thresholds", "--manifest", manifest(), "--features", (dir / "f.jsonl").string(), "--out",
                 (dir / "t5.json").string(), "--classes", "5", "--group", "speaker", "--min-count", "24"})
                .code,
            0);
  auto doc = sc::read_json_document(dir / "t5.json");
  for (const char* f : {"avg_volume", "volume_variation", "avg_pitch", "pitch_variation", "speaking_rate"})
    EXPECT_TRUE(doc["thresholds"]["features"][f].contains("global")) << f;
  EXPECT_TRUE(doc["standardization"].is_null());
  auto model = sc::feature_model_from_json(doc);
  EXPECT_EQ(model.table.scheme, sc::QuantileScheme::for_classes(5));
}

TEST(Cli, ThresholdsWithStandardization) {
  TempDir dir("pipeline");
  front_half(dir);
  auto r = cli({"thresholds", "--manifest", manifest(), "--features", (dir / "f.jsonl").string(), "--out",
                (dir / "t.json").string(), "--classes", "3", "--group", "group", "--min-count", "6", "--standardize",
                "group"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto model = sc::feature_model_from_json(sc::read_json_document(dir / "t.json"));
  ASSERT_TRUE(model.standardizer);
  EXPECT_EQ(model.standardizer->stats[0].groups.size(), 2u);
}

TEST(Cli, ScoringGoldAgainstItselfIsPerfect) {
  TempDir dir("pipeline");
  auto r = cli({"score", "--pred", manifest(), "--gold", manifest(), "--out", (dir / "r.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("weighted F1 100.000"), std::string::npos) << r.out;
  auto again = cli({"score", "--pred", manifest(), "--gold", manifest(), "--compare", (dir / "r.json").string()});
  EXPECT_NE(again.out.find("weighted F1 +0.00%"), std::string::npos) << again.out;
}

TEST(Cli, PromptModesAndFilters) {
  TempDir dir("pipeline");
  front_half(dir);
  EXPECT_EQ(sc::read_jsonl(dir / "p.jsonl").size(), 24u);
  auto r = cli({"prompt", "--manifest", manifest(), "--annotations", (dir / "a.jsonl").string(), "--out",
                (dir / "s.jsonl").string(), "--mode", "speech_only", "--speech-only-source", "impression", "--split",
                "test"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto lines = sc::read_jsonl(dir / "s.jsonl");
  ASSERT_EQ(lines.size(), 12u);
  EXPECT_EQ(lines.front().value["utterance_id"], "dlg2_u0");
  EXPECT_EQ(lines.front().value["mode"], "speech_only");
  auto missing = cli({"prompt", "--manifest", manifest(), "--out", (dir / "x.jsonl").string()});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("MissingAnnotation"), std::string::npos) << missing.err;
}

TEST(Cli, ClassifyAgainstMockThenScore) {
  TempDir dir("pipeline");
  front_half(dir);
  sc::testing::MockEndpoint mock([](const std::string& prompt, int) {
    return sc::testing::MockReply{200, prompt.find("high volume") != std::string::npos ? "Angry." : "neutral"};
  });
  ::setenv(sc::inference::kApiKeyVariable, "k", 1);
  auto r = cli({"classify", "--prompts", (dir / "p.jsonl").string(), "--manifest", manifest(), "--out",
                (dir / "pred.jsonl").string(), "--base-url", mock.base_url(), "--model", "m", "--jobs", "2",
                "--no-latency"});
  ::unsetenv(sc::inference::kApiKeyVariable);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(mock.calls(), 24);
  for (const auto& h : mock.auth_headers()) EXPECT_EQ(h, "Bearer k");
  auto preds = sc::read_jsonl(dir / "pred.jsonl");
  ASSERT_EQ(preds.size(), 24u);
  EXPECT_FALSE(preds.front().value.contains("latency_ms"));
  auto s = cli({"score", "--pred", (dir / "pred.jsonl").string(), "--gold", manifest()});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_NE(s.out.find("unparseable 0/24"), std::string::npos) << s.out;
}

TEST(Cli, ExportFinetune) {
  TempDir dir("pipeline");
  front_half(dir);
  auto r = cli({"export-finetune", "--prompts", (dir / "p.jsonl").string(), "--out", (dir / "ft.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(sc::read_jsonl(dir / "ft.jsonl").size(), 24u);
}

TEST(Cli, EvalMlBothEncodings) {
  TempDir dir("pipeline");
  front_half(dir);
  auto num = cli({"eval-ml", "--manifest", manifest(), "--features", (dir / "f.jsonl").string(), "--out",
                  (dir / "ml.json").string(), "--model-out", (dir / "model.json").string()});
  ASSERT_EQ(num.code, 0) << num.err;
  EXPECT_NE(num.out.find("train 12, held-out 12 (test)"), std::string::npos) << num.out;
  auto report = sc::read_json_document(dir / "ml.json");
  EXPECT_EQ(report["encoding"], "numerical");
  EXPECT_NO_THROW(sc::baseline::model_from_json(sc::read_json_document(dir / "model.json")));

  auto bad = cli({"eval-ml", "--manifest", manifest(), "--features", (dir / "f.jsonl").string(), "--encoding", "onehot"});
  EXPECT_EQ(bad.code, 1);
  auto hot = cli({"eval-ml", "--manifest", manifest(), "--features", (dir / "f.jsonl").string(), "--encoding", "onehot",
                  "--thresholds", (dir / "t.json").string()});
  EXPECT_EQ(hot.code, 0) << hot.err;
}

TEST(Cli, SchemaMismatchIsReported) {
  TempDir dir("pipeline");
  front_half(dir);
  auto text = read_file(dir / "f.jsonl");
  for (auto p = text.find("features/1"); p != std::string::npos; p = text.find("features/1", p)) text.replace(p, 10, "features/2");
  sc::testing::write_file(dir / "f2.jsonl", text);
  auto r = cli({"thresholds", "--manifest", manifest(), "--features", (dir / "f2.jsonl").string(), "--out",
                (dir / "t.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("SchemaVersionMismatch"), std::string::npos) << r.err;
  auto wrong_stage = cli({"describe", "--manifest", manifest(), "--features", (dir / "a.jsonl").string(),
                          "--thresholds", (dir / "t.json").string(), "--out", (dir / "x.jsonl").string()});
  EXPECT_EQ(wrong_stage.code, 1);
}

TEST(Cli, UsageErrors) {
  EXPECT_NE(cli({}).code, 0);
  EXPECT_NE(cli({"thresholds", "--classes", "7", "--manifest", "m", "--features", "f", "--out", "o"}).code, 0);
  auto r = cli({"extract", "--manifest", "/nonexistent.jsonl", "--out", "/tmp/x.jsonl"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("speechcue extract: MissingInput"), std::string::npos) << r.err;
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
  TempDir a("pipeline"), b("pipeline");
  front_half(a);
  front_half(b);
  for (const char* name : {"f.jsonl", "t.json", "a.jsonl", "p.jsonl"})
    EXPECT_EQ(read_file(a / name), read_file(b / name)) << name;
}

TEST(Binary, RunsAsAProcess) {
  const std::string exe = SPEECHCUE_CLI_PATH;
  EXPECT_EQ(std::system((exe + " --help > /dev/null").c_str()), 0);
  EXPECT_NE(std::system((exe + " score --pred /nonexistent --gold /nonexistent 2> /dev/null").c_str()), 0);
}
