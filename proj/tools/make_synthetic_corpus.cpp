// Regenerates the bundled 24-utterance synthetic corpus: two 12-turn
// dialogues, four speakers, six emotion labels. Each label has a prosodic
// prototype (loudness, pitch level and movement, speaking rate) so the
// pipeline has structure to find. Output is deterministic.
//
//   make_synthetic_corpus <out-dir>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "speechcue/corpus.hpp"
#include "speechcue/dsp.hpp"

namespace {

using speechcue::Split;
using speechcue::Utterance;

struct Prototype {
  const char* label;
  double amplitude;     // peak of the voiced envelope
  double pitch_scale;   // relative to the speaker's base F0
  double pitch_swing;   // relative depth of the F0 contour
  double loudness_swing;  // depth of the slow loudness modulation
  double words_per_s;
};

constexpr Prototype kPrototypes[] = {
    {"anger", 0.55, 1.15, 0.22, 0.85, 3.4},       {"happiness", 0.35, 1.30, 0.15, 0.45, 3.0},
    {"excitement", 0.50, 1.40, 0.26, 0.75, 3.8},  {"sadness", 0.07, 0.85, 0.03, 0.05, 1.6},
    {"frustration", 0.30, 1.00, 0.10, 0.60, 2.8}, {"neutral", 0.18, 1.00, 0.05, 0.15, 2.3},
};

const Prototype& prototype(const std::string& label) {
  for (const auto& p : kPrototypes)
    if (label == p.label) return p;
  throw std::runtime_error("no prototype for " + label);
}

struct Turn {
  const char* speaker;
  const char* label;
  const char* transcript;
};

struct Speaker {
  const char* id;
  const char* group;
  double base_f0;
};

constexpr Speaker kSpeakers[] = {
    {"ava", "female", 205.0}, {"ben", "male", 118.0}, {"cora", "female", 220.0}, {"dev", "male", 110.0}};

const Speaker& speaker(const std::string& id) {
  for (const auto& s : kSpeakers)
    if (id == s.id) return s;
  throw std::runtime_error("no speaker " + id);
}

// Two dialogues; speakers alternate within each.
const std::vector<std::vector<Turn>> kDialogues = {
    {
        {"ava", "neutral", "I picked up the keys from the front desk this morning"},
        {"ben", "neutral", "Okay, did they say when the room would be ready"},
        {"ava", "frustration", "They said noon, but that is what they said yesterday too"},
        {"ben", "frustration", "This keeps happening and nobody ever calls us back about it"},
        {"ava", "anger", "I am done waiting, I want to speak to the manager right now"},
        {"ben", "sadness", "I just wanted one quiet weekend"},
        {"ava", "sadness", "I know, I am sorry it turned out this way"},
        {"ben", "neutral", "Let us check the other hotel on the corner"},
        {"ava", "happiness", "Oh look, they have a room with a view of the water"},
        {"ben", "excitement", "No way, that is amazing, let us book it before someone else does"},
        {"ava", "excitement", "Yes, go go go, grab it, I will get the bags right now"},
        {"ben", "happiness", "This might turn out to be a great trip after all"},
    },
    {
        {"cora", "neutral", "The results from the second experiment came in overnight"},
        {"dev", "neutral", "Did the numbers match what we expected"},
        {"cora", "excitement", "They beat every baseline we had, by a lot, I cannot believe it"},
        {"dev", "happiness", "That is really good news, you worked hard on this"},
        {"cora", "happiness", "Thank you, it feels good to see it finally work"},
        {"dev", "frustration", "But the reviewers will ask why the first run failed again"},
        {"cora", "frustration", "We already explained that twice in the last round of comments"},
        {"dev", "anger", "Then they should read the paper before they write another useless review"},
        {"cora", "sadness", "Maybe it is just not good enough for them"},
        {"dev", "sadness", "I thought this one would be different"},
        {"cora", "anger", "No, I refuse to give up on it because of one bad reviewer"},
        {"dev", "neutral", "Fine, let us draft the response together tomorrow"},
    },
};

std::vector<double> synthesize(const Speaker& spk, const Prototype& proto, std::size_t words, std::uint32_t rate,
                               std::mt19937& rng) {
  const double duration = static_cast<double>(words) / proto.words_per_s;
  const auto n = static_cast<std::size_t>(duration * rate);
  const double f0 = spk.base_f0 * proto.pitch_scale;
  const double syllable_rate = proto.words_per_s * 1.4;
  std::normal_distribution<double> noise(0.0, 0.0015);
  std::vector<double> samples(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    // Two-tone intonation contour.
    const double contour = 1.0 + proto.pitch_swing * (0.6 * std::sin(2.0 * std::numbers::pi * 1.3 * t) +
                                                      0.4 * std::sin(2.0 * std::numbers::pi * 3.1 * t + 1.0));
    phase += 2.0 * std::numbers::pi * f0 * contour / rate;
    // Syllable envelope: raised-cosine bursts with short gaps.
    const double syl = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * syllable_rate * t);
    const double swell = (1.0 + proto.loudness_swing * std::sin(2.0 * std::numbers::pi * 0.7 * t)) /
                         (1.0 + proto.loudness_swing);
    const double envelope = proto.amplitude * swell * std::pow(syl, 0.6);
    const double voice = std::sin(phase) + 0.45 * std::sin(2.0 * phase) + 0.2 * std::sin(3.0 * phase);
    samples[i] = std::clamp(envelope * voice / 1.65 + noise(rng), -1.0, 1.0);
  }
  return samples;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <out-dir>\n", argv[0]);
    return 2;
  }
  namespace fs = std::filesystem;
  const fs::path root = argv[1];
  constexpr std::uint32_t kRate = 16000;
  std::mt19937 rng(20241018);

  std::vector<Utterance> utterances;
  for (std::size_t d = 0; d < kDialogues.size(); ++d) {
    const std::string dialogue = "dlg" + std::to_string(d + 1);
    for (std::size_t t = 0; t < kDialogues[d].size(); ++t) {
      const auto& turn = kDialogues[d][t];
      const auto& spk = speaker(turn.speaker);
      Utterance u;
      u.dataset_id = "synthetic";
      u.dialogue_id = dialogue;
      u.turn_index = static_cast<std::uint32_t>(t);
      u.utterance_id = dialogue + "_u" + std::to_string(t);
      u.speaker_id = spk.id;
      u.speaker_group = spk.group;
      u.transcript = turn.transcript;
      u.label = turn.label;
      u.audio_path = "wav/" + u.utterance_id + ".wav";
      u.split = d == 0 ? Split::Train : Split::Test;
      auto words = speechcue::text::split_whitespace(u.transcript).size();
      auto samples = synthesize(spk, prototype(turn.label), words, kRate, rng);
      speechcue::dsp::write_wav(root / *u.audio_path, samples, kRate);
      utterances.push_back(std::move(u));
    }
  }
  auto manifest = speechcue::Manifest::from_utterances(std::move(utterances));
  speechcue::write_manifest(root / "manifest.jsonl", manifest);
  std::printf("wrote %zu utterances to %s\n", manifest.size(), root.string().c_str());
  return 0;
}
