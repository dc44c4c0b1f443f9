#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "speechcue/error.hpp"
#include "speechcue/jsonl.hpp"
#include "speechcue/text.hpp"

namespace speechcue::dsp {

struct AudioClip {
  std::vector<double> samples;  // mono, [-1, 1]
  std::uint32_t sample_rate = 0;

  double duration_s() const {
    return sample_rate ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// ---------------------------------------------------------------------------
// WAV I/O (RIFF/WAVE, 16-bit PCM, mono or stereo)

namespace detail {

inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

inline constexpr std::uint16_t kFormatPcm = 1;
inline constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace detail

inline AudioClip decode_wav_bytes(std::span<const unsigned char> bytes) {
  using detail::read_u16;
  using detail::read_u32;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw Error(ErrorCode::CorruptHeader, "missing RIFF/WAVE signature");

  std::optional<std::uint16_t> channels;
  std::uint16_t bits = 0;
  std::uint32_t rate = 0;
  std::span<const unsigned char> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    std::uint32_t size = read_u32(chunk + 4);
    std::size_t body = pos + 8;
    std::size_t available = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || size > available) throw Error(ErrorCode::CorruptHeader, "short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      std::uint16_t format = read_u16(f);
      if (format == detail::kFormatExtensible && size >= 40) format = read_u16(f + 24);
      if (format != detail::kFormatPcm)
        throw Error(ErrorCode::UnsupportedEncoding, "format tag " + std::to_string(format) + " is not PCM");
      channels = read_u16(f + 2);
      rate = read_u32(f + 4);
      bits = read_u16(f + 14);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      // Truncated data chunks are common in the wild; keep what is present.
      data = bytes.subspan(body, std::min<std::size_t>(size, available));
      have_data = true;
    }
    pos = body + size + (size & 1u);
  }

  if (!channels) throw Error(ErrorCode::CorruptHeader, "no fmt chunk");
  if (!have_data) throw Error(ErrorCode::CorruptHeader, "no data chunk");
  if (bits != 16) throw Error(ErrorCode::UnsupportedEncoding, std::to_string(bits) + "-bit samples");
  if (*channels != 1 && *channels != 2)
    throw Error(ErrorCode::UnsupportedEncoding, std::to_string(*channels) + " channels");
  if (rate == 0) throw Error(ErrorCode::CorruptHeader, "zero sample rate");

  const std::size_t frame_bytes = 2u * *channels;
  const std::size_t frames = data.size() / frame_bytes;
  AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < *channels; ++c) {
      auto raw = static_cast<std::int16_t>(read_u16(data.data() + i * frame_bytes + 2 * c));
      acc += raw / 32768.0;
    }
    clip.samples[i] = acc / *channels;
  }
  return clip;
}

inline AudioClip decode_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_wav_bytes(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

// Interleaved 16-bit PCM writer; samples are clamped and rounded.
inline std::vector<unsigned char> encode_wav(std::span<const double> interleaved, std::uint32_t sample_rate,
                                             std::uint16_t channels = 1) {
  using detail::put_u16;
  using detail::put_u32;
  std::vector<unsigned char> out;
  const auto data_bytes = static_cast<std::uint32_t>(interleaved.size() * 2);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, detail::kFormatPcm);
  put_u16(out, channels);
  put_u32(out, sample_rate);
  put_u32(out, sample_rate * channels * 2);
  put_u16(out, static_cast<std::uint16_t>(channels * 2));
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (double s : interleaved) {
    double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
    auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

inline void write_wav(const std::filesystem::path& path, std::span<const double> interleaved,
                      std::uint32_t sample_rate, std::uint16_t channels = 1) {
  auto bytes = encode_wav(interleaved, sample_rate, channels);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------------------
// Framing

inline constexpr double kRmsFloor = 1e-5;  // -100 dB

struct FrameLayout {
  std::size_t frame_len = 0;
  std::size_t hop = 0;

  std::size_t count(std::size_t num_samples) const {
    return num_samples < frame_len ? 0 : (num_samples - frame_len) / hop + 1;
  }
};

inline FrameLayout frame_layout(std::uint32_t sample_rate, double frame_ms, double hop_ms) {
  if (!(hop_ms > 0.0) || frame_ms < hop_ms)
    throw Error(ErrorCode::InvalidArgument, "need frame_ms >= hop_ms > 0");
  FrameLayout layout;
  layout.frame_len = static_cast<std::size_t>(std::lround(frame_ms * sample_rate / 1000.0));
  layout.hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(hop_ms * sample_rate / 1000.0)));
  if (layout.frame_len == 0) throw Error(ErrorCode::InvalidArgument, "frame shorter than one sample");
  return layout;
}

inline double rms(std::span<const double> frame) {
  double acc = 0.0;
  for (double s : frame) acc += s * s;
  return frame.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(frame.size()));
}

inline double to_db(double rms_value) { return 20.0 * std::log10(std::max(rms_value, kRmsFloor)); }

inline std::vector<double> frame_rms_db(const AudioClip& clip, double frame_ms, double hop_ms) {
  auto layout = frame_layout(clip.sample_rate, frame_ms, hop_ms);
  const std::size_t n = layout.count(clip.samples.size());
  if (n == 0) throw Error(ErrorCode::ClipTooShort, "clip shorter than one frame");
  std::vector<double> out(n);
  std::span<const double> all(clip.samples);
  for (std::size_t i = 0; i < n; ++i) out[i] = to_db(rms(all.subspan(i * layout.hop, layout.frame_len)));
  return out;
}

// ---------------------------------------------------------------------------
// Pitch

struct PitchConfig {
  double frame_ms = 40.0;
  double hop_ms = 10.0;
  double f_min = 70.0;
  double f_max = 400.0;
  double threshold = 0.2;      // cumulative-mean-normalized difference threshold
  double energy_gate_db = 35.0;  // voiced frames must be within this of the loudest frame
};

struct PitchFrame {
  std::optional<double> f0;  // nullopt = unvoiced
  double rms_db = 0.0;
};

namespace detail {

// Cumulative-mean-normalized difference d'(tau), tau in [0, max_lag].
inline std::vector<double> cmnd(std::span<const double> frame, std::size_t max_lag) {
  std::vector<double> d(max_lag + 1, 0.0);
  const std::size_t n = frame.size();
  for (std::size_t tau = 1; tau <= max_lag; ++tau) {
    double acc = 0.0;
    for (std::size_t j = 0; j + tau < n; ++j) {
      double diff = frame[j] - frame[j + tau];
      acc += diff * diff;
    }
    // Shorter overlap at larger lags; rescale to a per-sample energy.
    d[tau] = acc / static_cast<double>(n - tau);
  }
  std::vector<double> out(max_lag + 1, 1.0);
  double running = 0.0;
  for (std::size_t tau = 1; tau <= max_lag; ++tau) {
    running += d[tau];
    out[tau] = running > 0.0 ? d[tau] * static_cast<double>(tau) / running : 1.0;
  }
  return out;
}

// Refines integer lag `tau` by fitting a parabola through its neighbours.
inline double parabolic_lag(const std::vector<double>& d, std::size_t tau) {
  if (tau == 0 || tau + 1 >= d.size()) return static_cast<double>(tau);
  double a = d[tau - 1], b = d[tau], c = d[tau + 1];
  double denom = a - 2.0 * b + c;
  if (std::abs(denom) < 1e-15) return static_cast<double>(tau);
  double shift = 0.5 * (a - c) / denom;
  return static_cast<double>(tau) + std::clamp(shift, -0.5, 0.5);
}

inline std::optional<double> yin_frame(std::span<const double> frame, std::uint32_t sample_rate,
                                       const PitchConfig& cfg) {
  const auto min_lag = static_cast<std::size_t>(std::floor(sample_rate / cfg.f_max));
  const auto max_lag = static_cast<std::size_t>(std::ceil(sample_rate / cfg.f_min));
  if (max_lag + 2 > frame.size()) return std::nullopt;
  auto d = cmnd(frame, max_lag + 1);
  for (std::size_t tau = std::max<std::size_t>(min_lag, 2); tau <= max_lag; ++tau) {
    if (d[tau] >= cfg.threshold) continue;
    while (tau + 1 <= max_lag && d[tau + 1] < d[tau]) ++tau;
    // The edge lags straddle the band limits; interpolation may step just past them.
    return std::clamp(sample_rate / parabolic_lag(d, tau), cfg.f_min, cfg.f_max);
  }
  return std::nullopt;
}

}  // namespace detail

inline void validate_band(std::uint32_t sample_rate, const PitchConfig& cfg) {
  if (!(cfg.f_min > 0.0) || !(cfg.f_min < cfg.f_max))
    throw Error(ErrorCode::InvalidBand, "need 0 < f_min < f_max");
  if (!(cfg.f_max < sample_rate / 2.0)) throw Error(ErrorCode::InvalidBand, "f_max must be below Nyquist");
  if (cfg.frame_ms / 1000.0 < 2.0 / cfg.f_min)
    throw Error(ErrorCode::InvalidBand, "pitch frame must hold two periods of f_min");
}

// Per-frame F0 via the cumulative-mean-normalized difference function.
// A frame is voiced when the periodicity test passes and its RMS lies within
// `energy_gate_db` of the loudest frame (and above the silence floor).
inline std::vector<PitchFrame> estimate_pitch(const AudioClip& clip, const PitchConfig& cfg = {}) {
  validate_band(clip.sample_rate, cfg);
  auto layout = frame_layout(clip.sample_rate, cfg.frame_ms, cfg.hop_ms);
  const std::size_t n = layout.count(clip.samples.size());
  std::vector<PitchFrame> out(n);
  if (n == 0) return out;

  std::span<const double> all(clip.samples);
  double loudest = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    out[i].rms_db = to_db(rms(all.subspan(i * layout.hop, layout.frame_len)));
    loudest = std::max(loudest, out[i].rms_db);
  }
  const double silence_db = to_db(kRmsFloor);

  for (std::size_t i = 0; i < n; ++i) {
    if (out[i].rms_db <= silence_db || out[i].rms_db < loudest - cfg.energy_gate_db) continue;
    out[i].f0 = detail::yin_frame(all.subspan(i * layout.hop, layout.frame_len), clip.sample_rate, cfg);
  }
  return out;
}

inline std::vector<PitchFrame> estimate_pitch(const AudioClip& clip, double frame_ms, double hop_ms, double f_min,
                                              double f_max) {
  PitchConfig cfg;
  cfg.frame_ms = frame_ms;
  cfg.hop_ms = hop_ms;
  cfg.f_min = f_min;
  cfg.f_max = f_max;
  return estimate_pitch(clip, cfg);
}

// ---------------------------------------------------------------------------
// Speaking rate and the feature bundle

inline double estimate_speaking_rate(std::string_view transcript, double duration_s) {
  if (!(duration_s > 0.0)) throw Error(ErrorCode::NonPositiveDuration, std::to_string(duration_s));
  return static_cast<double>(text::split_whitespace(transcript).size()) / duration_s;
}

struct DspConfig {
  double volume_frame_ms = 25.0;
  double volume_hop_ms = 10.0;
  PitchConfig pitch;
};

struct ProsodicFeatures {
  double avg_volume_db = 0.0;
  double volume_variation_db = 0.0;
  std::optional<double> avg_pitch_hz;
  std::optional<double> pitch_variation_hz;
  double speaking_rate_wps = 0.0;
  double voiced_ratio = 0.0;
  double duration_s = 0.0;
  bool no_transcript = false;  // speaking rate forced to 0

  bool operator==(const ProsodicFeatures&) const = default;
};

// Population mean and standard deviation.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) acc += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(acc / static_cast<double>(values.size()));
  return out;
}

inline ProsodicFeatures extract_features(const AudioClip& clip, std::string_view transcript,
                                         const DspConfig& cfg = {}) {
  auto volume = frame_rms_db(clip, cfg.volume_frame_ms, cfg.volume_hop_ms);
  ProsodicFeatures f;
  f.duration_s = clip.duration_s();
  auto vol = mean_std(volume);
  f.avg_volume_db = vol.mean;
  f.volume_variation_db = vol.std;

  auto pitch = estimate_pitch(clip, cfg.pitch);
  std::vector<double> voiced;
  for (const auto& p : pitch)
    if (p.f0) voiced.push_back(*p.f0);
  f.voiced_ratio = pitch.empty() ? 0.0 : static_cast<double>(voiced.size()) / pitch.size();
  if (!voiced.empty()) {
    auto stats = mean_std(voiced);
    f.avg_pitch_hz = stats.mean;
    f.pitch_variation_hz = stats.std;
  }

  f.no_transcript = text::trim(transcript).empty();
  f.speaking_rate_wps = estimate_speaking_rate(transcript, f.duration_s);
  return f;
}

// ---------------------------------------------------------------------------
// Feature records

inline Json to_json(const std::string& utterance_id, const ProsodicFeatures& f) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  Json j;
  j["schema"] = schema::kFeatures;
  j["utterance_id"] = utterance_id;
  j["avg_volume_db"] = f.avg_volume_db;
  j["volume_variation_db"] = f.volume_variation_db;
  j["avg_pitch_hz"] = opt(f.avg_pitch_hz);
  j["pitch_variation_hz"] = opt(f.pitch_variation_hz);
  j["speaking_rate_wps"] = f.speaking_rate_wps;
  j["voiced_ratio"] = f.voiced_ratio;
  j["duration_s"] = f.duration_s;
  j["no_transcript"] = f.no_transcript;
  return j;
}

inline ProsodicFeatures features_from_json(const Json& j) {
  expect_schema(j, schema::kFeatures, "feature record");
  auto opt = [&](const char* key) -> std::optional<double> {
    const auto& v = j.at(key);
    return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
  };
  try {
    ProsodicFeatures f;
    f.avg_volume_db = j.at("avg_volume_db").get<double>();
    f.volume_variation_db = j.at("volume_variation_db").get<double>();
    f.avg_pitch_hz = opt("avg_pitch_hz");
    f.pitch_variation_hz = opt("pitch_variation_hz");
    f.speaking_rate_wps = j.at("speaking_rate_wps").get<double>();
    f.voiced_ratio = j.at("voiced_ratio").get<double>();
    f.duration_s = j.at("duration_s").get<double>();
    f.no_transcript = j.value("no_transcript", false);
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("feature record: ") + e.what());
  }
}

}  // namespace speechcue::dsp
