#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "httplib.h"
#include "speechcue/error.hpp"
#include "speechcue/jsonl.hpp"
#include "speechcue/prompt.hpp"
#include "speechcue/text.hpp"

namespace speechcue::inference {

inline constexpr const char* kApiKeyVariable = "SPEECHCUE_API_KEY";

struct EndpointConfig {
  std::string base_url;  // e.g. "https://api.example.com/v1"
  std::string model_name;
  std::string api_key;
  double timeout_s = 60.0;
  int max_retries = 3;
  std::size_t max_concurrency = 4;
  double temperature = 0.0;
  double initial_backoff_s = 0.5;  // doubles after every failed attempt

  void validate() const {
    if (max_concurrency < 1) throw Error(ErrorCode::InvalidArgument, "max_concurrency must be >= 1");
    if (max_retries < 0) throw Error(ErrorCode::InvalidArgument, "max_retries must be >= 0");
    if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0)
      throw Error(ErrorCode::InvalidArgument, "base_url must start with http:// or https://");
  }

  static std::string api_key_from_env() {
    const char* key = std::getenv(kApiKeyVariable);
    return key ? std::string(key) : std::string();
  }
};

struct Prediction {
  std::string utterance_id;
  std::string raw_completion;
  std::optional<std::string> parsed_label;  // nullopt = unparseable
  double latency_ms = 0.0;
  std::optional<std::string> error;  // transport failure for this item

  bool operator==(const Prediction&) const = default;
};

// ---------------------------------------------------------------------------
// Label parsing

// Inflected forms generative models tend to produce instead of the label.
inline const std::map<std::string, std::string>& label_aliases() {
  static const std::map<std::string, std::string> aliases = {
      {"afraid", "fear"},         {"angry", "anger"},       {"disgusted", "disgust"},
      {"excited", "excitement"},  {"fearful", "fear"},      {"frustrated", "frustration"},
      {"happy", "happiness"},     {"joyful", "joy"},        {"sad", "sadness"},
      {"scared", "fear"},         {"surprised", "surprise"},
  };
  return aliases;
}

namespace detail {

inline bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Occurrence of `needle` in `haystack` not flanked by letters or digits.
inline bool contains_word(std::string_view haystack, std::string_view needle) {
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + 1)) {
    bool left = pos == 0 || !is_word_char(haystack[pos - 1]);
    std::size_t end = pos + needle.size();
    bool right = end == haystack.size() || !is_word_char(haystack[end]);
    if (left && right) return true;
  }
  return false;
}

inline std::string strip_punctuation(std::string_view s) {
  std::size_t b = 0, e = s.size();
  auto punct = [](char c) { return std::ispunct(static_cast<unsigned char>(c)) || std::isspace(static_cast<unsigned char>(c)); };
  while (b < e && punct(s[b])) ++b;
  while (e > b && punct(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace detail

// Case-folded exact match first; otherwise the completion must mention
// exactly one distinct label, either verbatim (as a whole word) or through
// the alias table. Anything else is unparseable.
inline std::optional<std::string> parse_label(std::string_view completion, const std::vector<std::string>& label_set) {
  const std::string norm = text::to_lower(text::trim(completion));
  const std::string bare = detail::strip_punctuation(norm);
  for (const auto& label : label_set)
    if (norm == label || bare == label) return label;

  std::set<std::string> matched;
  for (const auto& label : label_set)
    if (detail::contains_word(norm, label)) matched.insert(label);
  for (const auto& [alias, label] : label_aliases()) {
    if (std::find(label_set.begin(), label_set.end(), label) == label_set.end()) continue;
    if (detail::contains_word(norm, alias)) matched.insert(label);
  }
  if (matched.size() == 1) return *matched.begin();
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Wire format

inline Json chat_request(const EndpointConfig& cfg, const std::string& content) {
  Json msg;
  msg["role"] = "user";
  msg["content"] = content;
  Json body;
  body["model"] = cfg.model_name;
  body["temperature"] = cfg.temperature;
  body["messages"] = Json::array({msg});
  return body;
}

// First choice's message content.
inline std::optional<std::string> completion_text(const std::string& response_body) {
  try {
    auto j = Json::parse(response_body);
    const auto& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
  } catch (const nlohmann::json::exception&) {
  }
  return std::nullopt;
}

struct EndpointAddress {
  std::string scheme_host_port;
  std::string path;  // always ends with "/chat/completions"
};

inline EndpointAddress endpoint_address(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::InvalidArgument, "base_url lacks a scheme");
  auto path_start = base_url.find('/', scheme_end + 3);
  EndpointAddress a;
  a.scheme_host_port = base_url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? std::string() : base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  a.path = prefix + "/chat/completions";
  return a;
}

namespace detail {

inline bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

struct Attempt {
  enum class Outcome { Ok, HttpError, Unreachable, Unauthorized, BadResponse } outcome = Outcome::Ok;
  int status = 0;
  std::string body;
};

class ChatClient {
 public:
  explicit ChatClient(const EndpointConfig& cfg)
      : address_(endpoint_address(cfg.base_url)), client_(address_.scheme_host_port) {
    auto seconds = std::chrono::duration<double>(cfg.timeout_s);
    auto micros = std::chrono::duration_cast<std::chrono::microseconds>(seconds);
    client_.set_connection_timeout(micros);
    client_.set_read_timeout(micros);
    client_.set_write_timeout(micros);
    if (!cfg.api_key.empty()) client_.set_bearer_token_auth(cfg.api_key);
  }

  Attempt post(const std::string& body) {
    Attempt a;
    auto res = client_.Post(address_.path, body, "application/json");
    if (!res) {
      a.outcome = Attempt::Outcome::Unreachable;
      a.body = httplib::to_string(res.error());
      return a;
    }
    a.status = res->status;
    a.body = res->body;
    if (res->status == 401 || res->status == 403) a.outcome = Attempt::Outcome::Unauthorized;
    else if (res->status < 200 || res->status >= 300) a.outcome = Attempt::Outcome::HttpError;
    return a;
  }

 private:
  EndpointAddress address_;
  httplib::Client client_;
};

}  // namespace detail

// One request per prompt with at most `max_concurrency` in flight. Transient
// failures (connection errors, 408/429/5xx) are retried with exponential
// backoff. Auth failures, and connection failures that survive every retry,
// abort the batch; other per-item failures are recorded on the prediction.
inline std::vector<Prediction> classify_zero_shot(std::span<const PromptRecord> prompts, const EndpointConfig& cfg,
                                                  const std::vector<std::string>& label_set) {
  cfg.validate();
  std::vector<Prediction> out(prompts.size());
  if (prompts.empty()) return out;

  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    detail::ChatClient client(cfg);
    for (std::size_t i = next++; i < prompts.size() && !abort; i = next++) {
      const auto& prompt = prompts[i];
      Prediction& p = out[i];
      p.utterance_id = prompt.utterance_id;
      const std::string body = chat_request(cfg, prompt.full_text).dump();
      auto started = std::chrono::steady_clock::now();
      detail::Attempt attempt;
      for (int tries = 0;; ++tries) {
        attempt = client.post(body);
        bool transient = attempt.outcome == detail::Attempt::Outcome::Unreachable ||
                         (attempt.outcome == detail::Attempt::Outcome::HttpError &&
                          detail::retryable_status(attempt.status));
        if (!transient || tries >= cfg.max_retries || abort) break;
        std::this_thread::sleep_for(std::chrono::duration<double>(cfg.initial_backoff_s * (1 << tries)));
      }
      p.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();

      using Outcome = detail::Attempt::Outcome;
      if (attempt.outcome == Outcome::Unauthorized || attempt.outcome == Outcome::Unreachable) {
        std::lock_guard lock(failure_mutex);
        if (!failure) {
          failure = attempt.outcome == Outcome::Unauthorized
                        ? std::make_exception_ptr(Error(ErrorCode::AuthFailure, "HTTP " + std::to_string(attempt.status)))
                        : std::make_exception_ptr(Error(ErrorCode::EndpointUnreachable, cfg.base_url + ": " + attempt.body));
        }
        abort = true;
        return;
      }
      if (attempt.outcome == Outcome::HttpError) {
        p.error = "HTTP " + std::to_string(attempt.status);
        continue;
      }
      auto text = completion_text(attempt.body);
      if (!text) {
        p.error = "malformed response";
        continue;
      }
      p.raw_completion = *text;
      p.parsed_label = parse_label(*text, label_set);
    }
  };

  const std::size_t workers = std::min(cfg.max_concurrency, prompts.size());
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

// ---------------------------------------------------------------------------
// Records

inline Json to_json(const Prediction& p, bool include_latency = true) {
  Json j;
  j["schema"] = schema::kPredictions;
  j["utterance_id"] = p.utterance_id;
  j["parsed_label"] = p.parsed_label ? Json(*p.parsed_label) : Json(nullptr);
  j["raw_completion"] = p.raw_completion;
  if (p.error) j["error"] = *p.error;
  if (include_latency) j["latency_ms"] = p.latency_ms;
  return j;
}

inline Json finetune_record(const PromptRecord& r) {
  Json j;
  j["prompt"] = r.full_text;
  j["completion"] = *r.gold_label;
  return j;
}

// Writes {"prompt", "completion"} lines; refuses (writing nothing) when any
// record lacks a gold label.
inline std::size_t export_finetune_records(std::span<const PromptRecord> prompts, const std::filesystem::path& out) {
  for (const auto& r : prompts)
    if (!r.gold_label) throw Error(ErrorCode::MissingGoldLabel, r.utterance_id);
  std::vector<Json> lines;
  lines.reserve(prompts.size());
  for (const auto& r : prompts) lines.push_back(finetune_record(r));
  write_jsonl(out, lines);
  return lines.size();
}

}  // namespace speechcue::inference
