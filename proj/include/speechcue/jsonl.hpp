#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "speechcue/error.hpp"

namespace speechcue {

using Json = nlohmann::ordered_json;

// Schema tags embedded in every stage output so a downstream stage can
// reject files produced by the wrong upstream stage.
namespace schema {
inline constexpr std::string_view kFeatures = "speechcue.features/1";
inline constexpr std::string_view kThresholds = "speechcue.thresholds/1";
inline constexpr std::string_view kAnnotations = "speechcue.annotations/1";
inline constexpr std::string_view kPrompts = "speechcue.prompts/1";
inline constexpr std::string_view kPredictions = "speechcue.predictions/1";
inline constexpr std::string_view kReport = "speechcue.report/1";
inline constexpr std::string_view kModel = "speechcue.mlp/1";
}  // namespace schema

struct JsonLine {
  std::size_t line_number = 0;  // 1-based
  Json value;
};

inline std::vector<JsonLine> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot open " + path.string());
  std::vector<JsonLine> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back({number, Json::parse(line)});
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::MalformedRecord,
                  path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
    if (!out.back().value.is_object())
      throw Error(ErrorCode::MalformedRecord,
                  path.string() + ":" + std::to_string(number) + ": not an object");
  }
  return out;
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  for (const auto& r : records) out << r.dump() << '\n';
}

inline Json read_json_document(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedRecord, path.string() + ": " + e.what());
  }
}

inline void write_json_document(const std::filesystem::path& path, const Json& doc) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

// Throws SchemaVersionMismatch unless `record["schema"] == expected`.
inline void expect_schema(const Json& record, std::string_view expected, std::string_view where) {
  auto it = record.find("schema");
  if (it == record.end() || !it->is_string() || it->get<std::string>() != expected) {
    std::string got = (it == record.end() || !it->is_string()) ? "<none>" : it->get<std::string>();
    throw Error(ErrorCode::SchemaVersionMismatch,
                std::string(where) + ": expected " + std::string(expected) + ", got " + got);
  }
}

}  // namespace speechcue
