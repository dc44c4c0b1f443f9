#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace speechcue {

// Every failure surfaced by the library carries one of these codes so the
// CLI (and tests) can tell error classes apart without parsing messages.
enum class ErrorCode {
  MalformedRecord,
  DuplicateUtteranceId,
  GapInTurnIndex,
  UnknownLabel,
  UnknownUtterance,
  UnsupportedEncoding,
  CorruptHeader,
  ClipTooShort,
  InvalidBand,
  NonPositiveDuration,
  EmptyInput,
  MissingUtterance,
  BadBoundaryCount,
  InvalidArgument,
  MissingVolume,
  MissingAnnotation,
  EndpointUnreachable,
  AuthFailure,
  MissingGoldLabel,
  SchemeMismatch,
  DegenerateData,
  DimensionMismatch,
  LengthMismatch,
  LabelOutsideSet,
  LabelSetMismatch,
  MissingInput,
  SchemaVersionMismatch,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::DuplicateUtteranceId: return "DuplicateUtteranceId";
    case ErrorCode::GapInTurnIndex: return "GapInTurnIndex";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::UnknownUtterance: return "UnknownUtterance";
    case ErrorCode::UnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::CorruptHeader: return "CorruptHeader";
    case ErrorCode::ClipTooShort: return "ClipTooShort";
    case ErrorCode::InvalidBand: return "InvalidBand";
    case ErrorCode::NonPositiveDuration: return "NonPositiveDuration";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MissingUtterance: return "MissingUtterance";
    case ErrorCode::BadBoundaryCount: return "BadBoundaryCount";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingVolume: return "MissingVolume";
    case ErrorCode::MissingAnnotation: return "MissingAnnotation";
    case ErrorCode::EndpointUnreachable: return "EndpointUnreachable";
    case ErrorCode::AuthFailure: return "AuthFailure";
    case ErrorCode::MissingGoldLabel: return "MissingGoldLabel";
    case ErrorCode::SchemeMismatch: return "SchemeMismatch";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::LabelOutsideSet: return "LabelOutsideSet";
    case ErrorCode::LabelSetMismatch: return "LabelSetMismatch";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace speechcue
