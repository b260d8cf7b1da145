#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace syngraph {

enum class Errc {
  MissingField,
  InvalidField,
  RatingOutOfRange,
  Io,
  Parse,
  EmptyStream,
  InvalidArgument,
  OutOfOrderEvent,
  UnknownNode,
  UnknownUser,
  DegenerateInput,
  RateLimited,
  ServerError,
  AuthError,
  ClientError,
  Timeout,
  InvalidConfig,
  InvalidTemplate,
  EmptyHistory,
  InsufficientNeighbors,
  NoCandidates,
  UnparseableOutput,
  MissingSynthesis,
  LengthMismatch,
  EmptyInput,
  DivisionByZero,
  PreconditionViolated,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::MissingField: return "MissingField";
    case Errc::InvalidField: return "InvalidField";
    case Errc::RatingOutOfRange: return "RatingOutOfRange";
    case Errc::Io: return "IoError";
    case Errc::Parse: return "ParseError";
    case Errc::EmptyStream: return "EmptyStream";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::OutOfOrderEvent: return "OutOfOrderEvent";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::UnknownUser: return "UnknownUser";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::RateLimited: return "RateLimited";
    case Errc::ServerError: return "ServerError";
    case Errc::AuthError: return "AuthError";
    case Errc::ClientError: return "ClientError";
    case Errc::Timeout: return "Timeout";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidTemplate: return "InvalidTemplate";
    case Errc::EmptyHistory: return "EmptyHistory";
    case Errc::InsufficientNeighbors: return "InsufficientNeighbors";
    case Errc::NoCandidates: return "NoCandidates";
    case Errc::UnparseableOutput: return "UnparseableOutput";
    case Errc::MissingSynthesis: return "MissingSynthesis";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::DivisionByZero: return "DivisionByZero";
    case Errc::PreconditionViolated: return "PreconditionViolated";
  }
  return "Unknown";
}

// Every failure in the library surfaces as this exception. `code()` is the
// stable machine-readable kind; `detail()` carries the free-form context
// (a field name, a node id, a backend message).
class Error : public std::runtime_error {
 public:
  Error(Errc code, std::string detail, std::optional<std::size_t> line = {})
      : std::runtime_error(format(code, detail, line)),
        code_(code),
        detail_(std::move(detail)),
        line_(line) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  // 1-based input line for ParseError, when known.
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  static std::string format(Errc code, const std::string& detail,
                            std::optional<std::size_t> line) {
    std::string out(to_string(code));
    if (line) out += " at line " + std::to_string(*line);
    if (!detail.empty()) out += ": " + detail;
    return out;
  }

  Errc code_;
  std::string detail_;
  std::optional<std::size_t> line_;
};

}  // namespace syngraph
