// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gtlens {

enum class ErrorCode {
  Parse,
  Unsupported,
  Valence,
  Schema,
  Vocab,
  NonFinite,
  NoConverge,
  Dim,
  Degenerate,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parse: return "E_PARSE";
    case ErrorCode::Unsupported: return "E_UNSUPPORTED";
    case ErrorCode::Valence: return "E_VALENCE";
    case ErrorCode::Schema: return "E_SCHEMA";
    case ErrorCode::Vocab: return "E_VOCAB";
    case ErrorCode::NonFinite: return "E_NONFINITE";
    case ErrorCode::NoConverge: return "E_NO_CONVERGE";
    case ErrorCode::Dim: return "E_DIM";
    case ErrorCode::Degenerate: return "E_DEGENERATE";
    case ErrorCode::Io: return "E_IO";
  }
  return "E_UNKNOWN";
}

/// Every failure raised by the library carries one of the codes above so that
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gtlens
