#include "dipsent/error.hpp"

namespace dipsent {

std::string_view code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Validation: return "validation_error";
    case ErrorCode::Parse: return "parse_error";
    case ErrorCode::OrphanComment: return "orphan_comment";
    case ErrorCode::DuplicateId: return "duplicate_id";
    case ErrorCode::EmptyThread: return "empty_thread";
    case ErrorCode::ZeroWeight: return "zero_weight";
    case ErrorCode::OracleRejected: return "oracle_rejected";
    case ErrorCode::OracleUnavailable: return "oracle_unavailable";
    case ErrorCode::OracleProtocol: return "oracle_protocol";
    case ErrorCode::RewriteOutOfBand: return "rewrite_out_of_band";
    case ErrorCode::RewriteEmpty: return "rewrite_empty";
    case ErrorCode::Configuration: return "configuration_error";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::Io: return "io_error";
  }
  return "unknown";
}

ErrorCode parse_error_code(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::Io); ++i) {
    const auto code = static_cast<ErrorCode>(i);
    if (code_name(code) == name) return code;
  }
  throw Error(ErrorCode::Validation, "unknown error code '" + std::string(name) + "'");
}

Error::Error(ErrorCode code, const std::string& message,
             std::vector<std::string> ids, std::optional<std::size_t> line)
    : std::runtime_error(message),
      code_(code),
      ids_(std::move(ids)),
      line_(line) {}

}  // namespace dipsent
