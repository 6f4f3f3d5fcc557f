#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dipsent {

enum class ErrorCode {
  Validation,
  Parse,
  OrphanComment,
  DuplicateId,
  EmptyThread,
  ZeroWeight,
  OracleRejected,
  OracleUnavailable,
  OracleProtocol,
  RewriteOutOfBand,
  RewriteEmpty,
  Configuration,
  NotFound,
  Io,
};

/// Stable snake_case name used in logs, run records and HTTP error bodies.
std::string_view code_name(ErrorCode code) noexcept;
/// Inverse of code_name; throws Error{Validation} for unknown names.
ErrorCode parse_error_code(std::string_view name);

/// Every failure raised by the library. `ids` carries offending record ids
/// (orphan comments, duplicate posts, runs in error); `line` the 1-based
/// input line for parse failures.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::vector<std::string> ids = {},
        std::optional<std::size_t> line = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::vector<std::string> ids_;
  std::optional<std::size_t> line_;
};

}  // namespace dipsent
