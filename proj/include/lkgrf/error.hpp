#pragma once

#include <stdexcept>
#include <string>

namespace lkgrf {

enum class ErrorCode {
  invalid_argument,
  invalid_dimension,
  domain,
  capability,
  nondegeneracy,
  complexity_guard,
  dependency,
  singularity,
  internal_consistency,
  inapplicable_bound,
  insufficient_sample,
  degenerate_distribution,
  parse,
  io,
};

const char* to_string(ErrorCode code);

/// Library-wide exception. Every failure that crosses a module boundary is an
/// `Error` so the C API can map it onto a status code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace lkgrf
