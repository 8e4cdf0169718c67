#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tritcal {

// Every failure raised by the library carries one of these categories. The
// CLI maps them onto distinct exit codes.
enum class ErrorCategory {
  invalid_parameter,
  degenerate_data,
  parse,
  ingestion,
  shape_mismatch,
  training_diverged,
  undefined_metric,
  degenerate_statistics,
  version_mismatch,
  checksum,
  io,
};

std::string_view to_string(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message);

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] void fail(ErrorCategory category, const std::string& message);

}  // namespace tritcal
