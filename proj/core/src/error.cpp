#include "tritcal/error.hpp"

namespace tritcal {

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::invalid_parameter: return "invalid-parameter";
    case ErrorCategory::degenerate_data: return "degenerate-data";
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::ingestion: return "ingestion";
    case ErrorCategory::shape_mismatch: return "shape-mismatch";
    case ErrorCategory::training_diverged: return "training-diverged";
    case ErrorCategory::undefined_metric: return "undefined-metric";
    case ErrorCategory::degenerate_statistics: return "degenerate-statistics";
    case ErrorCategory::version_mismatch: return "version-mismatch";
    case ErrorCategory::checksum: return "checksum";
    case ErrorCategory::io: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCategory category, const std::string& message)
    : std::runtime_error(std::string(to_string(category)) + ": " + message),
      category_(category) {}

void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

}  // namespace tritcal
