#include "tsketch/error.hpp"

namespace tsketch {

std::string_view to_string(ErrorCategory category) noexcept {
  switch (category) {
    case ErrorCategory::io: return "io";
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::rank: return "rank";
    case ErrorCategory::singular: return "singular";
    case ErrorCategory::config: return "config";
  }
  return "unknown";
}

}  // namespace tsketch
