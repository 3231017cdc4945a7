#ifndef TSKETCH_ERROR_HPP
#define TSKETCH_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace tsketch {

/// Machine-readable failure class. The CLI maps each one to its own exit code.
enum class ErrorCategory { io, shape, rank, singular, config };

std::string_view to_string(ErrorCategory category) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& what) {
  throw Error(category, what);
}

inline void require(bool condition, ErrorCategory category, const std::string& what) {
  if (!condition) fail(category, what);
}

}  // namespace tsketch

#endif  // TSKETCH_ERROR_HPP
