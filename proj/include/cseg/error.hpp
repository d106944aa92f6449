#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cseg {

// Coarse failure classes. The CLI prints the category name verbatim so
// scripts can dispatch on it.
enum class ErrorCategory {
  kDimension,
  kFormat,
  kIo,
  kInvalidArgument,
  kDegenerate,
  kNonFinite,
};

std::string_view category_name(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

}  // namespace cseg
