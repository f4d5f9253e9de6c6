#pragma once

#include <stdexcept>
#include <string>

namespace hlab {

// Every failure carries a machine-readable reason code next to the message.
// The CLI maps the category onto its exit code.
enum class ErrorCategory {
  validation,     // rejected input
  inconsistency,  // an internal identity failed (should not happen on valid input)
  numerical,      // solver / sampler could not complete
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string reason, const std::string& message)
      : std::runtime_error(reason + ": " + message),
        category_(category),
        reason_(std::move(reason)) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  ErrorCategory category_;
  std::string reason_;
};

inline Error validation_error(std::string reason, const std::string& message) {
  return Error(ErrorCategory::validation, std::move(reason), message);
}

inline Error inconsistency_error(std::string reason, const std::string& message) {
  return Error(ErrorCategory::inconsistency, std::move(reason), message);
}

inline Error numerical_error(std::string reason, const std::string& message) {
  return Error(ErrorCategory::numerical, std::move(reason), message);
}

}  // namespace hlab
