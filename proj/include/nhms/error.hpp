#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nhms {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Raised when a coherence grows past the analytic bound; the usual cure is a smaller dt.
class InstabilityError : public Error {
 public:
  using Error::Error;
};

struct FieldIssue {
  std::string path;
  std::string message;

  bool operator==(const FieldIssue&) const = default;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<FieldIssue> issues)
      : Error(format(issues)), issues_(std::move(issues)) {}

  const std::vector<FieldIssue>& issues() const noexcept { return issues_; }

  bool mentions(const std::string& path) const {
    for (const auto& issue : issues_) {
      if (issue.path == path) return true;
    }
    return false;
  }

 private:
  static std::string format(const std::vector<FieldIssue>& issues) {
    std::string text = "invalid configuration:";
    for (const auto& issue : issues) {
      text += "\n  " + (issue.path.empty() ? std::string("<root>") : issue.path) + ": " +
              issue.message;
    }
    return text;
  }

  std::vector<FieldIssue> issues_;
};

}  // namespace nhms
