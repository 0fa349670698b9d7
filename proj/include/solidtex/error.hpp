#pragma once

#include <stdexcept>
#include <string>

namespace solidtex {

/// Error categories surfaced by the command-line tool as exit codes.
enum class ErrorCategory { Config = 2, Io = 3, Numeric = 4 };

class Error : public std::runtime_error {
public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

  const char* category_name() const noexcept {
    switch (category_) {
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Io: return "io";
    case ErrorCategory::Numeric: return "numeric";
    }
    return "unknown";
  }

private:
  ErrorCategory category_;
};

/// Invalid parameters or configuration (bad keys, sizes, pyramid depth).
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::Config, what) {}
};

/// Unreadable, unwritable or malformed files.
struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorCategory::Io, what) {}
};

/// Malformed persisted data (bad magic, truncated payload).
struct FormatError : Error {
  explicit FormatError(const std::string& what) : Error(ErrorCategory::Io, what) {}
};

/// Input with no usable structure (single-level histogram, image smaller than an offset).
struct DegenerateInputError : Error {
  explicit DegenerateInputError(const std::string& what) : Error(ErrorCategory::Numeric, what) {}
};

/// Index or coordinate outside the valid range.
struct BoundsError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// Caller violated an operation's precondition.
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

} // namespace solidtex
