#pragma once

#include <stdexcept>
#include <string>

namespace cesynth {

// Process exit codes used by the CLI. Every library error maps to one of them.
enum class ExitCode : int {
  kSuccess = 0,
  kUsage = 2,
  kData = 3,
  kNumeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Invalid arguments, configs or specs supplied by the caller.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ExitCode::kUsage, what) {}
};

/// Missing, truncated or inconsistent files and tensors.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::kData, what) {}
};

/// Non-finite values in a forward pass, loss or metric.
class NumericFault : public Error {
 public:
  explicit NumericFault(const std::string& what) : Error(ExitCode::kNumeric, what) {}
};

}  // namespace cesynth
