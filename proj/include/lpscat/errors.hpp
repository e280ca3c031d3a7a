#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace lpscat {

// Exit codes are shared with the CLI.
enum class ExitCode : int { ok = 0, config = 2, regime = 3, divergence = 4, io = 5 };

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Bad parameter or configuration value.
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error(ExitCode::config, what) {}
};

// Precondition on the physical regime does not hold (e.g. below lambda_0,
// symbol singularity, residual precondition).
class RegimeError : public Error {
 public:
  explicit RegimeError(const std::string& what) : Error(ExitCode::regime, what) {}
};

class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& what) : Error(ExitCode::divergence, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ExitCode::io, what) {}
};

// Short numeric formatting for messages.
inline std::string num(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.4g", v);
  return b;
}

}  // namespace lpscat
