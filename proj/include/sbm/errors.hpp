#pragma once

#include <stdexcept>
#include <string>

namespace sbm
{

/// Failure categories. The CLI maps each one to its own exit code.
enum class ErrorKind
{
  InvalidArgument,
  DegenerateEvaluation,
  IntegrationFailure,
  NonPeriodic,
  Aliasing,
  FitFailure,
  Io,
};

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string &what)
{
  throw Error(kind, what);
}

inline void Require(bool condition, const std::string &what)
{
  if (!condition)
  {
    Fail(ErrorKind::InvalidArgument, what);
  }
}

const char *ToString(ErrorKind kind) noexcept;

}  // namespace sbm
