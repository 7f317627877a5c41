#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sbm/errors.hpp"

namespace sbm::cli
{

/// Process exit codes. Each failure class has its own value.
enum ExitCode : int
{
  kOk = 0,
  kInternal = 1,
  kUsage = 2,  ///< unknown flag or malformed command line
  kConfig = 3,  ///< unreadable or malformed config file
  kInvalidArgument = 4,
  kIo = 5,
  kDegenerate = 6,
  kIntegration = 7,
  kNonPeriodic = 8,
  kAliasing = 9,
  kFit = 10,
};

int ExitCodeFor(ErrorKind kind);

/// Entry point without the program name. Results go to `out`; errors are a
/// single line on `err`:
///   sideband-mixer: error kind=<kind> code=<exit> message="<text>"
int Run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace sbm::cli
