#pragma once

#include "frailty/common.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace frailty {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitSampler = 4,
  kExitDigest = 5,
};

/// Runs have different data digests and cannot be compared.
struct DigestMismatch : Error {
  using Error::Error;
};

/// Entry point of `frailtyph`; args excludes the program name.
/// Commands: fit, compare, simulate, curves, summarize.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace frailty
