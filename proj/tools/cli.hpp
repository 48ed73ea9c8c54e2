#pragma once

// nvscope command-line front end, callable in-process.
//
// Exit codes:
//   0  success
//   1  invalid configuration (flags, environment or config file)
//   2  frequency outside the synthesizer range
//   3  file I/O or input parse failure
//   4  acquisition failure (port, timeout, protocol, device error)
//   5  analysis failure (a partial report is still written)
//   64 command-line usage error

#include <iosfwd>
#include <string>
#include <vector>

#include "config.hpp"

namespace nvscope::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 1,
    kExitOutOfRange = 2,
    kExitIo = 3,
    kExitAcquire = 4,
    kExitFit = 5,
    kExitUsage = 64,
};

/// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const EnvLookup& env = process_env());

}  // namespace nvscope::cli
