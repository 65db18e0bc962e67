// Copyright 2026 The flowinv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace flowinv::cli {

enum ExitCode : int {
  kExitOk = 0,
  /// Bad arguments, schema violations, unknown subcommands, missing inputs.
  kExitConfig = 1,
  /// Failures after the configuration was accepted (numerics, tapes, I/O).
  kExitRuntime = 2,
};

/// Environment variable overriding the config seed (a --seed flag wins over it).
inline constexpr const char* kSeedEnv = "FLOWINV_SEED";

/// Runs one command line. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string usage();

}  // namespace flowinv::cli
