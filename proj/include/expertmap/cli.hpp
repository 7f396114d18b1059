// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace expertmap {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitInput = 2 };

/// Runs one command-line invocation. `args` excludes the program name.
/// Machine-readable output goes to `out` unless --output names a file;
/// human-readable summaries and diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace expertmap
