// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The expertmap Authors. All Rights Reserved.

#include <iostream>
#include <string>
#include <vector>

#include "expertmap/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return expertmap::run_cli(args, std::cout, std::cerr);
}
