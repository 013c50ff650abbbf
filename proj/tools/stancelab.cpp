// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The stancelab Authors

#include <iostream>
#include <string>
#include <vector>

#include "stancelab/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return stancelab::cli::dispatch(args, std::cout, std::cerr);
}
