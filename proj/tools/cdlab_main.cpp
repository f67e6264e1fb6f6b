// Copyright (c) 2026 cdlab authors
// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <vector>

#include "cdlab/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cdlab::cli::run_command(args);
}
