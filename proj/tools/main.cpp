// Copyright 2026 The shtrack Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

int main(int argc, char** argv) { return shtrack::cli::run_cli(argc, argv); }
