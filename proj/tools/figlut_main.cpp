// Copyright 2026 the figlut-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "figlut/cli.hpp"

int main(int argc, char** argv) { return figlut::cli::run_cli(argc, argv); }
