// Copyright 2026 the figlut-sim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace figlut::cli {

// Entry point behind the figlut binary: subcommands quantize, gemm, verify,
// sweep, report. Returns the process exit code: 0 success, 1 validation or
// usage error, 2 verification failure, 3 file error.
int run_cli(int argc, const char* const* argv);

// Shortest round-trippable decimal rendering used in every CSV and JSON
// number the tool emits ("%.17g").
std::string format_g17(double v);

// RFC 4180 quoting: fields containing commas, quotes, CR or LF are wrapped
// in double quotes with embedded quotes doubled.
std::string csv_escape(const std::string& field);

// One CSV record terminated by CRLF.
std::string csv_line(const std::vector<std::string>& fields);

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Parses RFC 4180 text (quoted fields, CRLF or LF record breaks); the first
// record is the header. Throws ValidationError on ragged or malformed input.
Csv parse_csv(const std::string& text);

}  // namespace figlut::cli
