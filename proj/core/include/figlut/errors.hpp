// Copyright 2026 the figlut-sim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace figlut {

// Bad arguments, bad config values, incompatible engine/weight pairings.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

enum class IoErrorKind {
  open_failed,
  bad_magic,
  bad_version,
  unknown_format,
  truncated,
  write_failed,
  malformed,
};

// File and stream problems. The CLI maps this to exit code 3.
class IoError : public std::runtime_error {
 public:
  IoError(IoErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  IoErrorKind kind() const { return kind_; }

 private:
  IoErrorKind kind_;
};

}  // namespace figlut
