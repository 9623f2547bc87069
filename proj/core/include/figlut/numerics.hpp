// Copyright 2026 the figlut-sim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "figlut/errors.hpp"

namespace figlut {

// Binary floating point formats emulated on top of fp64. All arithmetic in the
// simulator runs in fp64 and narrows at operation boundaries via
// round_to_format, so a value "in" one of these formats is simply a double
// that the format can represent exactly.
enum class FpFormat : uint8_t {
  fp16 = 0,  // 1/5/10
  bf16 = 1,  // 1/8/7
  fp32 = 2,  // 1/8/23
  fp64 = 3,  // 1/11/52
};

int exponent_bits(FpFormat fmt);
int mantissa_bits(FpFormat fmt);
int storage_bytes(FpFormat fmt);
const char* format_name(FpFormat fmt);
FpFormat format_from_name(const std::string& name);

// Largest finite value of the format.
double max_finite(FpFormat fmt);

// Round a double to the nearest value representable in fmt, ties to even.
// Overflow saturates to +-infinity, subnormals are honored, NaN propagates.
// round_to_format(round_to_format(v, f), f) == round_to_format(v, f).
double round_to_format(double v, FpFormat fmt);

// Raw storage encoding of a representable value (16/32/64-bit patterns,
// returned in the low bits). v must be a fixpoint of round_to_format; NaN
// encodes as the canonical quiet NaN.
uint64_t encode_bits(double v, FpFormat fmt);
double decode_bits(uint64_t bits, FpFormat fmt);

// Row-major dense matrix. Elements are kept as doubles but are always exact
// fixpoints of round_to_format(., format).
class Matrix {
 public:
  Matrix() = default;
  // Validates that every element is representable in fmt.
  Matrix(size_t rows, size_t cols, FpFormat fmt, std::vector<double> data);
  static Matrix zeros(size_t rows, size_t cols, FpFormat fmt);

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  FpFormat format() const { return format_; }

  double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }
  double& at(size_t r, size_t c) { return data_[r * cols_ + c]; }
  const std::vector<double>& data() const { return data_; }

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  FpFormat format_ = FpFormat::fp64;
  std::vector<double> data_;
};

// Re-round every element into fmt (used to narrow accumulator outputs).
Matrix round_matrix(const Matrix& m, FpFormat fmt);

// Counter-based generator: the i-th draw is a pure function of (seed, i), so
// streams are identical on every platform regardless of call pattern.
// Uniform u64s come from the SplitMix64 output mix applied to
// seed + i * 0x9E3779B97F4A7C15.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed) {}

  uint64_t next_u64();
  // Uniform in [0, 1), 53-bit resolution.
  double next_unit();
  // Uniform in [lo, hi). lo == hi yields the constant lo.
  double next_uniform(double lo, double hi);
  // 12-term central-limit approximation: deterministic with IEEE adds only,
  // no libm transcendentals whose last ulp varies across platforms.
  double next_normal(double mean, double stddev);

 private:
  uint64_t seed_;
  uint64_t counter_ = 0;
};

enum class Dist : uint8_t { uniform, normal };

struct DistSpec {
  Dist kind = Dist::normal;
  // uniform: a = lo, b = hi (lo <= hi; equal fills the constant lo).
  // normal:  a = mean, b = stddev (stddev > 0).
  double a = 0.0;
  double b = 1.0;
};

// Deterministic random matrix: elements are drawn in row-major order from a
// fresh Rng(seed) and rounded into fmt. Same arguments, same bits, anywhere.
Matrix gen_matrix(uint64_t seed, size_t rows, size_t cols, FpFormat fmt,
                  const DistSpec& dist);

// FGLT container: magic "FGLT", version byte, format code byte, u64-LE rows
// and cols, then the row-major little-endian payload in the element format's
// storage width. load(save(m)) is bit-identical.
void save_matrix(const Matrix& m, const std::string& path);
Matrix load_matrix(const std::string& path);

// ulp distance between two doubles (monotone integer mapping of the bit
// patterns); 0 means bit-equal up to -0/+0.
uint64_t ulp_distance(double a, double b);

}  // namespace figlut
