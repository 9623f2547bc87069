// Copyright 2026 the figlut-sim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "figlut/numerics.hpp"

namespace figlut::bcq {

// Packed bit matrix, 8 columns per byte, LSB first (same layout as the FGBQ
// payload, so planes serialize by a straight copy).
class BitMatrix {
 public:
  BitMatrix() = default;
  BitMatrix(size_t rows, size_t cols)
      : rows_(rows), cols_(cols), stride_((cols + 7) / 8), bytes_(rows * stride_, 0) {}

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  size_t stride() const { return stride_; }

  bool get(size_t r, size_t c) const {
    return (bytes_[r * stride_ + c / 8] >> (c % 8)) & 1u;
  }
  void set(size_t r, size_t c, bool v) {
    uint8_t& byte = bytes_[r * stride_ + c / 8];
    const uint8_t mask = static_cast<uint8_t>(1u << (c % 8));
    byte = v ? (byte | mask) : (byte & ~mask);
  }

  std::vector<uint8_t>& bytes() { return bytes_; }
  const std::vector<uint8_t>& bytes() const { return bytes_; }

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  size_t stride_ = 0;
  std::vector<uint8_t> bytes_;
};

// Binary-coding quantized matrix: element (r, c) reconstructs as
//   offset[r] + sum_i alpha[i][r] * (plane i bit ? +1 : -1).
// Per-row alphas are strictly positive; a stored bit of 1 means +1.
struct BcqMatrix {
  size_t rows = 0;
  size_t cols = 0;
  int q = 0;
  std::vector<BitMatrix> planes;            // q planes, rows x cols
  std::vector<std::vector<double>> alphas;  // [q][rows], > 0
  std::vector<double> offsets;              // [rows]

  void validate() const;
  double sign(int plane, size_t r, size_t c) const {
    return planes[plane].get(r, c) ? 1.0 : -1.0;
  }
};

// Per-row uniform (asymmetric) quantization: w ~ delta[r] * (code - zero[r]),
// codes in [0, 2^q - 1].
struct UniformQuant {
  size_t rows = 0;
  size_t cols = 0;
  int q = 0;
  std::vector<int32_t> codes;  // row-major
  std::vector<double> delta;   // [rows], > 0
  std::vector<double> zero;    // [rows]

  void validate() const;
  int32_t code(size_t r, size_t c) const { return codes[r * cols + c]; }
};

// Round-to-nearest uniform quantizer, q in [1, 8]. Per row:
// delta = (max - min) / (2^q - 1) (1 if the row is constant),
// zero = -min / delta, code = clamp(round(w / delta + zero)) with ties away
// from zero. Rejects non-finite input.
UniformQuant quantize_rtn(const Matrix& w, int q);

// Exact embedding of uniform quantization into BCQ:
// alpha_i = delta * 2^(i-1) / 2, plane i = bit (i-1) of the code,
// offset = delta * ((2^q - 1) / 2 - zero).
BcqMatrix uniform_to_bcq(const UniformQuant& u);

struct BcqSolveOptions {
  int iters = 5;
  bool use_offset = true;
  double epsilon = 1e-12;  // alpha floor and least-squares damping
};

// Per-row squared reconstruction error after init (round 0) and after each
// refinement round; row_sq_error[round][row]. Non-increasing along rounds.
struct BcqSolveStats {
  std::vector<std::vector<double>> row_sq_error;
};

// Alternating BCQ solver, q in [1, 4]. Greedy residual init (alpha_i =
// mean |residual|, b_i = sign, sign(0) = +1), then per round: least-squares
// refit of alphas (normal equations with tiny Tikhonov damping, nonpositive
// results clamped to epsilon), exhaustive per-column re-selection over all
// 2^q sign patterns, and an offset refit to the mean residual when enabled.
// A round's step is kept only if it does not increase the row's squared
// error, so the reported error sequence never rises.
BcqMatrix quantize_bcq_alternating(const Matrix& w, int q,
                                   const BcqSolveOptions& opts = {},
                                   BcqSolveStats* stats = nullptr);

// Reconstruct to a dense fp64 matrix.
Matrix dequantize(const BcqMatrix& b);
Matrix dequantize(const UniformQuant& u);

// y[r] = sum_i alpha[i][r] * (plane_i row r . x) + offset[r] * sum(x),
// everything in fp64. x.size() must equal b.cols.
std::vector<double> bcq_gemv_reference(const BcqMatrix& b, const std::vector<double>& x);

// FGBQ container: magic "FGBQ", version byte, u64-LE rows/cols/q, q bit
// planes (row-major, 8 cols per byte LSB first), q*rows fp32 alphas
// (plane-major), rows fp32 offsets. Alphas and offsets are narrowed to fp32
// on save.
void save_bcq(const BcqMatrix& b, const std::string& path);
BcqMatrix load_bcq(const std::string& path);

}  // namespace figlut::bcq
