// Copyright 2026 the figlut-sim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include "figlut/bcq.hpp"
#include "figlut/numerics.hpp"
#include "figlut/perf.hpp"

namespace figlut::engines {

enum class EngineKind : uint8_t {
  reference,  // fp64 GEMM on dequantized weights, the accuracy baseline
  fpe,        // dequantize on the fly, FP multiply, FP accumulate
  ifpu,       // bit-serial add/sub of pre-aligned integer mantissas
  figna,      // pre-aligned integer multiply against uniform codes
  figlut_f,   // FP half-table lookup per mu-wide chunk
  figlut_i,   // integer half-table lookup over pre-aligned mantissas
};

const char* engine_name(EngineKind kind);
EngineKind engine_from_name(const std::string& name);

struct EngineConfig {
  EngineKind kind = EngineKind::reference;
  int mu = 4;
  int k = 32;  // RACs fed by one LUT; never changes results or op counts
  int pe_rows = 8;
  int pe_cols = 4;
  FpFormat act_format = FpFormat::fp16;
  FpFormat accum_format = FpFormat::fp32;
  // Format the FP LUT entries and chunk sums are kept in; accum_format when
  // unset.
  std::optional<FpFormat> lut_format;
  int align_width = 24;  // W, mantissa bits incl. sign headroom, in [8, 63]
  // 0 = auto (min(dim, 128)). For bit-serial engines tile_n is snapped down
  // to a multiple of mu so per-tile chunk tails line up with ceil(n/mu).
  size_t tile_m = 0;
  size_t tile_n = 0;
  // Streaming granularity only; results and counters are invariant to it.
  size_t tile_b = 0;

  FpFormat lut_value_format() const { return lut_format ? *lut_format : accum_format; }

  // Resolve auto tile sizes against a concrete problem and validate every
  // field; throws ValidationError.
  EngineConfig normalized(size_t m, size_t n, size_t batch) const;
};

// Block floating point view of an activation block: mantissas are the RNE
// rounding of x * 2^(W-1) / 2^e_max, scale restores magnitude as a single
// power of two. e_max of an all-zero block is 0 by convention.
struct AlignedBlock {
  int e_max = 0;
  double scale = 1.0;
  std::vector<int64_t> mantissas;
};

// width = W in [8, 63]. The element carrying e_max loses no bits whenever
// W >= activation mantissa bits + 1. Rejects non-finite input.
AlignedBlock pre_align(std::span<const double> x, int width);

using Weights = std::variant<bcq::BcqMatrix, bcq::UniformQuant>;

struct GemmResult {
  Matrix y;  // accum_format (fp64 for the reference engine)
  perf::EventTrace trace;
  EngineConfig config;  // normalized configuration the run used
};

// Weight-stationary driver: for each weight tile, for each bit plane (only
// one for word-parallel engines), stream every activation column through the
// engine's inner loop, counting events as they execute. figna accepts only
// uniform weights; bit-serial engines embed uniform weights into BCQ first.
// x is n x batch in act_format. Deterministic: same inputs, same bits and
// the same trace, at any thread count.
GemmResult gemm(const EngineConfig& cfg, const Weights& weights, const Matrix& x);

// The loop nest behind gemm; exposed for callers that already validated
// compatibility.
GemmResult run_dataflow(const EngineConfig& cfg, const Weights& weights, const Matrix& x);

// Accuracy oracle for the FP LUT path: identical tiling, plane order, chunk
// grouping, rounding points and scaling order as figlut_f, but chunk sums
// are recomputed directly from signs and activations instead of going
// through table construction and key decode. figlut_f must match this
// bit for bit.
Matrix grouped_reference_gemm(const EngineConfig& cfg, const bcq::BcqMatrix& weights,
                              const Matrix& x);

// max |y - yref| / max(max |yref|, 1e-300): matrix-level relative error,
// robust to element-level cancellation.
double rel_error(const Matrix& y, const Matrix& yref);

}  // namespace figlut::engines
