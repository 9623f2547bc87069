// Copyright 2026 the figlut-sim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "figlut/numerics.hpp"

namespace figlut::engines {
struct GemmResult;
struct EngineConfig;
}  // namespace figlut::engines

namespace figlut::perf {

// Operation-level event counters accumulated by the dataflow driver. Energy
// is a pure linear functional of these, so traces from disjoint runs can be
// merged by addition.
struct EventTrace {
  uint64_t lut_builds = 0;
  uint64_t lut_gen_adds = 0;
  uint64_t rac_reads = 0;
  uint64_t fp_adds = 0;
  uint64_t fp_muls = 0;
  uint64_t int_adds = 0;
  uint64_t int_muls = 0;
  uint64_t dequant_ops = 0;
  uint64_t align_ops = 0;
  uint64_t weight_dram_bytes = 0;
  uint64_t act_sram_reads = 0;
  uint64_t psum_sram_accesses = 0;
  uint64_t cycles = 0;

  static const std::vector<std::string>& counter_names();
  uint64_t get(const std::string& name) const;
  void set(const std::string& name, uint64_t value);
  EventTrace& operator+=(const EventTrace& other);

  // Flat JSON object, counter name -> integer.
  std::string to_json_text() const;
  static EventTrace from_json_text(const std::string& text);
};

bool operator==(const EventTrace& a, const EventTrace& b);

// Unit energies per trace counter (picojoules), unit areas per hardware
// resource (mm^2), and the PE power-model scalars. JSON layout:
//   {
//     "energy_per_event":  { "<counter name>": <cost>, ... },
//     "area_per_resource": { "fp_adder": ..., "fp_mul": ..., "int_adder": ...,
//                            "int_mul": ..., "lut_bit": ..., "rac": ...,
//                            "generator_adder": ... },
//     "beta": <fan-out coefficient>,
//     "frequency_hz": <clock>,
//     "p_lut0": <optional, default 8.0>,
//     "p_rac0": <optional, default 1.0>
//   }
// Unknown keys anywhere are rejected.
struct CostModel {
  std::map<std::string, double> energy_per_event;
  std::map<std::string, double> area_per_resource;
  double beta = 0.0;
  double frequency_hz = 1e8;
  double p_lut0 = 8.0;
  double p_rac0 = 1.0;

  static const std::vector<std::string>& resource_names();
  static CostModel from_json_text(const std::string& text);
  static CostModel load(const std::string& path);
};

// sum over counters of count * unit cost. Every counter must have an entry
// in cm.energy_per_event, including zero-valued ones; a missing entry throws.
double energy(const EventTrace& trace, const CostModel& cm);

// Single LUT shared by k RACs. The fan-out load on the LUT grows
// quadratically: p_lut(k) = p_lut0 * (1 + beta * (k-1)^2). p_pe adds the k
// RAC units, p_rac is the per-RAC share p_pe / k, which for beta > 0 is a
// U-shaped curve with its continuous minimum at k = sqrt(1/beta + 1).
struct PePowerModel {
  double p_lut0 = 8.0;
  double p_rac0 = 1.0;
  double beta = 0.0;

  double p_lut(int k) const;
  double p_pe(int k) const;
  double p_rac(int k) const;
};

struct PePowerPoint {
  int k = 0;
  double p_pe = 0.0;
  double p_rac = 0.0;
};

struct PePowerCurve {
  std::vector<PePowerPoint> points;
  int argmin_k = 0;  // k minimizing p_rac; ties resolve to the smaller k
};

PePowerCurve pe_power_curve(const PePowerModel& model, int k_min = 1, int k_max = 256);

// Weight-stationary cycle model: every weight tile is resident for
// (batch + fill) cycles per processed bit plane, fill being the systolic
// ramp pe_rows + pe_cols - 1. eff_q is the number of sequential bit-plane
// passes (1 for word-parallel engines).
uint64_t cycle_count(size_t m, size_t n, size_t batch, int eff_q, size_t tile_m,
                     size_t tile_n, int pe_rows, int pe_cols);

// Tables needed when one LUT feeds k RACs. The total RAC op count itself is
// a pure function of the problem and mu, never of k.
uint64_t lut_count_scaling(uint64_t total_racs, int k);

// One access of one thread in one issue cycle.
struct BankAccess {
  int bank = 0;
  uint64_t addr = 0;
};

// Cost of an issue cycle = max over banks of the number of distinct
// addresses requested from it (identical addresses broadcast for free); a
// cycle with no conflicting requests still costs 1. Returns the summed cost.
uint64_t bank_conflict_cycles(const std::vector<std::vector<BankAccess>>& cycles,
                              int num_banks);

struct ProblemDims {
  size_t m = 0;
  size_t n = 0;
  size_t batch = 0;
};

struct Metrics {
  double ops = 0.0;      // 2 * m * n * batch
  double seconds = 0.0;  // cycles / frequency
  double energy = 0.0;   // picojoules
  double area = 0.0;     // mm^2
  double tops = 0.0;
  double tops_per_w = 0.0;    // equals ops per picojoule
  double tops_per_mm2 = 0.0;
};

// Absolute numbers are only meaningful relative to another run under the
// same cost model; the report command normalizes against a baseline row.
Metrics metrics(const engines::GemmResult& result, const CostModel& cm,
                const ProblemDims& dims);

// Resource census priced by cm.area_per_resource; see metrics().
double area_estimate(const engines::EngineConfig& cfg, const CostModel& cm);

// Closed-form DRAM weight traffic, matching what the dataflow counts when
// tile columns are byte-aligned: dense m*n elements at the format's storage
// width; BCQ q bit planes of m*ceil(n/8) bytes plus fp32 alphas and offsets;
// uniform rows of ceil(n*q/8) code bytes plus fp32 delta and zero-point.
uint64_t dense_weight_bytes(size_t m, size_t n, FpFormat fmt);
uint64_t bcq_weight_bytes(size_t m, size_t n, int q);
uint64_t uniform_weight_bytes(size_t m, size_t n, int q);

}  // namespace figlut::perf
