// Copyright 2026 the figlut-sim authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "figlut/numerics.hpp"

namespace figlut::lut {

// Key convention: bit (mu-1), the MSB, selects the sign of the first chunk
// element x1; a set bit means +x, a clear bit means -x. Key 0 is the all
// negative entry, key 2^mu - 1 the all positive one.
struct LutKey {
  int mu = 4;
  uint32_t bits = 0;
};

enum class BuildMethod : uint8_t { naive, tree };

// Executed add/sub operations during a table build, incremented once per add.
// used_tree records whether the shared generator schedule actually ran (it
// only exists for mu = 4; other widths fall back to the naive half build).
struct AddCount {
  uint64_t additions = 0;
  bool used_tree = false;
};

// Full conflict-free table: one entry per signed combination of the chunk,
// entries[key] = sum_j sign_j(key) * x_j. Immutable once built.
struct Fflut {
  int mu = 0;
  FpFormat value_format = FpFormat::fp64;
  std::vector<double> entries;  // 2^mu
};

// Half table holding only the MSB = 0 entries; the other half is recovered by
// the decoder through vertical antisymmetry entries[key] = -entries[~key].
struct HalfFflut {
  int mu = 0;
  FpFormat value_format = FpFormat::fp64;
  std::vector<double> entries;  // 2^(mu-1)
};

// Integer half table over pre-aligned mantissas; adds are exact in int64.
struct IntHalfLut {
  int mu = 0;
  std::vector<int64_t> entries;  // 2^(mu-1)
};

// Every entry computed independently. Each entry costs mu - 1 additions and
// is rounded into fmt after every add. mu = 4 entries evaluate as
// (+-x1 +- x2) + (+-x3 +- x4), matching the generator schedule so the two
// builders agree bit-exactly; other widths evaluate left to right.
Fflut build_fflut_naive(std::span<const double> chunk, FpFormat fmt,
                        AddCount* count = nullptr);

// Naive build of just the MSB = 0 half.
HalfFflut build_hfflut_naive(std::span<const double> chunk, FpFormat fmt,
                             AddCount* count = nullptr);

// Shared-subexpression generator for mu = 4: 2 upper-pair combos
// (-x1 +- x2), 4 lower-pair combos (+-x3 +- x4), 8 combines; 14 adds versus
// 24 for the naive half build. Other mu fall back to build_hfflut_naive with
// used_tree = false.
HalfFflut build_hfflut_generator(std::span<const double> chunk, FpFormat fmt,
                                 AddCount* count = nullptr);

// Integer variant used by the pre-aligned datapath; same schedules, exact
// int64 arithmetic.
IntHalfLut build_int_half_lut(std::span<const int64_t> chunk, AddCount* count = nullptr);

double read_full(const Fflut& table, LutKey key);

// MSB = 0 keys index the stored half directly; MSB = 1 keys read the
// complemented low bits and flip the sign (exact in every format).
double read_half(const HalfFflut& table, LutKey key);
int64_t read_half_int(const IntHalfLut& table, LutKey key);

// Closed-form add counts for a single table build.
uint64_t count_generator_adds(int mu, bool half, BuildMethod method);

namespace testing {
// Fault hook for the negative-control verification path: when armed,
// read_half skips the sign flip on MSB = 1 keys, which breaks the
// half-vs-full equivalence that the verify suite checks.
void set_hfflut_sign_fault(bool enabled);
bool hfflut_sign_fault();
}  // namespace testing

}  // namespace figlut::lut
