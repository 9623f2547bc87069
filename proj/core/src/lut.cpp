// Copyright 2026 the figlut-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "figlut/lut.hpp"

#include <atomic>

#include "figlut/errors.hpp"

namespace figlut::lut {

namespace {

std::atomic<bool> g_sign_fault{false};

void check_mu(int mu, size_t chunk_size) {
  if (mu < 2 || mu > 8) throw ValidationError("lut chunk width mu must be in [2, 8]");
  if (chunk_size != static_cast<size_t>(mu)) {
    throw ValidationError("lut chunk size does not match mu");
  }
}

// Sign of chunk element idx under `key`: the MSB maps to element 0.
inline bool positive(uint32_t key, int mu, int idx) {
  return (key >> (mu - 1 - idx)) & 1u;
}

inline double signed_term(double x, bool pos) { return pos ? x : -x; }

double naive_entry(std::span<const double> chunk, FpFormat fmt, uint32_t key,
                   uint64_t* adds) {
  const int mu = static_cast<int>(chunk.size());
  if (mu == 4) {
    const double upper = round_to_format(signed_term(chunk[0], positive(key, 4, 0)) +
                                             signed_term(chunk[1], positive(key, 4, 1)),
                                         fmt);
    const double lower = round_to_format(signed_term(chunk[2], positive(key, 4, 2)) +
                                             signed_term(chunk[3], positive(key, 4, 3)),
                                         fmt);
    *adds += 3;
    return round_to_format(upper + lower, fmt);
  }
  double acc = signed_term(chunk[0], positive(key, mu, 0));
  for (int idx = 1; idx < mu; ++idx) {
    acc = round_to_format(acc + signed_term(chunk[idx], positive(key, mu, idx)), fmt);
    ++*adds;
  }
  return acc;
}

int64_t naive_entry_int(std::span<const int64_t> chunk, uint32_t key, uint64_t* adds) {
  const int mu = static_cast<int>(chunk.size());
  if (mu == 4) {
    const int64_t upper = (positive(key, 4, 0) ? chunk[0] : -chunk[0]) +
                          (positive(key, 4, 1) ? chunk[1] : -chunk[1]);
    const int64_t lower = (positive(key, 4, 2) ? chunk[2] : -chunk[2]) +
                          (positive(key, 4, 3) ? chunk[3] : -chunk[3]);
    *adds += 3;
    return upper + lower;
  }
  int64_t acc = positive(key, mu, 0) ? chunk[0] : -chunk[0];
  for (int idx = 1; idx < mu; ++idx) {
    acc += positive(key, mu, idx) ? chunk[idx] : -chunk[idx];
    ++*adds;
  }
  return acc;
}

}  // namespace

Fflut build_fflut_naive(std::span<const double> chunk, FpFormat fmt, AddCount* count) {
  const int mu = static_cast<int>(chunk.size());
  check_mu(mu, chunk.size());
  Fflut t;
  t.mu = mu;
  t.value_format = fmt;
  t.entries.resize(size_t{1} << mu);
  uint64_t adds = 0;
  for (uint32_t key = 0; key < t.entries.size(); ++key) {
    t.entries[key] = naive_entry(chunk, fmt, key, &adds);
  }
  if (count) *count = {adds, false};
  return t;
}

HalfFflut build_hfflut_naive(std::span<const double> chunk, FpFormat fmt, AddCount* count) {
  const int mu = static_cast<int>(chunk.size());
  check_mu(mu, chunk.size());
  HalfFflut t;
  t.mu = mu;
  t.value_format = fmt;
  t.entries.resize(size_t{1} << (mu - 1));
  uint64_t adds = 0;
  for (uint32_t key = 0; key < t.entries.size(); ++key) {
    t.entries[key] = naive_entry(chunk, fmt, key, &adds);
  }
  if (count) *count = {adds, false};
  return t;
}

HalfFflut build_hfflut_generator(std::span<const double> chunk, FpFormat fmt,
                                 AddCount* count) {
  const int mu = static_cast<int>(chunk.size());
  check_mu(mu, chunk.size());
  if (mu != 4) return build_hfflut_naive(chunk, fmt, count);

  HalfFflut t;
  t.mu = 4;
  t.value_format = fmt;
  t.entries.resize(8);
  uint64_t adds = 0;

  // Stored keys all have MSB = 0, so x1 always enters negated.
  double upper[2];
  upper[0] = round_to_format(-chunk[0] - chunk[1], fmt);
  upper[1] = round_to_format(-chunk[0] + chunk[1], fmt);
  adds += 2;
  double lower[4];
  for (uint32_t b = 0; b < 4; ++b) {
    lower[b] = round_to_format(signed_term(chunk[2], (b >> 1) & 1u) +
                                   signed_term(chunk[3], b & 1u),
                               fmt);
    ++adds;
  }
  for (uint32_t key = 0; key < 8; ++key) {
    t.entries[key] = round_to_format(upper[(key >> 2) & 1u] + lower[key & 3u], fmt);
    ++adds;
  }
  if (count) *count = {adds, true};
  return t;
}

IntHalfLut build_int_half_lut(std::span<const int64_t> chunk, AddCount* count) {
  const int mu = static_cast<int>(chunk.size());
  check_mu(mu, chunk.size());
  IntHalfLut t;
  t.mu = mu;
  t.entries.resize(size_t{1} << (mu - 1));
  uint64_t adds = 0;
  bool tree = false;
  if (mu == 4) {
    int64_t upper[2] = {-chunk[0] - chunk[1], -chunk[0] + chunk[1]};
    adds += 2;
    int64_t lower[4];
    for (uint32_t b = 0; b < 4; ++b) {
      lower[b] = ((b >> 1) & 1u ? chunk[2] : -chunk[2]) + (b & 1u ? chunk[3] : -chunk[3]);
      ++adds;
    }
    for (uint32_t key = 0; key < 8; ++key) {
      t.entries[key] = upper[(key >> 2) & 1u] + lower[key & 3u];
      ++adds;
    }
    tree = true;
  } else {
    for (uint32_t key = 0; key < t.entries.size(); ++key) {
      t.entries[key] = naive_entry_int(chunk, key, &adds);
    }
  }
  if (count) *count = {adds, tree};
  return t;
}

namespace {

void check_key(int table_mu, LutKey key) {
  if (key.mu != table_mu) throw ValidationError("lut key width does not match table");
  if (key.bits >> key.mu) throw ValidationError("lut key has bits beyond mu");
}

}  // namespace

double read_full(const Fflut& table, LutKey key) {
  check_key(table.mu, key);
  return table.entries[key.bits];
}

double read_half(const HalfFflut& table, LutKey key) {
  check_key(table.mu, key);
  const uint32_t half_mask = (1u << (table.mu - 1)) - 1u;
  if (!((key.bits >> (table.mu - 1)) & 1u)) return table.entries[key.bits];
  const double stored = table.entries[~key.bits & half_mask];
  return g_sign_fault.load(std::memory_order_relaxed) ? stored : -stored;
}

int64_t read_half_int(const IntHalfLut& table, LutKey key) {
  check_key(table.mu, key);
  const uint32_t half_mask = (1u << (table.mu - 1)) - 1u;
  if (!((key.bits >> (table.mu - 1)) & 1u)) return table.entries[key.bits];
  const int64_t stored = table.entries[~key.bits & half_mask];
  return g_sign_fault.load(std::memory_order_relaxed) ? stored : -stored;
}

uint64_t count_generator_adds(int mu, bool half, BuildMethod method) {
  if (mu < 2 || mu > 8) throw ValidationError("lut chunk width mu must be in [2, 8]");
  const uint64_t entries = uint64_t{1} << (half ? mu - 1 : mu);
  if (method == BuildMethod::tree && half && mu == 4) return 14;
  return entries * static_cast<uint64_t>(mu - 1);
}

namespace testing {
void set_hfflut_sign_fault(bool enabled) {
  g_sign_fault.store(enabled, std::memory_order_relaxed);
}
bool hfflut_sign_fault() { return g_sign_fault.load(std::memory_order_relaxed); }
}  // namespace testing

}  // namespace figlut::lut
