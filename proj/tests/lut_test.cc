// Copyright 2026 the figlut-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "figlut/lut.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "figlut/errors.hpp"

namespace figlut::lut {
namespace {

std::vector<double> random_chunk(Rng& rng, int mu, FpFormat fmt) {
  std::vector<double> chunk(static_cast<size_t>(mu));
  for (double& v : chunk) v = round_to_format(rng.next_normal(0.0, 1.0), fmt);
  return chunk;
}

TEST(FullTable, AllSignCombinationsForWidthThree) {
  const std::vector<double> chunk = {1.0, 8.0, 64.0};
  const Fflut t = build_fflut_naive(chunk, FpFormat::fp64);
  ASSERT_EQ(t.entries.size(), 8u);
  // MSB selects x1; a set bit means plus.
  const double expected[8] = {-73, 55, -57, 71, -71, 57, -55, 73};
  for (uint32_t key = 0; key < 8; ++key) {
    EXPECT_EQ(read_full(t, {3, key}), expected[key]) << "key=" << key;
  }
  EXPECT_EQ(read_full(t, {3, 0b101}), 1.0 - 8.0 + 64.0);
}

TEST(FullTable, VerticalAntisymmetry) {
  Rng rng(21);
  for (int mu = 2; mu <= 5; ++mu) {
    for (FpFormat fmt : {FpFormat::fp16, FpFormat::fp64}) {
      const std::vector<double> chunk = random_chunk(rng, mu, fmt);
      const Fflut t = build_fflut_naive(chunk, fmt);
      const uint32_t mask = (1u << mu) - 1;
      for (uint32_t key = 0; key <= mask; ++key) {
        const double a = read_full(t, {mu, key});
        const double b = read_full(t, {mu, ~key & mask});
        EXPECT_EQ(a, -b) << "mu=" << mu << " key=" << key;
      }
    }
  }
}

TEST(HalfTable, MatchesFullTableOnEveryKey) {
  Rng rng(22);
  for (int mu : {2, 3, 4}) {
    for (int trial = 0; trial < 50; ++trial) {
      const std::vector<double> chunk = random_chunk(rng, mu, FpFormat::fp32);
      const Fflut full = build_fflut_naive(chunk, FpFormat::fp32);
      const HalfFflut naive_half = build_hfflut_naive(chunk, FpFormat::fp32);
      const HalfFflut gen_half = build_hfflut_generator(chunk, FpFormat::fp32);
      ASSERT_EQ(naive_half.entries.size(), size_t{1} << (mu - 1));
      for (uint32_t key = 0; key < (1u << mu); ++key) {
        const double want = read_full(full, {mu, key});
        EXPECT_EQ(read_half(naive_half, {mu, key}), want)
            << "mu=" << mu << " key=" << key;
        EXPECT_EQ(read_half(gen_half, {mu, key}), want)
            << "mu=" << mu << " key=" << key;
      }
    }
  }
}

TEST(GeneratorTree, BitIdenticalToNaiveHalfBuild) {
  Rng rng(23);
  for (FpFormat fmt : {FpFormat::fp16, FpFormat::fp32, FpFormat::fp64}) {
    for (int trial = 0; trial < 100; ++trial) {
      const std::vector<double> chunk = random_chunk(rng, 4, fmt);
      AddCount naive_count, tree_count;
      const HalfFflut a = build_hfflut_naive(chunk, fmt, &naive_count);
      const HalfFflut b = build_hfflut_generator(chunk, fmt, &tree_count);
      ASSERT_EQ(a.entries.size(), b.entries.size());
      for (size_t i = 0; i < a.entries.size(); ++i) {
        ASSERT_EQ(encode_bits(a.entries[i], fmt), encode_bits(b.entries[i], fmt))
            << "trial=" << trial << " entry=" << i;
      }
      EXPECT_EQ(naive_count.additions, 24u);
      EXPECT_FALSE(naive_count.used_tree);
      EXPECT_EQ(tree_count.additions, 14u);
      EXPECT_TRUE(tree_count.used_tree);
    }
  }
}

TEST(GeneratorTree, FallsBackToNaiveForOtherWidths) {
  Rng rng(24);
  for (int mu : {2, 3, 5}) {
    const std::vector<double> chunk = random_chunk(rng, mu, FpFormat::fp32);
    AddCount count;
    const HalfFflut t = build_hfflut_generator(chunk, FpFormat::fp32, &count);
    EXPECT_FALSE(count.used_tree);
    EXPECT_EQ(count.additions, (uint64_t{1} << (mu - 1)) * (mu - 1));
    EXPECT_EQ(t.entries.size(), size_t{1} << (mu - 1));
  }
}

TEST(AddCounts, ClosedFormsAndSavings) {
  EXPECT_EQ(count_generator_adds(4, false, BuildMethod::naive), 48u);
  EXPECT_EQ(count_generator_adds(4, true, BuildMethod::naive), 24u);
  EXPECT_EQ(count_generator_adds(4, true, BuildMethod::tree), 14u);
  EXPECT_EQ(count_generator_adds(3, true, BuildMethod::tree), 8u);
  EXPECT_EQ(count_generator_adds(3, true, BuildMethod::naive), 8u);
  EXPECT_EQ(count_generator_adds(2, true, BuildMethod::naive), 2u);
  EXPECT_EQ(count_generator_adds(8, false, BuildMethod::naive), 256u * 7);
  EXPECT_THROW(count_generator_adds(1, true, BuildMethod::naive), ValidationError);
  EXPECT_THROW(count_generator_adds(9, true, BuildMethod::naive), ValidationError);
  // 14 of 24 half-table adds: a 41.7% reduction.
  const double reduction = 1.0 - 14.0 / 24.0;
  EXPECT_NEAR(reduction, 0.417, 5e-4);
}

TEST(AddCounts, MeasuredBuildsMatchClosedForms) {
  Rng rng(25);
  for (int mu = 2; mu <= 5; ++mu) {
    const std::vector<double> chunk = random_chunk(rng, mu, FpFormat::fp64);
    AddCount full, naive_half, tree_half;
    build_fflut_naive(chunk, FpFormat::fp64, &full);
    build_hfflut_naive(chunk, FpFormat::fp64, &naive_half);
    build_hfflut_generator(chunk, FpFormat::fp64, &tree_half);
    EXPECT_EQ(full.additions, count_generator_adds(mu, false, BuildMethod::naive));
    EXPECT_EQ(naive_half.additions, count_generator_adds(mu, true, BuildMethod::naive));
    EXPECT_EQ(tree_half.additions, count_generator_adds(mu, true, BuildMethod::tree));
  }
}

TEST(IntHalfTable, MatchesFloatTableOnSmallIntegers) {
  Rng rng(26);
  for (int mu : {2, 3, 4}) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<int64_t> ichunk(static_cast<size_t>(mu));
      std::vector<double> dchunk(static_cast<size_t>(mu));
      for (int j = 0; j < mu; ++j) {
        const int64_t v = static_cast<int64_t>(rng.next_u64() % 2001) - 1000;
        ichunk[static_cast<size_t>(j)] = v;
        dchunk[static_cast<size_t>(j)] = static_cast<double>(v);
      }
      AddCount icount;
      const IntHalfLut it = build_int_half_lut(ichunk, &icount);
      const HalfFflut dt = build_hfflut_naive(dchunk, FpFormat::fp64);
      EXPECT_EQ(icount.additions, count_generator_adds(mu, true, BuildMethod::tree));
      for (uint32_t key = 0; key < (1u << mu); ++key) {
        EXPECT_EQ(static_cast<double>(read_half_int(it, {mu, key})),
                  read_half(dt, {mu, key}))
            << "mu=" << mu << " key=" << key;
      }
    }
  }
}

TEST(Keys, ReadersRejectMismatchedKeys) {
  const std::vector<double> chunk = {1.0, 2.0, 4.0};
  const Fflut full = build_fflut_naive(chunk, FpFormat::fp64);
  const HalfFflut half = build_hfflut_naive(chunk, FpFormat::fp64);
  EXPECT_THROW(read_full(full, {4, 0}), ValidationError);
  EXPECT_THROW(read_full(full, {3, 8}), ValidationError);
  EXPECT_THROW(read_half(half, {2, 0}), ValidationError);
  EXPECT_THROW(read_half(half, {3, 9}), ValidationError);
  EXPECT_NO_THROW(read_half(half, {3, 7}));
  EXPECT_THROW(build_fflut_naive(std::vector<double>{1.0}, FpFormat::fp64),
               ValidationError);
}

TEST(FaultHook, BreaksAndRestoresHalfDecode) {
  const std::vector<double> chunk = {1.0, 2.0, 4.0, 8.0};
  const HalfFflut half = build_hfflut_generator(chunk, FpFormat::fp64);
  const LutKey negative_side = {4, 0b1111};
  const double good = read_half(half, negative_side);
  EXPECT_EQ(good, 15.0);
  testing::set_hfflut_sign_fault(true);
  EXPECT_TRUE(testing::hfflut_sign_fault());
  EXPECT_EQ(read_half(half, negative_side), -15.0);
  testing::set_hfflut_sign_fault(false);
  EXPECT_FALSE(testing::hfflut_sign_fault());
  EXPECT_EQ(read_half(half, negative_side), good);
}

}  // namespace
}  // namespace figlut::lut
