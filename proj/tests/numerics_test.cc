// Copyright 2026 the figlut-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "figlut/numerics.hpp"

#include <gtest/gtest.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

#include "figlut/errors.hpp"

namespace figlut {
namespace {

// Every finite value of a 16-bit format, by decoding all 65536 bit patterns.
std::vector<double> all_finite_values(FpFormat fmt) {
  std::vector<double> vals;
  for (uint32_t bits = 0; bits < 0x10000u; ++bits) {
    const double v = decode_bits(bits, fmt);
    if (std::isfinite(v)) vals.push_back(v);
  }
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  return vals;
}

// Nearest representable value with ties to even, found by scanning the
// enumerated value list instead of any shift/mask arithmetic.
double nearest_by_enumeration(const std::vector<double>& vals, FpFormat fmt, double v) {
  const auto hi = std::lower_bound(vals.begin(), vals.end(), v);
  if (hi == vals.begin()) return vals.front();
  if (hi == vals.end()) {
    const double top = vals.back();
    const double gap = top - *(vals.end() - 2);
    return v - top < gap / 2 ? top : std::numeric_limits<double>::infinity();
  }
  const double above = *hi;
  const double below = *(hi - 1);
  const double d_above = above - v;
  const double d_below = v - below;
  if (d_above < d_below) return above;
  if (d_below < d_above) return below;
  return (encode_bits(below, fmt) & 1ull) == 0 ? below : above;
}

TEST(RoundToFormat, MatchesEnumerationOracleFp16) {
  const std::vector<double> vals = all_finite_values(FpFormat::fp16);
  Rng rng(101);
  for (int i = 0; i < 20000; ++i) {
    const int e = static_cast<int>(rng.next_u64() % 48) - 30;
    const double mag = std::ldexp(1.0 + rng.next_unit(), e);
    const double v = (rng.next_u64() & 1) ? -mag : mag;
    const double got = round_to_format(v, FpFormat::fp16);
    double want;
    if (v < 0) {
      want = -nearest_by_enumeration(vals, FpFormat::fp16, -v);
    } else {
      want = nearest_by_enumeration(vals, FpFormat::fp16, v);
    }
    ASSERT_EQ(got, want) << "v=" << v;
  }
}

TEST(RoundToFormat, MatchesEnumerationOracleBf16) {
  const std::vector<double> vals = all_finite_values(FpFormat::bf16);
  Rng rng(202);
  for (int i = 0; i < 20000; ++i) {
    const int e = static_cast<int>(rng.next_u64() % 80) - 40;
    const double mag = std::ldexp(1.0 + rng.next_unit(), e);
    const double v = (rng.next_u64() & 1) ? -mag : mag;
    const double got = round_to_format(v, FpFormat::bf16);
    double want;
    if (v < 0) {
      want = -nearest_by_enumeration(vals, FpFormat::bf16, -v);
    } else {
      want = nearest_by_enumeration(vals, FpFormat::bf16, v);
    }
    ASSERT_EQ(got, want) << "v=" << v;
  }
}

TEST(RoundToFormat, ExactMidpointsTieToEven) {
  const std::vector<double> vals = all_finite_values(FpFormat::fp16);
  Rng rng(303);
  for (int i = 0; i < 5000; ++i) {
    const size_t idx = 1 + rng.next_u64() % (vals.size() - 2);
    const double below = vals[idx];
    const double above = vals[idx + 1];
    const double mid = below + (above - below) / 2;
    if (mid == below || mid == above) continue;
    const double got = round_to_format(mid, FpFormat::fp16);
    const double want = (encode_bits(below, FpFormat::fp16) & 1ull) == 0 ? below : above;
    ASSERT_EQ(got, want) << "mid of " << below << " and " << above;
  }
}

TEST(RoundToFormat, KnownValues) {
  EXPECT_EQ(round_to_format(std::ldexp(1.5, -25), FpFormat::fp16), std::ldexp(1.0, -24));
  EXPECT_EQ(round_to_format(0.1, FpFormat::bf16), 0.10009765625);
  EXPECT_EQ(round_to_format(1.0, FpFormat::fp16), 1.0);
  EXPECT_EQ(round_to_format(65504.0, FpFormat::fp16), 65504.0);
  EXPECT_EQ(round_to_format(65519.0, FpFormat::fp16), 65504.0);
  EXPECT_TRUE(std::isinf(round_to_format(65520.0, FpFormat::fp16)));
  EXPECT_TRUE(std::isinf(round_to_format(1e30, FpFormat::fp16)));
  EXPECT_EQ(round_to_format(-0.0, FpFormat::fp16), 0.0);
  EXPECT_TRUE(std::signbit(round_to_format(-0.0, FpFormat::fp16)));
  EXPECT_TRUE(std::isnan(round_to_format(std::nan(""), FpFormat::fp16)));
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(round_to_format(-inf, FpFormat::bf16), -inf);
  EXPECT_EQ(round_to_format(0.1, FpFormat::fp64), 0.1);
}

TEST(RoundToFormat, IdempotentAndMonotone) {
  Rng rng(404);
  std::vector<double> xs;
  for (int i = 0; i < 4000; ++i) xs.push_back(rng.next_normal(0.0, 100.0));
  for (FpFormat fmt : {FpFormat::fp16, FpFormat::bf16, FpFormat::fp32}) {
    for (double v : xs) {
      const double once = round_to_format(v, fmt);
      EXPECT_EQ(round_to_format(once, fmt), once);
    }
    std::vector<double> sorted = xs;
    std::sort(sorted.begin(), sorted.end());
    double prev = -std::numeric_limits<double>::infinity();
    for (double v : sorted) {
      const double r = round_to_format(v, fmt);
      EXPECT_LE(prev, r);
      prev = r;
    }
  }
}

TEST(Formats, DescriptorsAndLimits) {
  EXPECT_EQ(exponent_bits(FpFormat::fp16), 5);
  EXPECT_EQ(mantissa_bits(FpFormat::fp16), 10);
  EXPECT_EQ(storage_bytes(FpFormat::fp16), 2);
  EXPECT_EQ(exponent_bits(FpFormat::bf16), 8);
  EXPECT_EQ(mantissa_bits(FpFormat::bf16), 7);
  EXPECT_EQ(storage_bytes(FpFormat::bf16), 2);
  EXPECT_EQ(mantissa_bits(FpFormat::fp32), 23);
  EXPECT_EQ(storage_bytes(FpFormat::fp32), 4);
  EXPECT_EQ(mantissa_bits(FpFormat::fp64), 52);
  EXPECT_EQ(storage_bytes(FpFormat::fp64), 8);
  EXPECT_EQ(max_finite(FpFormat::fp16), 65504.0);
  EXPECT_EQ(max_finite(FpFormat::fp32), 0x1.fffffep127);
  EXPECT_STREQ(format_name(FpFormat::bf16), "bf16");
  EXPECT_EQ(format_from_name("fp32"), FpFormat::fp32);
  EXPECT_THROW(format_from_name("fp8"), ValidationError);
}

TEST(EncodeDecode, RoundTripsEvery16BitPattern) {
  for (FpFormat fmt : {FpFormat::fp16, FpFormat::bf16}) {
    for (uint32_t bits = 0; bits < 0x10000u; ++bits) {
      const double v = decode_bits(bits, fmt);
      if (std::isnan(v)) {
        const uint64_t canon = encode_bits(v, fmt);
        EXPECT_TRUE(std::isnan(decode_bits(canon, fmt)));
        continue;
      }
      EXPECT_EQ(encode_bits(v, fmt), bits);
    }
  }
}

TEST(EncodeDecode, RejectsValuesOutsideTheFormat) {
  EXPECT_THROW(encode_bits(0.1, FpFormat::fp16), ValidationError);
  EXPECT_THROW(encode_bits(1.0 + std::ldexp(1.0, -40), FpFormat::fp32), ValidationError);
  EXPECT_THROW(encode_bits(1e6, FpFormat::fp16), ValidationError);
  EXPECT_EQ(encode_bits(1.0, FpFormat::fp16), 0x3C00u);
  EXPECT_EQ(encode_bits(-2.0, FpFormat::fp16), 0xC000u);
  EXPECT_EQ(encode_bits(65504.0, FpFormat::fp16), 0x7BFFu);
  EXPECT_EQ(encode_bits(std::ldexp(1.0, -24), FpFormat::fp16), 0x0001u);
}

TEST(Matrix, ValidatesElementsAgainstFormat) {
  EXPECT_NO_THROW(Matrix(1, 2, FpFormat::fp16, {1.0, -0.5}));
  EXPECT_THROW(Matrix(1, 1, FpFormat::fp16, {0.1}), ValidationError);
  EXPECT_THROW(Matrix(2, 2, FpFormat::fp32, {1.0, 2.0, 3.0}), ValidationError);
  const Matrix z = Matrix::zeros(3, 4, FpFormat::bf16);
  EXPECT_EQ(z.rows(), 3u);
  EXPECT_EQ(z.cols(), 4u);
  EXPECT_EQ(z(2, 3), 0.0);
  const Matrix m(1, 1, FpFormat::fp32, {0.100000001490116119384765625});
  const Matrix n = round_matrix(m, FpFormat::bf16);
  EXPECT_EQ(n(0, 0), 0.10009765625);
}

TEST(Rng, FrozenReferenceStream) {
  Rng r0(0);
  EXPECT_EQ(r0.next_u64(), 0xE220A8397B1DCDAFull);
  EXPECT_EQ(r0.next_u64(), 0x6E789E6AA1B965F4ull);
  EXPECT_EQ(r0.next_u64(), 0x06C45D188009454Full);
  Rng r42(42);
  EXPECT_EQ(r42.next_u64(), 0xBDD732262FEB6E95ull);
  EXPECT_EQ(r42.next_u64(), 0x28EFE333B266F103ull);
  EXPECT_EQ(r42.next_u64(), 0x47526757130F9F52ull);
}

TEST(Rng, StreamsAreReproducible) {
  Rng a(1234), b(1234);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  Rng c(1234), d(1235);
  bool any_diff = false;
  for (int i = 0; i < 16; ++i) any_diff |= c.next_u64() != d.next_u64();
  EXPECT_TRUE(any_diff);
}

TEST(Rng, UnitAndNormalDrawsBehave) {
  Rng rng(99);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_unit();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = rng.next_normal(0.0, 1.0);
    ASSERT_LE(std::abs(v), 6.0);
    sum += v;
    sq += v * v;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.02);
  EXPECT_NEAR(std::sqrt(sq / n), 1.0, 0.02);
  EXPECT_EQ(rng.next_uniform(2.5, 2.5), 2.5);
  const double u = rng.next_uniform(-3.0, 5.0);
  EXPECT_GE(u, -3.0);
  EXPECT_LT(u, 5.0);
}

TEST(GenMatrix, RowMajorDrawOrderAndDeterminism) {
  const DistSpec dist{Dist::uniform, -1.0, 1.0};
  const Matrix a = gen_matrix(7, 2, 3, FpFormat::fp32, dist);
  const Matrix b = gen_matrix(7, 2, 3, FpFormat::fp32, dist);
  EXPECT_EQ(a.data(), b.data());
  Rng rng(7);
  for (size_t r = 0; r < 2; ++r) {
    for (size_t c = 0; c < 3; ++c) {
      EXPECT_EQ(a(r, c), round_to_format(rng.next_uniform(-1.0, 1.0), FpFormat::fp32));
    }
  }
  const Matrix other = gen_matrix(8, 2, 3, FpFormat::fp32, dist);
  EXPECT_NE(a.data(), other.data());
}

TEST(GenMatrix, ValidatesArguments) {
  EXPECT_THROW(gen_matrix(1, 0, 3, FpFormat::fp32, {}), ValidationError);
  EXPECT_THROW(gen_matrix(1, 3, 0, FpFormat::fp32, {}), ValidationError);
  EXPECT_THROW(gen_matrix(1, 2, 2, FpFormat::fp32, {Dist::uniform, 2.0, 1.0}),
               ValidationError);
  EXPECT_THROW(gen_matrix(1, 2, 2, FpFormat::fp32, {Dist::normal, 0.0, 0.0}),
               ValidationError);
  const Matrix constant = gen_matrix(1, 2, 2, FpFormat::fp32, {Dist::uniform, 0.5, 0.5});
  for (double v : constant.data()) EXPECT_EQ(v, 0.5);
}

class MatrixIoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("figlut_numerics_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::string path(const char* name) const { return (dir_ / name).string(); }
  std::filesystem::path dir_;
};

TEST_F(MatrixIoTest, FileLayoutIsStable) {
  const Matrix m(2, 3, FpFormat::fp16, {1.0, -2.0, 0.5, 0.0, 65504.0, -0.25});
  const std::string p = path("m.fglt");
  save_matrix(m, p);
  std::ifstream is(p, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  ASSERT_EQ(bytes.size(), 4u + 1 + 1 + 8 + 8 + 6 * 2);
  EXPECT_EQ(bytes[0], 'F');
  EXPECT_EQ(bytes[1], 'G');
  EXPECT_EQ(bytes[2], 'L');
  EXPECT_EQ(bytes[3], 'T');
  EXPECT_EQ(bytes[4], 1);  // version
  EXPECT_EQ(bytes[5], 0);  // fp16 code
  EXPECT_EQ(bytes[6], 2);  // rows, low byte
  EXPECT_EQ(bytes[14], 3);  // cols, low byte
  const uint16_t first = static_cast<uint16_t>(bytes[22] | (bytes[23] << 8));
  EXPECT_EQ(first, encode_bits(1.0, FpFormat::fp16));

  const Matrix back = load_matrix(p);
  EXPECT_EQ(back.rows(), m.rows());
  EXPECT_EQ(back.cols(), m.cols());
  EXPECT_EQ(back.format(), m.format());
  EXPECT_EQ(back.data(), m.data());
}

TEST_F(MatrixIoTest, RoundTripsEveryFormat) {
  Rng rng(31);
  for (FpFormat fmt : {FpFormat::fp16, FpFormat::bf16, FpFormat::fp32, FpFormat::fp64}) {
    const Matrix m = gen_matrix(rng.next_u64(), 5, 7, fmt, {Dist::normal, 0.0, 2.0});
    const std::string p = path("roundtrip.fglt");
    save_matrix(m, p);
    const Matrix back = load_matrix(p);
    EXPECT_EQ(back.format(), fmt);
    EXPECT_EQ(back.data(), m.data());
  }
}

TEST_F(MatrixIoTest, LoadRejectsDamagedFiles) {
  try {
    load_matrix(path("missing.fglt"));
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_EQ(e.kind(), IoErrorKind::open_failed);
  }

  const Matrix m(1, 1, FpFormat::fp32, {1.5});
  const std::string good = path("good.fglt");
  save_matrix(m, good);

  std::vector<char> bytes;
  {
    std::ifstream is(good, std::ios::binary);
    bytes.assign((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  }

  auto write_variant = [&](const char* name, auto mutate) {
    std::vector<char> copy = bytes;
    mutate(copy);
    const std::string p = path(name);
    std::ofstream os(p, std::ios::binary);
    os.write(copy.data(), static_cast<std::streamsize>(copy.size()));
    return p;
  };

  try {
    load_matrix(write_variant("magic.fglt", [](std::vector<char>& b) { b[0] = 'X'; }));
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_EQ(e.kind(), IoErrorKind::bad_magic);
  }
  try {
    load_matrix(write_variant("version.fglt", [](std::vector<char>& b) { b[4] = 9; }));
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_EQ(e.kind(), IoErrorKind::bad_version);
  }
  try {
    load_matrix(write_variant("format.fglt", [](std::vector<char>& b) { b[5] = 7; }));
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_EQ(e.kind(), IoErrorKind::unknown_format);
  }
  try {
    load_matrix(write_variant("short.fglt", [](std::vector<char>& b) { b.pop_back(); }));
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_EQ(e.kind(), IoErrorKind::truncated);
  }
  try {
    load_matrix(write_variant("long.fglt", [](std::vector<char>& b) { b.push_back(0); }));
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_EQ(e.kind(), IoErrorKind::malformed);
  }
}

TEST(UlpDistance, CountsRepresentableSteps) {
  EXPECT_EQ(ulp_distance(1.0, 1.0), 0u);
  EXPECT_EQ(ulp_distance(0.0, -0.0), 0u);
  EXPECT_EQ(ulp_distance(1.0, std::nextafter(1.0, 2.0)), 1u);
  EXPECT_EQ(ulp_distance(1.0, std::nextafter(1.0, 0.0)), 1u);
  EXPECT_EQ(ulp_distance(-1.0, std::nextafter(-1.0, -2.0)), 1u);
  EXPECT_EQ(ulp_distance(1.0, 1.0 + std::ldexp(1.0, -50)), 4u);
}

}  // namespace
}  // namespace figlut
