// Copyright 2026 the figlut-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "figlut/numerics.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace figlut {

namespace {

struct FormatDesc {
  int ebits;
  int mbits;
  int bytes;
  const char* name;
};

const FormatDesc& desc(FpFormat fmt) {
  static const FormatDesc table[] = {
      {5, 10, 2, "fp16"},
      {8, 7, 2, "bf16"},
      {8, 23, 4, "fp32"},
      {11, 52, 8, "fp64"},
  };
  return table[static_cast<int>(fmt)];
}

int bias_of(FpFormat fmt) { return (1 << (desc(fmt).ebits - 1)) - 1; }

}  // namespace

int exponent_bits(FpFormat fmt) { return desc(fmt).ebits; }
int mantissa_bits(FpFormat fmt) { return desc(fmt).mbits; }
int storage_bytes(FpFormat fmt) { return desc(fmt).bytes; }
const char* format_name(FpFormat fmt) { return desc(fmt).name; }

FpFormat format_from_name(const std::string& name) {
  for (FpFormat f : {FpFormat::fp16, FpFormat::bf16, FpFormat::fp32, FpFormat::fp64}) {
    if (name == desc(f).name) return f;
  }
  throw ValidationError("unknown float format: " + name);
}

double max_finite(FpFormat fmt) {
  const FormatDesc& d = desc(fmt);
  return std::ldexp(2.0 - std::ldexp(1.0, -d.mbits), bias_of(fmt));
}

double round_to_format(double v, FpFormat fmt) {
  if (fmt == FpFormat::fp64) return v;
  if (!std::isfinite(v)) return v;
  if (v == 0.0) return v;
  const FormatDesc& d = desc(fmt);
  const int emin = 1 - bias_of(fmt);
  int e = std::ilogb(v);
  if (e < emin) e = emin;
  // Quantum at |v|'s binade; power-of-two scaling of a double is exact, so
  // the only rounding is nearbyint, which is round-to-nearest-even under the
  // default FP environment.
  const int qexp = e - d.mbits;
  const double r = std::nearbyint(std::ldexp(v, -qexp));
  const double out = std::ldexp(r, qexp);
  if (std::abs(out) > max_finite(fmt)) {
    return std::copysign(std::numeric_limits<double>::infinity(), v);
  }
  return out;
}

uint64_t encode_bits(double v, FpFormat fmt) {
  const FormatDesc& d = desc(fmt);
  const int bias = bias_of(fmt);
  const int emin = 1 - bias;
  const uint64_t expmask = (1ull << d.ebits) - 1;
  const uint64_t sign = std::signbit(v) ? 1ull : 0ull;
  const uint64_t s = sign << (d.ebits + d.mbits);
  if (std::isnan(v)) {
    return (expmask << d.mbits) | (1ull << (d.mbits - 1));
  }
  if (std::isinf(v)) return s | (expmask << d.mbits);
  if (v == 0.0) return s;
  const double a = std::abs(v);
  int e = std::ilogb(a);
  if (e < emin) {
    const double f = std::ldexp(a, d.mbits - emin);
    const uint64_t mant = static_cast<uint64_t>(f);
    if (static_cast<double>(mant) != f || mant >= (1ull << d.mbits)) {
      throw ValidationError("value not representable in target format");
    }
    return s | mant;
  }
  const double f = std::ldexp(a, d.mbits - e);
  const uint64_t q = static_cast<uint64_t>(f);
  if (static_cast<double>(q) != f || e + bias >= static_cast<int>(expmask)) {
    throw ValidationError("value not representable in target format");
  }
  return s | (static_cast<uint64_t>(e + bias) << d.mbits) | (q - (1ull << d.mbits));
}

double decode_bits(uint64_t bits, FpFormat fmt) {
  const FormatDesc& d = desc(fmt);
  const int bias = bias_of(fmt);
  const uint64_t expmask = (1ull << d.ebits) - 1;
  const uint64_t mant = bits & ((1ull << d.mbits) - 1);
  const uint64_t biased = (bits >> d.mbits) & expmask;
  const bool neg = ((bits >> (d.ebits + d.mbits)) & 1ull) != 0;
  double a;
  if (biased == expmask) {
    a = mant ? std::numeric_limits<double>::quiet_NaN()
             : std::numeric_limits<double>::infinity();
  } else if (biased == 0) {
    a = std::ldexp(static_cast<double>(mant), 1 - bias - d.mbits);
  } else {
    a = std::ldexp(static_cast<double>(mant + (1ull << d.mbits)),
                   static_cast<int>(biased) - bias - d.mbits);
  }
  return neg ? -a : a;
}

Matrix::Matrix(size_t rows, size_t cols, FpFormat fmt, std::vector<double> data)
    : rows_(rows), cols_(cols), format_(fmt), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ValidationError("matrix data size does not match dimensions");
  }
  for (double v : data_) {
    const double r = round_to_format(v, fmt);
    if (!(r == v || (std::isnan(r) && std::isnan(v)))) {
      throw ValidationError("matrix element is not representable in its format");
    }
  }
}

Matrix Matrix::zeros(size_t rows, size_t cols, FpFormat fmt) {
  return Matrix(rows, cols, fmt, std::vector<double>(rows * cols, 0.0));
}

Matrix round_matrix(const Matrix& m, FpFormat fmt) {
  std::vector<double> out(m.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = round_to_format(m.data()[i], fmt);
  return Matrix(m.rows(), m.cols(), fmt, std::move(out));
}

uint64_t Rng::next_u64() {
  uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double Rng::next_unit() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_uniform(double lo, double hi) {
  return lo + next_unit() * (hi - lo);
}

double Rng::next_normal(double mean, double stddev) {
  double s = 0.0;
  for (int i = 0; i < 12; ++i) s += next_unit();
  return mean + stddev * (s - 6.0);
}

Matrix gen_matrix(uint64_t seed, size_t rows, size_t cols, FpFormat fmt,
                  const DistSpec& dist) {
  if (rows == 0 || cols == 0) throw ValidationError("matrix dimensions must be positive");
  if (dist.kind == Dist::uniform) {
    if (!(dist.a <= dist.b)) throw ValidationError("uniform range requires lo <= hi");
  } else {
    if (!(dist.b > 0.0)) throw ValidationError("normal stddev must be positive");
  }
  Rng rng(seed);
  std::vector<double> data(rows * cols);
  for (double& v : data) {
    const double x = dist.kind == Dist::uniform ? rng.next_uniform(dist.a, dist.b)
                                                : rng.next_normal(dist.a, dist.b);
    v = round_to_format(x, fmt);
  }
  return Matrix(rows, cols, fmt, std::move(data));
}

namespace {

constexpr char kMatrixMagic[4] = {'F', 'G', 'L', 'T'};
constexpr uint8_t kMatrixVersion = 1;

void put_u64le(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

uint64_t get_u64le(std::istream& is, const char* what) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) {
    throw IoError(IoErrorKind::truncated, std::string("truncated file: missing ") + what);
  }
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_matrix(const Matrix& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(IoErrorKind::open_failed, "cannot open for write: " + path);
  os.write(kMatrixMagic, 4);
  os.put(static_cast<char>(kMatrixVersion));
  os.put(static_cast<char>(m.format()));
  put_u64le(os, m.rows());
  put_u64le(os, m.cols());
  const int width = storage_bytes(m.format());
  for (double v : m.data()) {
    const uint64_t bits = encode_bits(v, m.format());
    char b[8];
    for (int i = 0; i < width; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    os.write(b, width);
  }
  if (!os) throw IoError(IoErrorKind::write_failed, "write failed: " + path);
}

Matrix load_matrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(IoErrorKind::open_failed, "cannot open: " + path);
  char magic[4];
  if (!is.read(magic, 4)) throw IoError(IoErrorKind::truncated, "truncated file: missing magic");
  if (std::memcmp(magic, kMatrixMagic, 4) != 0) {
    throw IoError(IoErrorKind::bad_magic, "bad magic, not an FGLT file: " + path);
  }
  const int version = is.get();
  if (version == EOF) throw IoError(IoErrorKind::truncated, "truncated file: missing version");
  if (version != kMatrixVersion) {
    throw IoError(IoErrorKind::bad_version, "unsupported FGLT version " + std::to_string(version));
  }
  const int code = is.get();
  if (code == EOF) throw IoError(IoErrorKind::truncated, "truncated file: missing format code");
  if (code < 0 || code > 3) {
    throw IoError(IoErrorKind::unknown_format, "unknown format code " + std::to_string(code));
  }
  const FpFormat fmt = static_cast<FpFormat>(code);
  const uint64_t rows = get_u64le(is, "row count");
  const uint64_t cols = get_u64le(is, "column count");
  const int width = storage_bytes(fmt);
  std::vector<double> data(rows * cols);
  for (double& v : data) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), width)) {
      throw IoError(IoErrorKind::truncated, "truncated payload: " + path);
    }
    uint64_t bits = 0;
    for (int i = 0; i < width; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
    v = decode_bits(bits, fmt);
  }
  if (is.get() != EOF) {
    throw IoError(IoErrorKind::malformed, "trailing bytes after payload: " + path);
  }
  return Matrix(rows, cols, fmt, std::move(data));
}

uint64_t ulp_distance(double a, double b) {
  auto ordered = [](double x) -> int64_t {
    const uint64_t bits = std::bit_cast<uint64_t>(x);
    return (bits & 0x8000000000000000ull)
               ? static_cast<int64_t>(0x8000000000000000ull - bits)
               : static_cast<int64_t>(bits);
  };
  const int64_t ia = ordered(a);
  const int64_t ib = ordered(b);
  return ia > ib ? static_cast<uint64_t>(ia - ib) : static_cast<uint64_t>(ib - ia);
}

}  // namespace figlut
