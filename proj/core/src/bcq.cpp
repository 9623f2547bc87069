// Copyright 2026 the figlut-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "figlut/bcq.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "figlut/errors.hpp"

namespace figlut::bcq {

void BcqMatrix::validate() const {
  if (q < 1 || q > 8) throw ValidationError("BCQ q must be in [1, 8]");
  if (planes.size() != static_cast<size_t>(q) || alphas.size() != static_cast<size_t>(q)) {
    throw ValidationError("BCQ plane/alpha count does not match q");
  }
  if (offsets.size() != rows) throw ValidationError("BCQ offset count does not match rows");
  for (const BitMatrix& p : planes) {
    if (p.rows() != rows || p.cols() != cols) {
      throw ValidationError("BCQ plane dimensions do not match");
    }
  }
  for (const auto& a : alphas) {
    if (a.size() != rows) throw ValidationError("BCQ alpha count does not match rows");
    for (double v : a) {
      if (!(std::isfinite(v) && v > 0.0)) {
        throw ValidationError("BCQ alphas must be finite and positive");
      }
    }
  }
  for (double v : offsets) {
    if (!std::isfinite(v)) throw ValidationError("BCQ offsets must be finite");
  }
}

void UniformQuant::validate() const {
  if (q < 1 || q > 8) throw ValidationError("uniform q must be in [1, 8]");
  if (codes.size() != rows * cols) throw ValidationError("uniform code count mismatch");
  if (delta.size() != rows || zero.size() != rows) {
    throw ValidationError("uniform per-row parameter count mismatch");
  }
  const int32_t maxcode = (1 << q) - 1;
  for (int32_t c : codes) {
    if (c < 0 || c > maxcode) throw ValidationError("uniform code out of range");
  }
  for (double d : delta) {
    if (!(std::isfinite(d) && d > 0.0)) throw ValidationError("uniform delta must be positive");
  }
  for (double z : zero) {
    if (!std::isfinite(z)) throw ValidationError("uniform zero-point must be finite");
  }
}

UniformQuant quantize_rtn(const Matrix& w, int q) {
  if (q < 1 || q > 8) throw ValidationError("quantize_rtn requires q in [1, 8]");
  const size_t m = w.rows(), n = w.cols();
  UniformQuant u;
  u.rows = m;
  u.cols = n;
  u.q = q;
  u.codes.resize(m * n);
  u.delta.resize(m);
  u.zero.resize(m);
  const double levels = static_cast<double>((1 << q) - 1);
  for (size_t r = 0; r < m; ++r) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < n; ++c) {
      const double v = w(r, c);
      if (!std::isfinite(v)) throw ValidationError("quantize_rtn requires finite input");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    double delta = (hi - lo) / levels;
    if (delta == 0.0) delta = 1.0;
    const double zero = -lo / delta;
    u.delta[r] = delta;
    u.zero[r] = zero;
    for (size_t c = 0; c < n; ++c) {
      const double t = std::round(w(r, c) / delta + zero);
      u.codes[r * n + c] =
          static_cast<int32_t>(std::clamp(t, 0.0, levels));
    }
  }
  return u;
}

BcqMatrix uniform_to_bcq(const UniformQuant& u) {
  u.validate();
  BcqMatrix b;
  b.rows = u.rows;
  b.cols = u.cols;
  b.q = u.q;
  b.planes.assign(u.q, BitMatrix(u.rows, u.cols));
  b.alphas.assign(u.q, std::vector<double>(u.rows));
  b.offsets.resize(u.rows);
  const double half_top = static_cast<double>((1 << u.q) - 1) * 0.5;
  for (size_t r = 0; r < u.rows; ++r) {
    for (int i = 0; i < u.q; ++i) {
      // delta * 2^(i-1) / 2: exact, power-of-two scaling only.
      b.alphas[i][r] = std::ldexp(u.delta[r], i - 2 + 1);
    }
    b.offsets[r] = u.delta[r] * (half_top - u.zero[r]);
    for (size_t c = 0; c < u.cols; ++c) {
      const int32_t code = u.code(r, c);
      for (int i = 0; i < u.q; ++i) b.planes[i].set(r, c, (code >> i) & 1);
    }
  }
  b.validate();
  return b;
}

namespace {

// Row-local state for the alternating solver. Patterns index plane signs via
// bit i of p; candidate[p] = sum_i alpha[i] * (bit ? +1 : -1), evaluated
// left-to-right so it is bit-identical to the error reconstruction below.
struct RowSolve {
  int q;
  size_t n;
  std::vector<double> alpha;       // [q]
  std::vector<uint8_t> pattern;    // [n], per-column sign pattern
  double z = 0.0;

  double candidate(int p) const {
    double v = 0.0;
    for (int i = 0; i < q; ++i) v += (p >> i) & 1 ? alpha[i] : -alpha[i];
    return v;
  }

  double sq_error(const double* w) const {
    double e = 0.0;
    for (size_t c = 0; c < n; ++c) {
      const double d = w[c] - z - candidate(pattern[c]);
      e += d * d;
    }
    return e;
  }
};

// Solve (G + damping I) x = rhs for tiny q x q systems, partial pivoting.
// Returns false if the pivot degenerates.
bool solve_small(std::vector<std::vector<double>> G, std::vector<double> rhs,
                 double damping, std::vector<double>* x) {
  const int q = static_cast<int>(rhs.size());
  for (int i = 0; i < q; ++i) G[i][i] += damping;
  for (int col = 0; col < q; ++col) {
    int piv = col;
    for (int r = col + 1; r < q; ++r) {
      if (std::abs(G[r][col]) > std::abs(G[piv][col])) piv = r;
    }
    if (G[piv][col] == 0.0 || !std::isfinite(G[piv][col])) return false;
    std::swap(G[piv], G[col]);
    std::swap(rhs[piv], rhs[col]);
    for (int r = col + 1; r < q; ++r) {
      const double f = G[r][col] / G[col][col];
      for (int c = col; c < q; ++c) G[r][c] -= f * G[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  x->assign(q, 0.0);
  for (int r = q - 1; r >= 0; --r) {
    double s = rhs[r];
    for (int c = r + 1; c < q; ++c) s -= G[r][c] * (*x)[c];
    (*x)[r] = s / G[r][r];
    if (!std::isfinite((*x)[r])) return false;
  }
  return true;
}

void solve_row(const double* w, size_t n, int q, const BcqSolveOptions& opts,
               RowSolve* rs, std::vector<double>* errs) {
  rs->q = q;
  rs->n = n;
  rs->alpha.assign(q, 0.0);
  rs->pattern.assign(n, 0);
  rs->z = 0.0;

  // Greedy residual init.
  std::vector<double> residual(w, w + n);
  for (int i = 0; i < q; ++i) {
    double mean_abs = 0.0;
    for (double v : residual) mean_abs += std::abs(v);
    mean_abs /= static_cast<double>(n);
    rs->alpha[i] = mean_abs > 0.0 ? mean_abs : opts.epsilon;
    for (size_t c = 0; c < n; ++c) {
      const bool pos = residual[c] >= 0.0;
      if (pos) rs->pattern[c] |= static_cast<uint8_t>(1u << i);
      residual[c] -= pos ? rs->alpha[i] : -rs->alpha[i];
    }
  }
  if (opts.use_offset) {
    double mean_res = 0.0;
    for (size_t c = 0; c < n; ++c) mean_res += w[c] - rs->candidate(rs->pattern[c]);
    rs->z = mean_res / static_cast<double>(n);
  }
  double err = rs->sq_error(w);
  errs->push_back(err);

  const int npat = 1 << q;
  std::vector<double> cand_value(npat);
  for (int round = 0; round < opts.iters; ++round) {
    // (a) Least-squares alphas for fixed signs. G[i][j] counts sign
    // agreements, rhs[i] projects the offset-corrected row onto plane i.
    std::vector<std::vector<double>> G(q, std::vector<double>(q, 0.0));
    std::vector<double> rhs(q, 0.0);
    for (size_t c = 0; c < n; ++c) {
      const uint8_t p = rs->pattern[c];
      for (int i = 0; i < q; ++i) {
        const double si = (p >> i) & 1 ? 1.0 : -1.0;
        rhs[i] += si * (w[c] - rs->z);
        for (int j = 0; j < q; ++j) {
          const double sj = (p >> j) & 1 ? 1.0 : -1.0;
          G[i][j] += si * sj;
        }
      }
    }
    std::vector<double> fitted;
    if (solve_small(std::move(G), std::move(rhs), opts.epsilon, &fitted)) {
      for (double& a : fitted) {
        if (!(a > 0.0)) a = opts.epsilon;
      }
      const std::vector<double> saved = rs->alpha;
      rs->alpha = fitted;
      const double cand_err = rs->sq_error(w);
      if (cand_err <= err) {
        err = cand_err;
      } else {
        rs->alpha = saved;
      }
    }

    // (b) Exhaustive per-column sign patterns; picking the per-column argmin
    // cannot raise the total, so no guard is needed.
    for (int p = 0; p < npat; ++p) cand_value[p] = rs->candidate(p);
    for (size_t c = 0; c < n; ++c) {
      const double target = w[c] - rs->z;
      int best = 0;
      double best_d = std::abs(target - cand_value[0]);
      for (int p = 1; p < npat; ++p) {
        const double d = std::abs(target - cand_value[p]);
        if (d < best_d) {
          best = p;
          best_d = d;
        }
      }
      rs->pattern[c] = static_cast<uint8_t>(best);
    }
    err = rs->sq_error(w);

    // (c) Offset refit to the mean residual.
    if (opts.use_offset) {
      double mean_res = 0.0;
      for (size_t c = 0; c < n; ++c) mean_res += w[c] - rs->candidate(rs->pattern[c]);
      const double saved = rs->z;
      rs->z = mean_res / static_cast<double>(n);
      const double cand_err = rs->sq_error(w);
      if (cand_err <= err) {
        err = cand_err;
      } else {
        rs->z = saved;
      }
    }
    errs->push_back(err);
  }
}

}  // namespace

BcqMatrix quantize_bcq_alternating(const Matrix& w, int q, const BcqSolveOptions& opts,
                                   BcqSolveStats* stats) {
  if (q < 1 || q > 4) throw ValidationError("alternating solver requires q in [1, 4]");
  if (opts.iters < 0) throw ValidationError("iters must be nonnegative");
  for (double v : w.data()) {
    if (!std::isfinite(v)) throw ValidationError("alternating solver requires finite input");
  }
  const size_t m = w.rows(), n = w.cols();
  BcqMatrix b;
  b.rows = m;
  b.cols = n;
  b.q = q;
  b.planes.assign(q, BitMatrix(m, n));
  b.alphas.assign(q, std::vector<double>(m));
  b.offsets.resize(m);
  if (stats) {
    stats->row_sq_error.assign(opts.iters + 1, std::vector<double>(m, 0.0));
  }
  std::vector<double> errs;
  RowSolve rs;
  for (size_t r = 0; r < m; ++r) {
    errs.clear();
    solve_row(&w.data()[r * n], n, q, opts, &rs, &errs);
    for (int i = 0; i < q; ++i) {
      b.alphas[i][r] = rs.alpha[i];
      for (size_t c = 0; c < n; ++c) b.planes[i].set(r, c, (rs.pattern[c] >> i) & 1);
    }
    b.offsets[r] = rs.z;
    if (stats) {
      for (int round = 0; round <= opts.iters; ++round) {
        stats->row_sq_error[round][r] = errs[round];
      }
    }
  }
  b.validate();
  return b;
}

Matrix dequantize(const BcqMatrix& b) {
  b.validate();
  std::vector<double> out(b.rows * b.cols);
  for (size_t r = 0; r < b.rows; ++r) {
    for (size_t c = 0; c < b.cols; ++c) {
      double acc = 0.0;
      for (int i = 0; i < b.q; ++i) acc += b.alphas[i][r] * b.sign(i, r, c);
      out[r * b.cols + c] = acc + b.offsets[r];
    }
  }
  return Matrix(b.rows, b.cols, FpFormat::fp64, std::move(out));
}

Matrix dequantize(const UniformQuant& u) {
  u.validate();
  std::vector<double> out(u.rows * u.cols);
  for (size_t r = 0; r < u.rows; ++r) {
    for (size_t c = 0; c < u.cols; ++c) {
      out[r * u.cols + c] = u.delta[r] * (static_cast<double>(u.code(r, c)) - u.zero[r]);
    }
  }
  return Matrix(u.rows, u.cols, FpFormat::fp64, std::move(out));
}

std::vector<double> bcq_gemv_reference(const BcqMatrix& b, const std::vector<double>& x) {
  b.validate();
  if (x.size() != b.cols) throw ValidationError("gemv operand length mismatch");
  double sx = 0.0;
  for (double v : x) sx += v;
  std::vector<double> y(b.rows, 0.0);
  for (size_t r = 0; r < b.rows; ++r) {
    double acc = 0.0;
    for (int i = 0; i < b.q; ++i) {
      double s = 0.0;
      for (size_t c = 0; c < b.cols; ++c) {
        s += b.planes[i].get(r, c) ? x[c] : -x[c];
      }
      acc += b.alphas[i][r] * s;
    }
    y[r] = acc + b.offsets[r] * sx;
  }
  return y;
}

namespace {

constexpr char kBcqMagic[4] = {'F', 'G', 'B', 'Q'};
constexpr uint8_t kBcqVersion = 1;

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

void put_f32le(std::ostream& os, double v, const char* what) {
  const double narrowed = round_to_format(v, FpFormat::fp32);
  if (!std::isfinite(narrowed)) {
    throw ValidationError(std::string(what) + " does not fit fp32 storage");
  }
  const uint64_t bits = encode_bits(narrowed, FpFormat::fp32);
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(b, 4);
}

double get_f32le(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw IoError(IoErrorKind::truncated, std::string("truncated file: missing ") + what);
  }
  uint64_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
  return decode_bits(bits, FpFormat::fp32);
}

}  // namespace

void save_bcq(const BcqMatrix& b, const std::string& path) {
  b.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(IoErrorKind::open_failed, "cannot open for write: " + path);
  os.write(kBcqMagic, 4);
  os.put(static_cast<char>(kBcqVersion));
  put_u64le(os, b.rows);
  put_u64le(os, b.cols);
  put_u64le(os, static_cast<uint64_t>(b.q));
  for (const BitMatrix& p : b.planes) {
    os.write(reinterpret_cast<const char*>(p.bytes().data()),
             static_cast<std::streamsize>(p.bytes().size()));
  }
  for (const auto& plane_alphas : b.alphas) {
    for (double a : plane_alphas) put_f32le(os, a, "alpha");
  }
  for (double z : b.offsets) put_f32le(os, z, "offset");
  if (!os) throw IoError(IoErrorKind::write_failed, "write failed: " + path);
}

BcqMatrix load_bcq(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(IoErrorKind::open_failed, "cannot open: " + path);
  char magic[4];
  if (!is.read(magic, 4)) throw IoError(IoErrorKind::truncated, "truncated file: missing magic");
  if (std::memcmp(magic, kBcqMagic, 4) != 0) {
    throw IoError(IoErrorKind::bad_magic, "bad magic, not an FGBQ file: " + path);
  }
  const int version = is.get();
  if (version == EOF) throw IoError(IoErrorKind::truncated, "truncated file: missing version");
  if (version != kBcqVersion) {
    throw IoError(IoErrorKind::bad_version, "unsupported FGBQ version " + std::to_string(version));
  }
  BcqMatrix b;
  b.rows = get_u64le(is, "row count");
  b.cols = get_u64le(is, "column count");
  const uint64_t q = get_u64le(is, "plane count");
  if (q < 1 || q > 8) {
    throw IoError(IoErrorKind::malformed, "FGBQ plane count out of range: " + std::to_string(q));
  }
  b.q = static_cast<int>(q);
  b.planes.assign(b.q, BitMatrix(b.rows, b.cols));
  for (BitMatrix& p : b.planes) {
    if (!is.read(reinterpret_cast<char*>(p.bytes().data()),
                 static_cast<std::streamsize>(p.bytes().size()))) {
      throw IoError(IoErrorKind::truncated, "truncated bit-plane payload: " + path);
    }
  }
  b.alphas.assign(b.q, std::vector<double>(b.rows));
  for (auto& plane_alphas : b.alphas) {
    for (double& a : plane_alphas) a = get_f32le(is, "alpha");
  }
  b.offsets.resize(b.rows);
  for (double& z : b.offsets) z = get_f32le(is, "offset");
  if (is.get() != EOF) {
    throw IoError(IoErrorKind::malformed, "trailing bytes after payload: " + path);
  }
  try {
    b.validate();
  } catch (const ValidationError& e) {
    throw IoError(IoErrorKind::malformed, std::string("invalid FGBQ contents: ") + e.what());
  }
  return b;
}

}  // namespace figlut::bcq
