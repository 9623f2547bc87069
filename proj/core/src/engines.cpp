// Copyright 2026 the figlut-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "figlut/engines.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "figlut/errors.hpp"
#include "figlut/lut.hpp"

namespace figlut::engines {

const char* engine_name(EngineKind kind) {
  switch (kind) {
    case EngineKind::reference:
      return "reference";
    case EngineKind::fpe:
      return "fpe";
    case EngineKind::ifpu:
      return "ifpu";
    case EngineKind::figna:
      return "figna";
    case EngineKind::figlut_f:
      return "figlut_f";
    case EngineKind::figlut_i:
      return "figlut_i";
  }
  throw ValidationError("unknown engine kind");
}

EngineKind engine_from_name(const std::string& name) {
  static const EngineKind kinds[] = {EngineKind::reference, EngineKind::fpe,
                                     EngineKind::ifpu,      EngineKind::figna,
                                     EngineKind::figlut_f,  EngineKind::figlut_i};
  for (EngineKind k : kinds) {
    if (name == engine_name(k)) return k;
  }
  throw ValidationError("unknown engine name: " + name);
}

namespace {

bool is_chunked(EngineKind kind) {
  return kind == EngineKind::ifpu || kind == EngineKind::figlut_f ||
         kind == EngineKind::figlut_i;
}

bool is_bit_serial(EngineKind kind) { return is_chunked(kind); }

bool uses_alignment(EngineKind kind) {
  return kind == EngineKind::ifpu || kind == EngineKind::figna ||
         kind == EngineKind::figlut_i;
}

int ceil_log2(size_t v) {
  return v <= 1 ? 0 : std::bit_width(v - 1);
}

}  // namespace

EngineConfig EngineConfig::normalized(size_t m, size_t n, size_t batch) const {
  if (m == 0 || n == 0 || batch == 0) {
    throw ValidationError("problem dims must be positive");
  }
  EngineConfig c = *this;
  if (c.mu < 2 || c.mu > 8) throw ValidationError("mu must be in [2, 8]");
  if (c.k < 1) throw ValidationError("k must be at least 1");
  if (c.pe_rows < 1 || c.pe_cols < 1) {
    throw ValidationError("PE array dims must be positive");
  }
  if (c.align_width < 8 || c.align_width > 63) {
    throw ValidationError("align_width must be in [8, 63]");
  }
  c.tile_m = c.tile_m == 0 ? std::min(m, size_t{128}) : std::min(c.tile_m, m);
  c.tile_n = c.tile_n == 0 ? std::min(n, size_t{128}) : std::min(c.tile_n, n);
  if (is_chunked(c.kind) && c.tile_n >= static_cast<size_t>(c.mu)) {
    c.tile_n -= c.tile_n % static_cast<size_t>(c.mu);
  }
  c.tile_b = c.tile_b == 0 ? batch : std::min(c.tile_b, batch);
  return c;
}

AlignedBlock pre_align(std::span<const double> x, int width) {
  if (width < 8 || width > 63) throw ValidationError("align_width must be in [8, 63]");
  if (x.empty()) throw ValidationError("pre-alignment needs a nonempty block");
  int e_max = std::numeric_limits<int>::min();
  for (double v : x) {
    if (!std::isfinite(v)) throw ValidationError("pre-alignment needs finite input");
    if (v != 0.0) e_max = std::max(e_max, std::ilogb(v));
  }
  if (e_max == std::numeric_limits<int>::min()) e_max = 0;
  AlignedBlock b;
  b.e_max = e_max;
  b.scale = std::ldexp(1.0, e_max - (width - 1));
  b.mantissas.reserve(x.size());
  for (double v : x) {
    const double scaled = std::ldexp(v, (width - 1) - e_max);
    b.mantissas.push_back(static_cast<int64_t>(std::nearbyint(scaled)));
  }
  return b;
}

namespace {

using bcq::BcqMatrix;
using bcq::UniformQuant;

// One byte-granular row slice of the packed plane layout: boundary bytes
// shared with a neighboring tile are charged to every tile that touches them.
uint64_t packed_row_bytes(size_t bit_lo, size_t bit_hi) {
  return (bit_hi - 1) / 8 - bit_lo / 8 + 1;
}

struct Runner {
  EngineConfig cfg;  // normalized
  const Matrix& x;
  const BcqMatrix* bq = nullptr;
  const UniformQuant* uq = nullptr;
  bool uniform_origin = false;  // weight traffic follows the packed-code layout
  size_t m = 0;
  size_t n = 0;
  size_t batch = 0;
  int q = 1;      // planes in the weights
  int eff_q = 1;  // planes the dataflow streams
  bool direct_chunks = false;  // recompute chunk sums instead of reading tables

  Matrix y{};
  perf::EventTrace t{};

  FpFormat accum() const {
    return cfg.kind == EngineKind::reference ? FpFormat::fp64 : cfg.accum_format;
  }
  double racc(double v) const { return round_to_format(v, accum()); }

  void run();

  // Per-tile working state, rebuilt in prep() for each weight tile.
  size_t r0 = 0, r1 = 0, c0 = 0, c1 = 0;
  size_t rows = 0, cols = 0, nchunks = 0;
  std::vector<double> dq{};                            // reference / fpe
  std::vector<AlignedBlock> aligned{};                 // per batch column
  std::vector<int64_t> msum{};                         // figna, per batch column
  std::vector<std::vector<lut::HalfFflut>> ftables{};  // [col][chunk]
  std::vector<std::vector<lut::IntHalfLut>> itables{};  // [col][chunk]

  double dequant64(size_t r, size_t c) const;
  void charge_payload_bytes();
  void charge_tile_weight_bytes_word_parallel();
  void charge_tile_weight_bytes_plane();
  void prep();
  void stream_plane(int plane);
  uint32_t chunk_key(int plane, size_t r, size_t ch) const;
  double direct_chunk_value(size_t col, size_t ch, uint32_t key) const;
  void finalize_offsets();
};

double Runner::dequant64(size_t r, size_t c) const {
  if (uq) {
    return uq->delta[r] * (static_cast<double>(uq->code(r, c)) - uq->zero[r]);
  }
  double w = 0.0;
  for (int i = 0; i < q; ++i) w += bq->alphas[i][r] * bq->sign(i, r, c);
  return w + bq->offsets[r];
}

void Runner::charge_payload_bytes() {
  if (uniform_origin) {
    t.weight_dram_bytes += 8ull * m;  // fp32 delta and zero per row
  } else {
    t.weight_dram_bytes += 4ull * (static_cast<uint64_t>(q) * m + m);
  }
}

void Runner::charge_tile_weight_bytes_word_parallel() {
  uint64_t row_bytes;
  if (uniform_origin) {
    row_bytes = packed_row_bytes(c0 * q, c1 * q);
  } else {
    row_bytes = static_cast<uint64_t>(q) * packed_row_bytes(c0, c1);
  }
  t.weight_dram_bytes += static_cast<uint64_t>(rows) * row_bytes;
}

void Runner::charge_tile_weight_bytes_plane() {
  t.weight_dram_bytes += static_cast<uint64_t>(rows) * packed_row_bytes(c0, c1);
}

void Runner::prep() {
  rows = r1 - r0;
  cols = c1 - c0;
  nchunks = (cols + cfg.mu - 1) / cfg.mu;

  const EngineKind kind = cfg.kind;
  if (kind == EngineKind::reference || kind == EngineKind::fpe) {
    dq.assign(rows * cols, 0.0);
    for (size_t r = 0; r < rows; ++r) {
      for (size_t c = 0; c < cols; ++c) {
        const double w = dequant64(r0 + r, c0 + c);
        dq[r * cols + c] =
            kind == EngineKind::fpe ? round_to_format(w, cfg.act_format) : w;
      }
    }
    t.dequant_ops += static_cast<uint64_t>(rows) * cols;
    charge_tile_weight_bytes_word_parallel();
    t.act_sram_reads += static_cast<uint64_t>(cols) * batch;
    return;
  }

  if (kind == EngineKind::figna) {
    charge_tile_weight_bytes_word_parallel();
  } else if (uniform_origin) {
    // Bit-serial planes are carved out of the buffered packed codes, so the
    // DRAM side sees the tile once, not once per plane.
    charge_tile_weight_bytes_word_parallel();
  }

  std::vector<double> slice(cols);
  if (uses_alignment(kind)) {
    aligned.assign(batch, {});
    for (size_t col = 0; col < batch; ++col) {
      for (size_t c = 0; c < cols; ++c) slice[c] = x(c0 + c, col);
      aligned[col] = pre_align(slice, cfg.align_width);
    }
    t.align_ops += static_cast<uint64_t>(cols) * batch;
  }
  if (kind == EngineKind::figna) {
    msum.assign(batch, 0);
    for (size_t col = 0; col < batch; ++col) {
      int64_t s = 0;
      for (int64_t mant : aligned[col].mantissas) s += mant;
      msum[col] = s;
      t.int_adds += cols;
    }
  }
  if (kind != EngineKind::ifpu) {
    t.act_sram_reads += static_cast<uint64_t>(cols) * batch;
  }

  if (kind == EngineKind::figlut_f) {
    ftables.assign(batch, {});
    std::vector<double> chunk(cfg.mu);
    for (size_t col = 0; col < batch; ++col) {
      ftables[col].resize(nchunks);
      for (size_t ch = 0; ch < nchunks; ++ch) {
        for (int idx = 0; idx < cfg.mu; ++idx) {
          const size_t c = c0 + ch * cfg.mu + idx;
          chunk[idx] = c < c1 ? x(c, col) : 0.0;
        }
        lut::AddCount ac;
        ftables[col][ch] =
            lut::build_hfflut_generator(chunk, cfg.lut_value_format(), &ac);
        t.lut_builds += 1;
        t.lut_gen_adds += ac.additions;
      }
    }
  } else if (kind == EngineKind::figlut_i) {
    itables.assign(batch, {});
    std::vector<int64_t> chunk(cfg.mu);
    for (size_t col = 0; col < batch; ++col) {
      itables[col].resize(nchunks);
      for (size_t ch = 0; ch < nchunks; ++ch) {
        for (int idx = 0; idx < cfg.mu; ++idx) {
          const size_t c = ch * cfg.mu + idx;
          chunk[idx] = c < cols ? aligned[col].mantissas[c] : 0;
        }
        lut::AddCount ac;
        itables[col][ch] = lut::build_int_half_lut(chunk, &ac);
        t.lut_builds += 1;
        t.lut_gen_adds += ac.additions;
      }
    }
  }
}

uint32_t Runner::chunk_key(int plane, size_t r, size_t ch) const {
  uint32_t bits = 0;
  for (int idx = 0; idx < cfg.mu; ++idx) {
    const size_t c = c0 + ch * cfg.mu + idx;
    const bool bit = c < c1 && bq->planes[plane].get(r, c);
    bits |= static_cast<uint32_t>(bit) << (cfg.mu - 1 - idx);
  }
  return bits;
}

// Mirror of the generator-and-decoder arithmetic for one chunk: same pair
// association for mu = 4, same left-to-right order otherwise, same rounding
// after every add.
double Runner::direct_chunk_value(size_t col, size_t ch, uint32_t key) const {
  const FpFormat fmt = cfg.lut_value_format();
  const int mu = cfg.mu;
  auto term = [&](int idx) {
    const size_t c = c0 + ch * mu + idx;
    const double v = c < c1 ? x(c, col) : 0.0;
    return ((key >> (mu - 1 - idx)) & 1u) ? v : -v;
  };
  if (mu == 4) {
    const double upper = round_to_format(term(0) + term(1), fmt);
    const double lower = round_to_format(term(2) + term(3), fmt);
    return round_to_format(upper + lower, fmt);
  }
  double acc = term(0);
  for (int idx = 1; idx < mu; ++idx) {
    acc = round_to_format(acc + term(idx), fmt);
  }
  return acc;
}

void Runner::stream_plane(int plane) {
  const EngineKind kind = cfg.kind;
  if (is_bit_serial(kind) && !uniform_origin) charge_tile_weight_bytes_plane();
  if (kind == EngineKind::ifpu) {
    t.act_sram_reads += static_cast<uint64_t>(cols) * batch;
  }
  t.psum_sram_accesses += static_cast<uint64_t>(rows) * batch;
  t.cycles += static_cast<uint64_t>(batch) + cfg.pe_rows + cfg.pe_cols - 1;

  switch (kind) {
    case EngineKind::reference:
      for (size_t col = 0; col < batch; ++col) {
        for (size_t r = 0; r < rows; ++r) {
          double acc = y(r0 + r, col);
          for (size_t c = 0; c < cols; ++c) {
            acc += dq[r * cols + c] * x(c0 + c, col);
          }
          y.at(r0 + r, col) = acc;
        }
      }
      t.fp_muls += static_cast<uint64_t>(rows) * cols * batch;
      t.fp_adds += static_cast<uint64_t>(rows) * cols * batch;
      break;

    case EngineKind::fpe:
      for (size_t col = 0; col < batch; ++col) {
        for (size_t r = 0; r < rows; ++r) {
          double acc = y(r0 + r, col);
          for (size_t c = 0; c < cols; ++c) {
            acc = racc(acc + dq[r * cols + c] * x(c0 + c, col));
          }
          y.at(r0 + r, col) = acc;
        }
      }
      t.fp_muls += static_cast<uint64_t>(rows) * cols * batch;
      t.fp_adds += static_cast<uint64_t>(rows) * cols * batch;
      break;

    case EngineKind::ifpu:
      for (size_t col = 0; col < batch; ++col) {
        const AlignedBlock& ab = aligned[col];
        for (size_t r = 0; r < rows; ++r) {
          int64_t s = 0;
          for (size_t c = 0; c < cols; ++c) {
            const int64_t mant = ab.mantissas[c];
            s += bq->planes[plane].get(r0 + r, c0 + c) ? mant : -mant;
          }
          t.int_adds += cols;
          const double v =
              racc(bq->alphas[plane][r0 + r] * (static_cast<double>(s) * ab.scale));
          t.fp_muls += 1;
          y.at(r0 + r, col) = racc(y(r0 + r, col) + v);
          t.fp_adds += 1;
        }
      }
      break;

    case EngineKind::figna:
      for (size_t col = 0; col < batch; ++col) {
        const AlignedBlock& ab = aligned[col];
        for (size_t r = 0; r < rows; ++r) {
          int64_t acc = 0;
          for (size_t c = 0; c < cols; ++c) {
            acc += ab.mantissas[c] * uq->code(r0 + r, c0 + c);
          }
          t.int_muls += cols;
          t.int_adds += cols;
          const double centered = static_cast<double>(acc) -
                                  uq->zero[r0 + r] * static_cast<double>(msum[col]);
          t.fp_muls += 1;
          t.fp_adds += 1;
          const double v = racc(uq->delta[r0 + r] * (ab.scale * centered));
          t.fp_muls += 1;
          y.at(r0 + r, col) = racc(y(r0 + r, col) + v);
          t.fp_adds += 1;
        }
      }
      break;

    case EngineKind::figlut_f:
      for (size_t col = 0; col < batch; ++col) {
        for (size_t r = 0; r < rows; ++r) {
          double acc = 0.0;
          for (size_t ch = 0; ch < nchunks; ++ch) {
            const uint32_t key = chunk_key(plane, r0 + r, ch);
            const double cv =
                direct_chunks
                    ? direct_chunk_value(col, ch, key)
                    : lut::read_half(ftables[col][ch], {cfg.mu, key});
            t.rac_reads += 1;
            acc = racc(acc + cv);
            t.fp_adds += 1;
          }
          const double v = racc(bq->alphas[plane][r0 + r] * acc);
          t.fp_muls += 1;
          y.at(r0 + r, col) = racc(y(r0 + r, col) + v);
          t.fp_adds += 1;
        }
      }
      break;

    case EngineKind::figlut_i:
      for (size_t col = 0; col < batch; ++col) {
        const AlignedBlock& ab = aligned[col];
        for (size_t r = 0; r < rows; ++r) {
          int64_t s = 0;
          for (size_t ch = 0; ch < nchunks; ++ch) {
            const uint32_t key = chunk_key(plane, r0 + r, ch);
            s += lut::read_half_int(itables[col][ch], {cfg.mu, key});
            t.rac_reads += 1;
            t.int_adds += 1;
          }
          const double v =
              racc(bq->alphas[plane][r0 + r] * (static_cast<double>(s) * ab.scale));
          t.fp_muls += 1;
          y.at(r0 + r, col) = racc(y(r0 + r, col) + v);
          t.fp_adds += 1;
        }
      }
      break;
  }
}

void Runner::finalize_offsets() {
  std::vector<double> sx(batch);
  for (size_t col = 0; col < batch; ++col) {
    double acc = 0.0;
    for (size_t j = 0; j < n; ++j) acc = racc(acc + x(j, col));
    t.fp_adds += n;
    sx[col] = acc;
  }
  for (size_t r = 0; r < m; ++r) {
    for (size_t col = 0; col < batch; ++col) {
      const double v = racc(bq->offsets[r] * sx[col]);
      t.fp_muls += 1;
      y.at(r, col) = racc(y(r, col) + v);
      t.fp_adds += 1;
    }
  }
}

void Runner::run() {
  y = Matrix::zeros(m, batch, accum());
  charge_payload_bytes();
  for (r0 = 0; r0 < m; r0 = r1) {
    r1 = std::min(m, r0 + cfg.tile_m);
    for (c0 = 0; c0 < n; c0 = c1) {
      c1 = std::min(n, c0 + cfg.tile_n);
      prep();
      for (int plane = 0; plane < eff_q; ++plane) stream_plane(plane);
    }
  }
  if (is_bit_serial(cfg.kind)) finalize_offsets();
}

Runner make_runner(const EngineConfig& cfg, const Weights& weights, const Matrix& x,
                   BcqMatrix& embedded_storage) {
  const BcqMatrix* bq = std::get_if<BcqMatrix>(&weights);
  const UniformQuant* uq = std::get_if<UniformQuant>(&weights);
  size_t m, n;
  int q;
  if (bq) {
    bq->validate();
    m = bq->rows;
    n = bq->cols;
    q = bq->q;
  } else {
    uq->validate();
    m = uq->rows;
    n = uq->cols;
    q = uq->q;
  }
  const size_t batch = x.cols();
  const EngineConfig norm = cfg.normalized(m, n, batch);
  if (x.rows() != n) throw ValidationError("activation rows must match weight cols");
  if (x.format() != norm.act_format) {
    throw ValidationError("activation matrix format must match act_format");
  }

  const EngineKind kind = norm.kind;
  bool uniform_origin = uq != nullptr;
  if (kind == EngineKind::figna) {
    if (!uq) throw ValidationError("figna runs on uniform weights only");
  } else if (is_bit_serial(kind) && uq) {
    embedded_storage = bcq::uniform_to_bcq(*uq);
    bq = &embedded_storage;
  }

  if (kind == EngineKind::ifpu || kind == EngineKind::figlut_i) {
    if (norm.align_width - 1 + ceil_log2(norm.tile_n) > 62) {
      throw ValidationError("align_width too wide for tile_n: int64 accumulation overflows");
    }
  } else if (kind == EngineKind::figna) {
    if (norm.align_width - 1 + q + ceil_log2(norm.tile_n) > 62) {
      throw ValidationError("align_width too wide for tile_n and q: int64 accumulation overflows");
    }
  }

  Runner runner{.cfg = norm,
                .x = x,
                .bq = bq,
                .uq = uq,
                .uniform_origin = uniform_origin,
                .m = m,
                .n = n,
                .batch = batch,
                .q = q,
                .eff_q = is_bit_serial(kind) ? q : 1};
  if (is_bit_serial(kind)) {
    runner.uq = nullptr;  // bit-serial engines run on the BCQ view alone
  }
  return runner;
}

}  // namespace

GemmResult run_dataflow(const EngineConfig& cfg, const Weights& weights, const Matrix& x) {
  BcqMatrix embedded;
  Runner runner = make_runner(cfg, weights, x, embedded);
  runner.run();
  return GemmResult{std::move(runner.y), runner.t, runner.cfg};
}

GemmResult gemm(const EngineConfig& cfg, const Weights& weights, const Matrix& x) {
  return run_dataflow(cfg, weights, x);
}

Matrix grouped_reference_gemm(const EngineConfig& cfg, const bcq::BcqMatrix& weights,
                              const Matrix& x) {
  if (cfg.kind != EngineKind::figlut_f) {
    throw ValidationError("grouped reference mirrors the FP LUT engine only");
  }
  BcqMatrix embedded;
  const Weights w = weights;
  Runner runner = make_runner(cfg, w, x, embedded);
  runner.direct_chunks = true;
  runner.run();
  return std::move(runner.y);
}

double rel_error(const Matrix& y, const Matrix& yref) {
  if (y.rows() != yref.rows() || y.cols() != yref.cols()) {
    throw ValidationError("rel_error needs matching shapes");
  }
  double max_diff = 0.0;
  double max_ref = 0.0;
  for (size_t r = 0; r < y.rows(); ++r) {
    for (size_t c = 0; c < y.cols(); ++c) {
      max_diff = std::max(max_diff, std::abs(y(r, c) - yref(r, c)));
      max_ref = std::max(max_ref, std::abs(yref(r, c)));
    }
  }
  return max_diff / std::max(max_ref, 1e-300);
}

}  // namespace figlut::engines
