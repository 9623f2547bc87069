// Copyright 2026 the figlut-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "figlut/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "figlut/bcq.hpp"
#include "figlut/engines.hpp"
#include "figlut/errors.hpp"
#include "figlut/lut.hpp"
#include "figlut/numerics.hpp"
#include "figlut/perf.hpp"
#include "json.hpp"

namespace figlut::cli {

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string out;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(fields[i]);
  }
  out += "\r\n";
  return out;
}

Csv parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool saw_any = false;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
    saw_any = false;
  };
  for (size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) throw ValidationError("CSV quote inside unquoted field");
        in_quotes = true;
        saw_any = true;
        break;
      case ',':
        end_field();
        saw_any = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        end_record();
        break;
      case '\n':
        end_record();
        break;
      default:
        field += c;
        saw_any = true;
    }
  }
  if (in_quotes) throw ValidationError("CSV ends inside a quoted field");
  if (saw_any || !field.empty() || !record.empty()) end_record();
  if (records.empty()) throw ValidationError("CSV has no header record");
  Csv csv;
  csv.header = records.front();
  for (size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != csv.header.size()) {
      throw ValidationError("CSV record " + std::to_string(i) + " has " +
                            std::to_string(records[i].size()) + " fields, header has " +
                            std::to_string(csv.header.size()));
    }
    csv.rows.push_back(std::move(records[i]));
  }
  return csv;
}

namespace {

using nlohmann::json;

json parse_json_file(const std::string& path, const char* what) {
  std::ifstream is(path);
  if (!is) throw IoError(IoErrorKind::open_failed, std::string("cannot open ") + what + ": " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw IoError(IoErrorKind::malformed,
                  std::string(what) + " is not valid JSON: " + path + ": " + e.what());
  }
}

void check_keys(const json& j, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError(ctx + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) throw ValidationError("unknown key in " + ctx + ": " + key);
  }
}

double get_num(const json& j, const std::string& ctx, const char* key, double fallback,
               bool required = false) {
  if (!j.contains(key)) {
    if (required) throw ValidationError(ctx + " is missing required key: " + key);
    return fallback;
  }
  if (!j[key].is_number()) throw ValidationError(ctx + "." + key + " must be a number");
  return j[key].get<double>();
}

int64_t get_int(const json& j, const std::string& ctx, const char* key, int64_t fallback,
                bool required = false) {
  if (!j.contains(key)) {
    if (required) throw ValidationError(ctx + " is missing required key: " + key);
    return fallback;
  }
  if (!j[key].is_number_integer() && !j[key].is_number_unsigned()) {
    throw ValidationError(ctx + "." + key + " must be an integer");
  }
  return j[key].get<int64_t>();
}

std::string get_str(const json& j, const std::string& ctx, const char* key,
                    const std::string& fallback, bool required = false) {
  if (!j.contains(key)) {
    if (required) throw ValidationError(ctx + " is missing required key: " + key);
    return fallback;
  }
  if (!j[key].is_string()) throw ValidationError(ctx + "." + key + " must be a string");
  return j[key].get<std::string>();
}

bool get_bool(const json& j, const std::string& ctx, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean()) throw ValidationError(ctx + "." + key + " must be a boolean");
  return j[key].get<bool>();
}

DistSpec parse_dist(const json& j, const std::string& ctx) {
  DistSpec d;
  const std::string kind = get_str(j, ctx, "kind", "", true);
  if (kind == "uniform") {
    check_keys(j, ctx, {"kind", "lo", "hi"});
    d.kind = Dist::uniform;
    d.a = get_num(j, ctx, "lo", 0.0, true);
    d.b = get_num(j, ctx, "hi", 0.0, true);
  } else if (kind == "normal") {
    check_keys(j, ctx, {"kind", "mean", "std"});
    d.kind = Dist::normal;
    d.a = get_num(j, ctx, "mean", 0.0);
    d.b = get_num(j, ctx, "std", 1.0);
  } else {
    throw ValidationError(ctx + ".kind must be \"uniform\" or \"normal\"");
  }
  return d;
}

engines::EngineConfig parse_engine(const json& j, const std::string& ctx) {
  check_keys(j, ctx,
             {"kind", "mu", "k", "pe_rows", "pe_cols", "act_format", "accum_format",
              "lut_format", "align_width", "tile_m", "tile_n", "tile_b"});
  engines::EngineConfig c;
  if (j.contains("kind")) c.kind = engines::engine_from_name(get_str(j, ctx, "kind", "", true));
  c.mu = static_cast<int>(get_int(j, ctx, "mu", c.mu));
  c.k = static_cast<int>(get_int(j, ctx, "k", c.k));
  c.pe_rows = static_cast<int>(get_int(j, ctx, "pe_rows", c.pe_rows));
  c.pe_cols = static_cast<int>(get_int(j, ctx, "pe_cols", c.pe_cols));
  if (j.contains("act_format")) {
    c.act_format = format_from_name(get_str(j, ctx, "act_format", "", true));
  }
  if (j.contains("accum_format")) {
    c.accum_format = format_from_name(get_str(j, ctx, "accum_format", "", true));
  }
  if (j.contains("lut_format")) {
    c.lut_format = format_from_name(get_str(j, ctx, "lut_format", "", true));
  }
  c.align_width = static_cast<int>(get_int(j, ctx, "align_width", c.align_width));
  c.tile_m = static_cast<size_t>(get_int(j, ctx, "tile_m", 0));
  c.tile_n = static_cast<size_t>(get_int(j, ctx, "tile_n", 0));
  c.tile_b = static_cast<size_t>(get_int(j, ctx, "tile_b", 0));
  return c;
}

struct GenSpec {
  uint64_t seed = 0;
  size_t rows = 0;  // 0 = inferred (activations only)
  size_t cols = 0;
  std::optional<FpFormat> format;
  DistSpec dist{Dist::normal, 0.0, 1.0};
};

GenSpec parse_gen(const json& j, const std::string& ctx, bool rows_required) {
  check_keys(j, ctx, {"seed", "rows", "cols", "format", "dist"});
  GenSpec g;
  g.seed = static_cast<uint64_t>(get_int(j, ctx, "seed", 0));
  g.rows = static_cast<size_t>(get_int(j, ctx, "rows", 0, rows_required));
  g.cols = static_cast<size_t>(get_int(j, ctx, "cols", 0, true));
  if (j.contains("format")) g.format = format_from_name(get_str(j, ctx, "format", "", true));
  if (j.contains("dist")) g.dist = parse_dist(j["dist"], ctx + ".dist");
  return g;
}

struct QuantSpec {
  std::string method = "rtn";
  int q = 4;
  int iters = 5;
  bool offset = true;
};

QuantSpec parse_quant(const json& j, const std::string& ctx) {
  check_keys(j, ctx, {"method", "q", "iters", "offset"});
  QuantSpec s;
  s.method = get_str(j, ctx, "method", s.method);
  if (s.method != "rtn" && s.method != "alternating") {
    throw ValidationError(ctx + ".method must be \"rtn\" or \"alternating\"");
  }
  s.q = static_cast<int>(get_int(j, ctx, "q", s.q));
  s.iters = static_cast<int>(get_int(j, ctx, "iters", s.iters));
  s.offset = get_bool(j, ctx, "offset", s.offset);
  return s;
}

struct RunConfig {
  engines::EngineConfig engine;
  std::string weights_file;
  std::optional<GenSpec> weights_gen;
  QuantSpec quant;
  std::string acts_file;
  std::optional<GenSpec> acts_gen;
  std::string cost_model;
  std::string out_matrix;
  std::string out_trace;
};

RunConfig parse_run_config(const json& j) {
  check_keys(j, "config", {"engine", "weights", "activations", "cost_model", "out"});
  RunConfig c;
  if (j.contains("engine")) c.engine = parse_engine(j["engine"], "engine");
  if (j.contains("weights")) {
    const json& w = j["weights"];
    check_keys(w, "weights", {"file", "generate", "quantize"});
    c.weights_file = get_str(w, "weights", "file", "");
    if (w.contains("generate")) {
      c.weights_gen = parse_gen(w["generate"], "weights.generate", true);
      if (!c.weights_gen->format) c.weights_gen->format = FpFormat::fp32;
    }
    if (w.contains("quantize")) c.quant = parse_quant(w["quantize"], "weights.quantize");
    if (!c.weights_file.empty() && c.weights_gen) {
      throw ValidationError("weights: give either file or generate, not both");
    }
  }
  if (j.contains("activations")) {
    const json& a = j["activations"];
    check_keys(a, "activations", {"file", "generate"});
    c.acts_file = get_str(a, "activations", "file", "");
    if (a.contains("generate")) c.acts_gen = parse_gen(a["generate"], "activations.generate", false);
    if (!c.acts_file.empty() && c.acts_gen) {
      throw ValidationError("activations: give either file or generate, not both");
    }
  }
  c.cost_model = get_str(j, "config", "cost_model", "");
  if (j.contains("out")) {
    const json& o = j["out"];
    check_keys(o, "out", {"matrix", "trace"});
    c.out_matrix = get_str(o, "out", "matrix", "");
    c.out_trace = get_str(o, "out", "trace", "");
  }
  return c;
}

engines::Weights quantize_dense(const Matrix& w, const QuantSpec& spec) {
  if (spec.method == "rtn") {
    return bcq::quantize_rtn(w, spec.q);
  }
  bcq::BcqSolveOptions opts;
  opts.iters = spec.iters;
  opts.use_offset = spec.offset;
  return bcq::quantize_bcq_alternating(w, spec.q, opts);
}

struct Materialized {
  engines::Weights weights;
  Matrix x;
  size_t m = 0;
  size_t n = 0;
  size_t batch = 0;
  int q = 0;
};

Materialized materialize(const RunConfig& c) {
  Materialized out;
  if (!c.weights_file.empty()) {
    out.weights = bcq::load_bcq(c.weights_file);
  } else if (c.weights_gen) {
    const GenSpec& g = *c.weights_gen;
    const Matrix dense = gen_matrix(g.seed, g.rows, g.cols, *g.format, g.dist);
    out.weights = quantize_dense(dense, c.quant);
  } else {
    throw ValidationError("config needs weights.file or weights.generate");
  }
  if (const auto* bq = std::get_if<bcq::BcqMatrix>(&out.weights)) {
    out.m = bq->rows;
    out.n = bq->cols;
    out.q = bq->q;
  } else {
    const auto& uq = std::get<bcq::UniformQuant>(out.weights);
    out.m = uq.rows;
    out.n = uq.cols;
    out.q = uq.q;
  }
  if (!c.acts_file.empty()) {
    out.x = load_matrix(c.acts_file);
  } else if (c.acts_gen) {
    GenSpec g = *c.acts_gen;
    if (g.rows == 0) g.rows = out.n;
    const FpFormat fmt = g.format ? *g.format : c.engine.act_format;
    out.x = gen_matrix(g.seed, g.rows, g.cols, fmt, g.dist);
  } else {
    throw ValidationError("config needs activations.file or activations.generate");
  }
  out.batch = out.x.cols();
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(IoErrorKind::open_failed, "cannot open for writing: " + path);
  os << text;
  if (!os) throw IoError(IoErrorKind::write_failed, "write failed: " + path);
}

// ---------------------------------------------------------------------------
// quantize

struct QuantizeArgs {
  std::string config_path;
  std::string in_path;
  std::string method;
  int q = 0;
  int iters = -1;
  std::optional<bool> offset;
  std::optional<uint64_t> seed;
  std::string out_path;
};

int cmd_quantize(const QuantizeArgs& args) {
  QuantSpec spec;
  Matrix dense;
  bool have_dense = false;
  if (!args.config_path.empty()) {
    const RunConfig c = parse_run_config(parse_json_file(args.config_path, "config"));
    spec = c.quant;
    if (c.weights_gen) {
      GenSpec g = *c.weights_gen;
      if (args.seed) g.seed = *args.seed;
      dense = gen_matrix(g.seed, g.rows, g.cols, *g.format, g.dist);
      have_dense = true;
    }
  }
  if (!args.in_path.empty()) {
    dense = load_matrix(args.in_path);
    have_dense = true;
  }
  if (!have_dense) {
    throw ValidationError("quantize needs --in or a config with weights.generate");
  }
  if (!args.method.empty()) spec.method = args.method;
  if (args.q != 0) spec.q = args.q;
  if (args.iters >= 0) spec.iters = args.iters;
  if (args.offset) spec.offset = *args.offset;

  const engines::Weights w = quantize_dense(dense, spec);
  const bcq::BcqMatrix stored = std::holds_alternative<bcq::BcqMatrix>(w)
                                    ? std::get<bcq::BcqMatrix>(w)
                                    : bcq::uniform_to_bcq(std::get<bcq::UniformQuant>(w));
  if (!args.out_path.empty()) bcq::save_bcq(stored, args.out_path);

  const Matrix recon = bcq::dequantize(stored);
  json report;
  report["rows"] = stored.rows;
  report["cols"] = stored.cols;
  report["q"] = stored.q;
  report["method"] = spec.method;
  double max_abs = 0.0;
  double sum_abs = 0.0;
  std::vector<double> row_max(stored.rows, 0.0);
  std::vector<double> row_mean(stored.rows, 0.0);
  for (size_t r = 0; r < stored.rows; ++r) {
    double rsum = 0.0;
    for (size_t c = 0; c < stored.cols; ++c) {
      const double e = std::abs(recon(r, c) - dense(r, c));
      row_max[r] = std::max(row_max[r], e);
      rsum += e;
    }
    row_mean[r] = rsum / static_cast<double>(stored.cols);
    max_abs = std::max(max_abs, row_max[r]);
    sum_abs += rsum;
  }
  report["max_abs_error"] = max_abs;
  report["mean_abs_error"] = sum_abs / (static_cast<double>(stored.rows) * stored.cols);
  report["row_max_abs_error"] = row_max;
  report["row_mean_abs_error"] = row_mean;
  std::cout << report.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gemm

struct GemmArgs {
  std::string config_path;
  std::string engine;
  int q = 0;
  int mu = 0;
  int k = 0;
  std::optional<uint64_t> seed;
  std::string cost_model;
  std::string out_path;
};

void apply_overrides(RunConfig& c, const std::string& engine, int q, int mu, int k,
                     const std::optional<uint64_t>& seed, const std::string& cost_model) {
  if (!engine.empty()) c.engine.kind = engines::engine_from_name(engine);
  if (q != 0) c.quant.q = q;
  if (mu != 0) c.engine.mu = mu;
  if (k != 0) c.engine.k = k;
  if (seed) {
    if (c.weights_gen) c.weights_gen->seed = *seed;
    if (c.acts_gen) c.acts_gen->seed = *seed + 1;
  }
  if (!cost_model.empty()) c.cost_model = cost_model;
}

int cmd_gemm(const GemmArgs& args) {
  if (args.config_path.empty()) throw ValidationError("gemm needs --config");
  RunConfig c = parse_run_config(parse_json_file(args.config_path, "config"));
  apply_overrides(c, args.engine, args.q, args.mu, args.k, args.seed, args.cost_model);
  if (!args.out_path.empty()) c.out_matrix = args.out_path;

  const Materialized mat = materialize(c);
  const engines::GemmResult result = engines::gemm(c.engine, mat.weights, mat.x);
  engines::EngineConfig ref_cfg = c.engine;
  ref_cfg.kind = engines::EngineKind::reference;
  const engines::GemmResult ref = engines::gemm(ref_cfg, mat.weights, mat.x);

  json out;
  out["engine"] = engines::engine_name(result.config.kind);
  out["m"] = mat.m;
  out["n"] = mat.n;
  out["batch"] = mat.batch;
  out["q"] = mat.q;
  out["cycles"] = result.trace.cycles;
  out["rel_error_vs_reference"] = engines::rel_error(result.y, ref.y);
  if (!c.cost_model.empty()) {
    const perf::CostModel cm = perf::CostModel::load(c.cost_model);
    const perf::Metrics met = perf::metrics(result, cm, {mat.m, mat.n, mat.batch});
    out["energy"] = met.energy;
    out["tops"] = met.tops;
    out["tops_per_w"] = met.tops_per_w;
    out["tops_per_mm2"] = met.tops_per_mm2;
    out["area"] = met.area;
    const perf::PePowerModel pm{cm.p_lut0, cm.p_rac0, cm.beta};
    out["p_rac"] = pm.p_rac(result.config.k);
  }
  if (!c.out_matrix.empty()) save_matrix(result.y, c.out_matrix);
  if (!c.out_trace.empty()) write_text_file(c.out_trace, result.trace.to_json_text());
  std::cout << out.dump(2) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// verify

struct Check {
  std::string name;
  std::function<bool(std::string&)> fn;
};

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(std::abs(a), std::abs(b));
}

void lut_checks(std::vector<Check>& checks) {
  checks.push_back({"lut.full_table_mu3", [](std::string& msg) {
    const std::vector<double> x = {1.0, 8.0, 64.0};
    const lut::Fflut t = lut::build_fflut_naive(x, FpFormat::fp64);
    const double expected[8] = {-73, 55, -57, 71, -71, 57, -55, 73};
    for (uint32_t key = 0; key < 8; ++key) {
      const double got = lut::read_full(t, {3, key});
      if (got != expected[key]) {
        msg = "key " + std::to_string(key) + ": got " + format_g17(got) + ", want " +
              format_g17(expected[key]);
        return false;
      }
    }
    return true;
  }});

  checks.push_back({"lut.half_equals_full", [](std::string& msg) {
    Rng rng(7);
    for (int mu : {2, 3, 4}) {
      std::vector<double> chunk(mu);
      for (double& v : chunk) v = rng.next_uniform(-2.0, 2.0);
      const lut::Fflut full = lut::build_fflut_naive(chunk, FpFormat::fp32);
      const lut::HalfFflut half = lut::build_hfflut_generator(chunk, FpFormat::fp32);
      for (uint32_t key = 0; key < (1u << mu); ++key) {
        const double a = lut::read_full(full, {mu, key});
        const double b = lut::read_half(half, {mu, key});
        if (a != b) {
          msg = "mu " + std::to_string(mu) + " key " + std::to_string(key) + ": full " +
                format_g17(a) + ", half " + format_g17(b);
          return false;
        }
      }
    }
    return true;
  }});

  checks.push_back({"lut.generator_add_counts", [](std::string& msg) {
    const std::vector<double> chunk = {0.5, -1.25, 2.0, 0.125};
    lut::AddCount naive_full;
    lut::AddCount naive_half;
    lut::AddCount tree;
    lut::build_fflut_naive(chunk, FpFormat::fp64, &naive_full);
    lut::build_hfflut_naive(chunk, FpFormat::fp64, &naive_half);
    lut::build_hfflut_generator(chunk, FpFormat::fp64, &tree);
    if (naive_full.additions != 48 || naive_half.additions != 24 || tree.additions != 14 ||
        !tree.used_tree) {
      msg = "counts full/half/tree = " + std::to_string(naive_full.additions) + "/" +
            std::to_string(naive_half.additions) + "/" + std::to_string(tree.additions);
      return false;
    }
    const double reduction = 1.0 - 14.0 / 24.0;
    if (!(reduction > 0.416 && reduction < 0.417)) {
      msg = "reduction " + format_g17(reduction);
      return false;
    }
    if (lut::count_generator_adds(4, true, lut::BuildMethod::tree) != 14 ||
        lut::count_generator_adds(4, true, lut::BuildMethod::naive) != 24) {
      msg = "closed-form add counts disagree";
      return false;
    }
    return true;
  }});

  checks.push_back({"lut.tree_matches_naive", [](std::string& msg) {
    Rng rng(11);
    for (FpFormat fmt : {FpFormat::fp16, FpFormat::fp32, FpFormat::fp64}) {
      for (int rep = 0; rep < 16; ++rep) {
        std::vector<double> chunk(4);
        for (double& v : chunk) {
          v = round_to_format(rng.next_normal(0.0, 1.0), FpFormat::fp16);
        }
        const lut::HalfFflut a = lut::build_hfflut_naive(chunk, fmt);
        const lut::HalfFflut b = lut::build_hfflut_generator(chunk, fmt);
        for (size_t i = 0; i < a.entries.size(); ++i) {
          if (encode_bits(a.entries[i], FpFormat::fp64) !=
              encode_bits(b.entries[i], FpFormat::fp64)) {
            msg = "entry " + std::to_string(i) + " differs";
            return false;
          }
        }
      }
    }
    return true;
  }});
}

void rac_checks(std::vector<Check>& checks) {
  checks.push_back({"rac.read_count_formula", [](std::string& msg) {
    Rng rng(23);
    const size_t shapes[][3] = {{5, 12, 3}, {8, 16, 1}, {3, 7, 2}};
    for (const auto& s : shapes) {
      for (int q = 1; q <= 3; ++q) {
        for (int mu : {2, 4}) {
          const size_t m = s[0], n = s[1], batch = s[2];
          bcq::BcqMatrix w;
          w.rows = m;
          w.cols = n;
          w.q = q;
          w.planes.assign(q, bcq::BitMatrix(m, n));
          w.alphas.assign(q, std::vector<double>(m));
          w.offsets.assign(m, 0.0);
          for (int i = 0; i < q; ++i) {
            for (size_t r = 0; r < m; ++r) {
              w.alphas[i][r] = 0.25 + rng.next_unit();
              for (size_t c = 0; c < n; ++c) {
                w.planes[i].set(r, c, rng.next_u64() & 1);
              }
            }
          }
          const Matrix x =
              gen_matrix(rng.next_u64(), n, batch, FpFormat::fp16, {Dist::normal, 0.0, 1.0});
          engines::EngineConfig cfg;
          cfg.kind = engines::EngineKind::figlut_f;
          cfg.mu = mu;
          const auto result = engines::gemm(cfg, w, x);
          const uint64_t want =
              static_cast<uint64_t>(m) * batch * q * ((n + mu - 1) / mu);
          if (result.trace.rac_reads != want) {
            msg = "m=" + std::to_string(m) + " n=" + std::to_string(n) +
                  " b=" + std::to_string(batch) + " q=" + std::to_string(q) +
                  " mu=" + std::to_string(mu) + ": got " +
                  std::to_string(result.trace.rac_reads) + ", want " + std::to_string(want);
            return false;
          }
        }
      }
    }
    return true;
  }});
}

void bcq_checks(std::vector<Check>& checks) {
  checks.push_back({"bcq.rtn_example", [](std::string& msg) {
    const Matrix w(1, 4, FpFormat::fp64, {-3.0, -1.0, 1.0, 3.0});
    const bcq::UniformQuant u = bcq::quantize_rtn(w, 2);
    const int32_t want[4] = {0, 1, 2, 3};
    for (size_t c = 0; c < 4; ++c) {
      if (u.code(0, c) != want[c]) {
        msg = "code " + std::to_string(c) + " = " + std::to_string(u.code(0, c));
        return false;
      }
    }
    if (u.delta[0] != 2.0 || u.zero[0] != 1.5) {
      msg = "delta " + format_g17(u.delta[0]) + " zero " + format_g17(u.zero[0]);
      return false;
    }
    return true;
  }});

  checks.push_back({"bcq.uniform_embedding_exact", [](std::string& msg) {
    const double deltas[] = {0.75, 0.1, 3.0};
    const double zeros[] = {0.0, 1.5, 2.625, 7.0};
    for (int q = 2; q <= 4; ++q) {
      for (double delta : deltas) {
        for (double zero : zeros) {
          bcq::UniformQuant u;
          u.rows = 1;
          u.cols = size_t{1} << q;
          u.q = q;
          u.codes.resize(u.cols);
          for (size_t c = 0; c < u.cols; ++c) u.codes[c] = static_cast<int32_t>(c);
          u.delta = {delta};
          u.zero = {zero};
          const bcq::BcqMatrix b = bcq::uniform_to_bcq(u);
          const double range = delta * static_cast<double>((1 << q) - 1);
          const long double tol = 4.0L * std::numeric_limits<double>::epsilon() * range;
          for (size_t c = 0; c < u.cols; ++c) {
            long double lhs = b.offsets[0];
            for (int i = 0; i < q; ++i) {
              lhs += static_cast<long double>(b.alphas[i][0]) * b.sign(i, 0, c);
            }
            const long double rhs = static_cast<long double>(delta) *
                                    (static_cast<long double>(c) - zero);
            if (std::abs(static_cast<double>(lhs - rhs)) > tol) {
              msg = "q=" + std::to_string(q) + " code " + std::to_string(c) + ": lhs " +
                    format_g17(static_cast<double>(lhs)) + " rhs " +
                    format_g17(static_cast<double>(rhs));
              return false;
            }
          }
        }
      }
    }
    return true;
  }});

  checks.push_back({"bcq.gemv_matches_dense", [](std::string& msg) {
    const Matrix w = gen_matrix(31, 6, 40, FpFormat::fp32, {Dist::normal, 0.0, 1.0});
    const bcq::BcqMatrix b = bcq::quantize_bcq_alternating(w, 3);
    const Matrix dense = bcq::dequantize(b);
    Rng rng(32);
    std::vector<double> x(40);
    for (double& v : x) v = rng.next_normal(0.0, 1.0);
    const std::vector<double> got = bcq::bcq_gemv_reference(b, x);
    for (size_t r = 0; r < 6; ++r) {
      double want = 0.0;
      for (size_t c = 0; c < 40; ++c) want += dense(r, c) * x[c];
      if (!close_rel(got[r], want, 1e-12) && std::abs(got[r] - want) > 1e-12) {
        msg = "row " + std::to_string(r) + ": got " + format_g17(got[r]) + ", want " +
              format_g17(want);
        return false;
      }
    }
    return true;
  }});
}

void bank_checks(std::vector<Check>& checks) {
  checks.push_back({"bank.conflict_goldens", [](std::string& msg) {
    using perf::BankAccess;
    struct Golden {
      std::vector<std::vector<BankAccess>> cycles;
      int banks;
      uint64_t want;
    };
    const std::vector<Golden> goldens = {
        {{{{0, 1}, {1, 2}, {2, 3}, {3, 4}}}, 4, 1},
        {{{{0, 1}, {0, 2}, {0, 3}, {0, 4}}}, 4, 4},
        {{{{2, 9}, {2, 9}, {2, 9}, {2, 9}}}, 4, 1},
        {{{{0, 5}, {0, 5}, {0, 6}, {1, 1}}}, 2, 2},
        {{{}}, 8, 1},
        {{{{0, 1}, {0, 2}}, {{1, 7}, {1, 7}, {2, 0}}}, 4, 3},
    };
    for (size_t i = 0; i < goldens.size(); ++i) {
      const uint64_t got = perf::bank_conflict_cycles(goldens[i].cycles, goldens[i].banks);
      if (got != goldens[i].want) {
        msg = "golden " + std::to_string(i) + ": got " + std::to_string(got) + ", want " +
              std::to_string(goldens[i].want);
        return false;
      }
    }
    return true;
  }});
}

struct VerifyArgs {
  std::vector<std::string> suites;
  bool inject_fault = false;
};

int cmd_verify(const VerifyArgs& args) {
  const std::vector<std::string> all = {"lut", "rac", "bcq", "bank"};
  std::vector<std::string> suites = args.suites.empty() ? all : args.suites;
  for (const auto& s : suites) {
    if (std::find(all.begin(), all.end(), s) == all.end()) {
      throw ValidationError("unknown verify suite: " + s);
    }
  }
  std::vector<Check> checks;
  for (const auto& s : suites) {
    if (s == "lut") lut_checks(checks);
    if (s == "rac") rac_checks(checks);
    if (s == "bcq") bcq_checks(checks);
    if (s == "bank") bank_checks(checks);
  }
  if (args.inject_fault) lut::testing::set_hfflut_sign_fault(true);
  int failures = 0;
  for (const Check& check : checks) {
    std::string msg;
    bool ok = false;
    try {
      ok = check.fn(msg);
    } catch (const std::exception& e) {
      msg = e.what();
    }
    if (ok) {
      std::cout << "ok " << check.name << "\n";
    } else {
      std::cout << "FAIL " << check.name << (msg.empty() ? "" : " (" + msg + ")") << "\n";
      ++failures;
    }
  }
  if (args.inject_fault) lut::testing::set_hfflut_sign_fault(false);
  std::cout << (failures == 0 ? "verify passed" : "verify FAILED") << " ("
            << checks.size() - failures << "/" << checks.size() << " checks)\n";
  return failures == 0 ? 0 : 2;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepConfig {
  size_t m = 0, n = 0, batch = 0;
  uint64_t weight_seed = 1;
  uint64_t act_seed = 2;
  DistSpec weight_dist{Dist::normal, 0.0, 1.0};
  DistSpec act_dist{Dist::normal, 0.0, 1.0};
  FpFormat weight_format = FpFormat::fp32;
  std::vector<engines::EngineKind> engines_list;
  std::vector<int> q_values;
  std::vector<int> mu_values;
  std::vector<int> k_values;
  QuantSpec quant;
  engines::EngineConfig defaults;
  std::string cost_model;
};

SweepConfig parse_sweep_config(const json& j) {
  check_keys(j, "sweep",
             {"problem", "weight_seed", "act_seed", "weight_dist", "act_dist",
              "weight_format", "engines", "q_values", "mu_values", "k_values", "quantize",
              "engine", "cost_model"});
  SweepConfig c;
  if (!j.contains("problem")) throw ValidationError("sweep is missing required key: problem");
  const json& p = j["problem"];
  check_keys(p, "sweep.problem", {"m", "n", "batch"});
  c.m = static_cast<size_t>(get_int(p, "sweep.problem", "m", 0, true));
  c.n = static_cast<size_t>(get_int(p, "sweep.problem", "n", 0, true));
  c.batch = static_cast<size_t>(get_int(p, "sweep.problem", "batch", 0, true));
  c.weight_seed = static_cast<uint64_t>(get_int(j, "sweep", "weight_seed", 1));
  c.act_seed = static_cast<uint64_t>(get_int(j, "sweep", "act_seed", 2));
  if (j.contains("weight_dist")) c.weight_dist = parse_dist(j["weight_dist"], "sweep.weight_dist");
  if (j.contains("act_dist")) c.act_dist = parse_dist(j["act_dist"], "sweep.act_dist");
  if (j.contains("weight_format")) {
    c.weight_format = format_from_name(get_str(j, "sweep", "weight_format", "", true));
  }
  if (!j.contains("engines") || !j["engines"].is_array() || j["engines"].empty()) {
    throw ValidationError("sweep.engines must be a non-empty array");
  }
  for (const auto& e : j["engines"]) {
    if (!e.is_string()) throw ValidationError("sweep.engines entries must be strings");
    c.engines_list.push_back(engines::engine_from_name(e.get<std::string>()));
  }
  auto int_list = [&](const char* key, std::vector<int>& out, int fallback) {
    if (!j.contains(key)) {
      out = {fallback};
      return;
    }
    if (!j[key].is_array() || j[key].empty()) {
      throw ValidationError(std::string("sweep.") + key + " must be a non-empty array");
    }
    for (const auto& v : j[key]) {
      if (!v.is_number_integer() && !v.is_number_unsigned()) {
        throw ValidationError(std::string("sweep.") + key + " entries must be integers");
      }
      out.push_back(v.get<int>());
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  };
  int_list("q_values", c.q_values, 4);
  int_list("mu_values", c.mu_values, 4);
  int_list("k_values", c.k_values, 32);
  if (j.contains("quantize")) c.quant = parse_quant(j["quantize"], "sweep.quantize");
  if (j.contains("engine")) {
    c.defaults = parse_engine(j["engine"], "sweep.engine");
    if (j["engine"].contains("kind")) {
      throw ValidationError("sweep.engine must not set kind; use sweep.engines");
    }
  }
  c.cost_model = get_str(j, "sweep", "cost_model", "", true);
  return c;
}

int sweep_thread_count(size_t points) {
  int threads = 0;
  if (const char* env = std::getenv("FIGLUT_SIM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw ValidationError("FIGLUT_SIM_THREADS must be a positive integer");
    }
    threads = static_cast<int>(std::min(v, long{64}));
  } else {
    threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }
  return static_cast<int>(std::min<size_t>(threads, std::max<size_t>(points, 1)));
}

struct SweepArgs {
  std::string config_path;
  std::string cost_model;
  std::string out_path;
};

int cmd_sweep(const SweepArgs& args) {
  if (args.config_path.empty()) throw ValidationError("sweep needs --config");
  SweepConfig cfg = parse_sweep_config(parse_json_file(args.config_path, "sweep config"));
  if (!args.cost_model.empty()) cfg.cost_model = args.cost_model;
  const perf::CostModel cm = perf::CostModel::load(cfg.cost_model);
  const perf::PePowerModel pm{cm.p_lut0, cm.p_rac0, cm.beta};

  const Matrix dense =
      gen_matrix(cfg.weight_seed, cfg.m, cfg.n, cfg.weight_format, cfg.weight_dist);
  const Matrix x =
      gen_matrix(cfg.act_seed, cfg.n, cfg.batch, cfg.defaults.act_format, cfg.act_dist);

  struct PerQ {
    engines::Weights weights;
    Matrix yref;
  };
  std::vector<PerQ> per_q;
  per_q.reserve(cfg.q_values.size());
  for (int q : cfg.q_values) {
    QuantSpec spec = cfg.quant;
    spec.q = q;
    PerQ entry{quantize_dense(dense, spec), {}};
    engines::EngineConfig ref_cfg = cfg.defaults;
    ref_cfg.kind = engines::EngineKind::reference;
    entry.yref = engines::gemm(ref_cfg, entry.weights, x).y;
    per_q.push_back(std::move(entry));
  }

  struct Point {
    engines::EngineKind kind;
    size_t q_index;
    int mu;
    int k;
  };
  std::vector<Point> points;
  for (engines::EngineKind kind : cfg.engines_list) {
    for (size_t qi = 0; qi < cfg.q_values.size(); ++qi) {
      for (int mu : cfg.mu_values) {
        for (int k : cfg.k_values) {
          points.push_back({kind, qi, mu, k});
        }
      }
    }
  }

  std::vector<std::string> rows(points.size());
  std::vector<std::string> errors(points.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= points.size()) return;
      const Point& pt = points[i];
      try {
        engines::EngineConfig ec = cfg.defaults;
        ec.kind = pt.kind;
        ec.mu = pt.mu;
        ec.k = pt.k;
        const PerQ& ctx = per_q[pt.q_index];
        const engines::GemmResult result = engines::gemm(ec, ctx.weights, x);
        const perf::Metrics met = perf::metrics(result, cm, {cfg.m, cfg.n, cfg.batch});
        const double err = engines::rel_error(result.y, ctx.yref);
        rows[i] = csv_line({engines::engine_name(pt.kind),
                            std::to_string(cfg.q_values[pt.q_index]), std::to_string(pt.mu),
                            std::to_string(pt.k), std::to_string(result.trace.cycles),
                            format_g17(met.energy), format_g17(met.tops),
                            format_g17(met.tops_per_w), format_g17(met.tops_per_mm2),
                            format_g17(pm.p_rac(pt.k)), format_g17(err)});
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int nthreads = sweep_thread_count(points.size());
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (size_t i = 0; i < points.size(); ++i) {
    if (!errors[i].empty()) {
      throw ValidationError("sweep point " + std::to_string(i) + " failed: " + errors[i]);
    }
  }

  std::string out = csv_line({"engine", "q", "mu", "k", "cycles", "energy", "tops",
                              "tops_per_w", "tops_per_mm2", "p_rac", "max_rel_error"});
  for (const auto& row : rows) out += row;
  if (args.out_path.empty() || args.out_path == "-") {
    std::cout << out;
  } else {
    write_text_file(args.out_path, out);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string baseline = "engine=fpe";
  std::string out_path;
};

int cmd_report(const ReportArgs& args) {
  if (args.inputs.empty()) throw ValidationError("report needs at least one CSV input");
  Csv merged;
  for (const auto& path : args.inputs) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError(IoErrorKind::open_failed, "cannot open CSV: " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    Csv csv = parse_csv(ss.str());
    if (merged.header.empty()) {
      merged.header = csv.header;
    } else if (csv.header != merged.header) {
      throw ValidationError("CSV headers disagree: " + path);
    }
    for (auto& row : csv.rows) merged.rows.push_back(std::move(row));
  }

  const auto eq = args.baseline.find('=');
  if (eq == std::string::npos) {
    throw ValidationError("baseline selector must look like column=value");
  }
  const std::string sel_col = args.baseline.substr(0, eq);
  const std::string sel_val = args.baseline.substr(eq + 1);
  const auto col_it = std::find(merged.header.begin(), merged.header.end(), sel_col);
  if (col_it == merged.header.end()) {
    throw ValidationError("baseline column not in CSV header: " + sel_col);
  }
  const size_t sel_idx = static_cast<size_t>(col_it - merged.header.begin());
  const std::vector<std::string>* baseline = nullptr;
  for (const auto& row : merged.rows) {
    if (row[sel_idx] == sel_val) {
      baseline = &row;
      break;
    }
  }
  if (!baseline) {
    throw ValidationError("no row matches baseline selector " + args.baseline);
  }

  const std::vector<std::string> normalized_cols = {"cycles",      "energy",
                                                    "tops",        "tops_per_w",
                                                    "tops_per_mm2", "p_rac"};
  std::vector<int> mode(merged.header.size(), 0);  // 0 passthrough, 1 normalize
  std::vector<std::string> out_header = merged.header;
  for (size_t i = 0; i < merged.header.size(); ++i) {
    if (std::find(normalized_cols.begin(), normalized_cols.end(), merged.header[i]) !=
        normalized_cols.end()) {
      mode[i] = 1;
      out_header[i] += "_norm";
    }
  }

  auto as_number = [](const std::string& s, const std::string& ctx) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') {
      throw ValidationError("not a number in column " + ctx + ": " + s);
    }
    return v;
  };

  std::string out = csv_line(out_header);
  for (const auto& row : merged.rows) {
    std::vector<std::string> fields(row.size());
    for (size_t i = 0; i < row.size(); ++i) {
      if (mode[i] == 0) {
        fields[i] = row[i];
        continue;
      }
      const double base = as_number((*baseline)[i], merged.header[i]);
      if (base == 0.0) {
        throw ValidationError("baseline row has zero " + merged.header[i] +
                              "; cannot normalize");
      }
      fields[i] = format_g17(as_number(row[i], merged.header[i]) / base);
    }
    out += csv_line(fields);
  }
  if (args.out_path.empty() || args.out_path == "-") {
    std::cout << out;
  } else {
    write_text_file(args.out_path, out);
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Bit-accurate simulator and performance model for LUT-based FP-INT GEMM"};
  app.require_subcommand(1);

  QuantizeArgs qa;
  CLI::App* quantize = app.add_subcommand("quantize", "Quantize a dense matrix and save it");
  quantize->add_option("--config", qa.config_path, "Run config JSON");
  quantize->add_option("--in", qa.in_path, "Dense input matrix (FGLT)");
  quantize->add_option("--method", qa.method, "rtn or alternating")
      ->check(CLI::IsMember({"rtn", "alternating"}));
  quantize->add_option("--q", qa.q, "Quantization bits");
  quantize->add_option("--iters", qa.iters, "Alternating solver rounds");
  uint64_t qa_seed = 0;
  CLI::Option* qa_seed_opt = quantize->add_option("--seed", qa_seed, "Generator seed override");
  bool qa_offset = true;
  CLI::Option* qa_offset_opt =
      quantize->add_flag("--offset,!--no-offset", qa_offset, "Fit a per-row offset term");
  quantize->add_option("--out", qa.out_path, "Output path (FGBQ)");

  GemmArgs ga;
  CLI::App* gemm = app.add_subcommand("gemm", "Run one GEMM and print a JSON summary");
  gemm->add_option("--config", ga.config_path, "Run config JSON")->required();
  gemm->add_option("--engine", ga.engine, "Engine kind override");
  gemm->add_option("--q", ga.q, "Quantization bits override");
  gemm->add_option("--mu", ga.mu, "LUT chunk width override");
  gemm->add_option("--k", ga.k, "RACs per LUT override");
  uint64_t ga_seed = 0;
  CLI::Option* ga_seed_opt = gemm->add_option("--seed", ga_seed, "Generator seed override");
  gemm->add_option("--cost-model", ga.cost_model, "Cost model JSON override");
  gemm->add_option("--out", ga.out_path, "Output matrix path (FGLT)");

  VerifyArgs va;
  CLI::App* verify = app.add_subcommand("verify", "Run the self-check suites");
  verify->add_option("--suite", va.suites, "Suites to run (lut, rac, bcq, bank)");
  verify->add_flag("--inject-fault", va.inject_fault,
                   "Arm the LUT sign fault; the symmetry suite must then fail")
      ->group("");

  SweepArgs sa;
  CLI::App* sweep = app.add_subcommand("sweep", "Run a config grid and write a CSV");
  sweep->add_option("--config", sa.config_path, "Sweep config JSON")->required();
  sweep->add_option("--cost-model", sa.cost_model, "Cost model JSON override");
  sweep->add_option("--out", sa.out_path, "Output CSV path (- for stdout)");

  ReportArgs ra;
  CLI::App* report = app.add_subcommand("report", "Merge sweep CSVs and normalize to a baseline");
  report->add_option("inputs", ra.inputs, "Input CSV files")->required();
  report->add_option("--baseline", ra.baseline, "Baseline row selector, column=value");
  report->add_option("--out", ra.out_path, "Output CSV path (- for stdout)");

  try {
    std::vector<std::string> args_vec(argv + 1, argv + argc);
    std::reverse(args_vec.begin(), args_vec.end());
    app.parse(args_vec);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (quantize->parsed()) {
      if (*qa_seed_opt) qa.seed = qa_seed;
      if (*qa_offset_opt) qa.offset = qa_offset;
      return cmd_quantize(qa);
    }
    if (gemm->parsed()) {
      if (*ga_seed_opt) ga.seed = ga_seed;
      return cmd_gemm(ga);
    }
    if (verify->parsed()) return cmd_verify(va);
    if (sweep->parsed()) return cmd_sweep(sa);
    if (report->parsed()) return cmd_report(ra);
    throw ValidationError("no subcommand given");
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace figlut::cli
