// Copyright 2026 the figlut-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "figlut/perf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "figlut/engines.hpp"
#include "figlut/errors.hpp"
#include "figlut/lut.hpp"
#include "json.hpp"

namespace figlut::perf {

namespace {

using CounterField = std::pair<const char*, uint64_t EventTrace::*>;

const std::vector<CounterField>& counter_fields() {
  static const std::vector<CounterField> fields = {
      {"lut_builds", &EventTrace::lut_builds},
      {"lut_gen_adds", &EventTrace::lut_gen_adds},
      {"rac_reads", &EventTrace::rac_reads},
      {"fp_adds", &EventTrace::fp_adds},
      {"fp_muls", &EventTrace::fp_muls},
      {"int_adds", &EventTrace::int_adds},
      {"int_muls", &EventTrace::int_muls},
      {"dequant_ops", &EventTrace::dequant_ops},
      {"align_ops", &EventTrace::align_ops},
      {"weight_dram_bytes", &EventTrace::weight_dram_bytes},
      {"act_sram_reads", &EventTrace::act_sram_reads},
      {"psum_sram_accesses", &EventTrace::psum_sram_accesses},
      {"cycles", &EventTrace::cycles},
  };
  return fields;
}

}  // namespace

const std::vector<std::string>& EventTrace::counter_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [name, member] : counter_fields()) v.emplace_back(name);
    return v;
  }();
  return names;
}

uint64_t EventTrace::get(const std::string& name) const {
  for (const auto& [field, member] : counter_fields()) {
    if (name == field) return this->*member;
  }
  throw ValidationError("unknown trace counter: " + name);
}

void EventTrace::set(const std::string& name, uint64_t value) {
  for (const auto& [field, member] : counter_fields()) {
    if (name == field) {
      this->*member = value;
      return;
    }
  }
  throw ValidationError("unknown trace counter: " + name);
}

EventTrace& EventTrace::operator+=(const EventTrace& other) {
  for (const auto& [name, member] : counter_fields()) this->*member += other.*member;
  return *this;
}

bool operator==(const EventTrace& a, const EventTrace& b) {
  for (const auto& [name, member] : counter_fields()) {
    if (a.*member != b.*member) return false;
  }
  return true;
}

std::string EventTrace::to_json_text() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, member] : counter_fields()) j[name] = this->*member;
  return j.dump(2) + "\n";
}

EventTrace EventTrace::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(IoErrorKind::malformed, std::string("trace is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("trace JSON must be an object");
  EventTrace t;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number_unsigned()) {
      throw ValidationError("trace counter must be a nonnegative integer: " + key);
    }
    t.set(key, value.get<uint64_t>());  // throws on unknown counter names
  }
  return t;
}

const std::vector<std::string>& CostModel::resource_names() {
  static const std::vector<std::string> names = {
      "fp_adder", "fp_mul", "int_adder", "int_mul", "lut_bit", "rac", "generator_adder",
  };
  return names;
}

CostModel CostModel::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(IoErrorKind::malformed,
                  std::string("cost model is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("cost model must be a JSON object");
  CostModel cm;
  for (const auto& [key, value] : j.items()) {
    if (key == "energy_per_event") {
      if (!value.is_object()) throw ValidationError("energy_per_event must be an object");
      const auto& known = EventTrace::counter_names();
      for (const auto& [name, cost] : value.items()) {
        if (std::find(known.begin(), known.end(), name) == known.end()) {
          throw ValidationError("unknown counter name in energy_per_event: " + name);
        }
        if (!cost.is_number()) throw ValidationError("energy cost must be a number: " + name);
        const double c = cost.get<double>();
        if (!(std::isfinite(c) && c >= 0.0)) {
          throw ValidationError("energy cost must be finite and nonnegative: " + name);
        }
        cm.energy_per_event[name] = c;
      }
    } else if (key == "area_per_resource") {
      if (!value.is_object()) throw ValidationError("area_per_resource must be an object");
      const auto& known = resource_names();
      for (const auto& [name, cost] : value.items()) {
        if (std::find(known.begin(), known.end(), name) == known.end()) {
          throw ValidationError("unknown resource name in area_per_resource: " + name);
        }
        if (!cost.is_number()) throw ValidationError("area cost must be a number: " + name);
        const double c = cost.get<double>();
        if (!(std::isfinite(c) && c >= 0.0)) {
          throw ValidationError("area cost must be finite and nonnegative: " + name);
        }
        cm.area_per_resource[name] = c;
      }
    } else if (key == "beta") {
      cm.beta = value.get<double>();
      if (!(std::isfinite(cm.beta) && cm.beta >= 0.0)) {
        throw ValidationError("beta must be finite and nonnegative");
      }
    } else if (key == "frequency_hz") {
      cm.frequency_hz = value.get<double>();
      if (!(std::isfinite(cm.frequency_hz) && cm.frequency_hz > 0.0)) {
        throw ValidationError("frequency_hz must be positive");
      }
    } else if (key == "p_lut0") {
      cm.p_lut0 = value.get<double>();
      if (!(std::isfinite(cm.p_lut0) && cm.p_lut0 > 0.0)) {
        throw ValidationError("p_lut0 must be positive");
      }
    } else if (key == "p_rac0") {
      cm.p_rac0 = value.get<double>();
      if (!(std::isfinite(cm.p_rac0) && cm.p_rac0 >= 0.0)) {
        throw ValidationError("p_rac0 must be nonnegative");
      }
    } else {
      throw ValidationError("unknown key in cost model: " + key);
    }
  }
  return cm;
}

CostModel CostModel::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError(IoErrorKind::open_failed, "cannot open cost model: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return from_json_text(ss.str());
}

double energy(const EventTrace& trace, const CostModel& cm) {
  double total = 0.0;
  for (const auto& name : EventTrace::counter_names()) {
    const auto it = cm.energy_per_event.find(name);
    if (it == cm.energy_per_event.end()) {
      throw ValidationError("cost model has no energy entry for counter: " + name);
    }
    total += static_cast<double>(trace.get(name)) * it->second;
  }
  return total;
}

double PePowerModel::p_lut(int k) const {
  if (k < 1) throw ValidationError("k must be at least 1");
  const double f = static_cast<double>(k - 1);
  return p_lut0 * (1.0 + beta * f * f);
}

double PePowerModel::p_pe(int k) const { return p_lut(k) + static_cast<double>(k) * p_rac0; }

double PePowerModel::p_rac(int k) const { return p_pe(k) / static_cast<double>(k); }

PePowerCurve pe_power_curve(const PePowerModel& model, int k_min, int k_max) {
  if (k_min < 1 || k_max < k_min) throw ValidationError("invalid k range");
  PePowerCurve curve;
  curve.points.reserve(static_cast<size_t>(k_max - k_min + 1));
  double best = std::numeric_limits<double>::infinity();
  for (int k = k_min; k <= k_max; ++k) {
    const PePowerPoint p{k, model.p_pe(k), model.p_rac(k)};
    curve.points.push_back(p);
    if (p.p_rac < best) {
      best = p.p_rac;
      curve.argmin_k = k;
    }
  }
  return curve;
}

namespace {

uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

}  // namespace

uint64_t cycle_count(size_t m, size_t n, size_t batch, int eff_q, size_t tile_m,
                     size_t tile_n, int pe_rows, int pe_cols) {
  if (m == 0 || n == 0 || batch == 0) throw ValidationError("cycle model needs positive dims");
  if (eff_q < 1 || tile_m == 0 || tile_n == 0 || pe_rows < 1 || pe_cols < 1) {
    throw ValidationError("cycle model needs positive tiling parameters");
  }
  const uint64_t fill = static_cast<uint64_t>(pe_rows) + static_cast<uint64_t>(pe_cols) - 1;
  return ceil_div(m, tile_m) * ceil_div(n, tile_n) * static_cast<uint64_t>(eff_q) *
         (static_cast<uint64_t>(batch) + fill);
}

uint64_t lut_count_scaling(uint64_t total_racs, int k) {
  if (k < 1) throw ValidationError("k must be at least 1");
  return ceil_div(total_racs, static_cast<uint64_t>(k));
}

uint64_t bank_conflict_cycles(const std::vector<std::vector<BankAccess>>& cycles,
                              int num_banks) {
  if (num_banks < 1) throw ValidationError("bank count must be positive");
  uint64_t total = 0;
  std::vector<std::vector<uint64_t>> per_bank(static_cast<size_t>(num_banks));
  for (const auto& cycle : cycles) {
    for (auto& v : per_bank) v.clear();
    for (const BankAccess& a : cycle) {
      if (a.bank < 0 || a.bank >= num_banks) {
        throw ValidationError("bank index out of range");
      }
      per_bank[static_cast<size_t>(a.bank)].push_back(a.addr);
    }
    uint64_t cost = 1;
    for (auto& addrs : per_bank) {
      std::sort(addrs.begin(), addrs.end());
      const auto distinct = static_cast<uint64_t>(
          std::unique(addrs.begin(), addrs.end()) - addrs.begin());
      cost = std::max(cost, distinct);
    }
    total += cost;
  }
  return total;
}

namespace {

double resource_area(const CostModel& cm, const std::string& name) {
  const auto it = cm.area_per_resource.find(name);
  if (it == cm.area_per_resource.end()) {
    throw ValidationError("cost model has no area entry for resource: " + name);
  }
  return it->second;
}

}  // namespace

double area_estimate(const engines::EngineConfig& cfg, const CostModel& cm) {
  using engines::EngineKind;
  const double pes = static_cast<double>(cfg.pe_rows) * static_cast<double>(cfg.pe_cols);
  switch (cfg.kind) {
    case EngineKind::reference:
    case EngineKind::fpe:
      return pes * (resource_area(cm, "fp_adder") + resource_area(cm, "fp_mul"));
    case EngineKind::figna:
      return pes * (resource_area(cm, "int_adder") + resource_area(cm, "int_mul"));
    case EngineKind::ifpu:
      return pes * resource_area(cm, "int_adder");
    case EngineKind::figlut_f:
    case EngineKind::figlut_i: {
      const int entry_bits = cfg.kind == EngineKind::figlut_f
                                 ? 1 + exponent_bits(cfg.lut_value_format()) +
                                       mantissa_bits(cfg.lut_value_format())
                                 : cfg.align_width;
      const double table_bits =
          static_cast<double>(uint64_t{1} << (cfg.mu - 1)) * entry_bits;
      const double generators = static_cast<double>(cfg.pe_cols);
      const double gen_adders = static_cast<double>(
          lut::count_generator_adds(cfg.mu, true, lut::BuildMethod::tree));
      return pes * (table_bits * resource_area(cm, "lut_bit") +
                    static_cast<double>(cfg.k) * resource_area(cm, "rac")) +
             generators * gen_adders * resource_area(cm, "generator_adder");
    }
  }
  throw ValidationError("unknown engine kind");
}

Metrics metrics(const engines::GemmResult& result, const CostModel& cm,
                const ProblemDims& dims) {
  if (dims.m == 0 || dims.n == 0 || dims.batch == 0) {
    throw ValidationError("metrics needs positive problem dims");
  }
  if (result.trace.cycles == 0) throw ValidationError("metrics needs a nonzero cycle count");
  Metrics out;
  out.ops = 2.0 * static_cast<double>(dims.m) * static_cast<double>(dims.n) *
            static_cast<double>(dims.batch);
  out.seconds = static_cast<double>(result.trace.cycles) / cm.frequency_hz;
  out.energy = energy(result.trace, cm);
  out.area = area_estimate(result.config, cm);
  out.tops = out.ops / out.seconds / 1e12;
  out.tops_per_w = out.ops / out.energy;  // TOPS/W == ops/pJ
  out.tops_per_mm2 = out.tops / out.area;
  return out;
}

uint64_t dense_weight_bytes(size_t m, size_t n, FpFormat fmt) {
  return static_cast<uint64_t>(m) * n * static_cast<uint64_t>(storage_bytes(fmt));
}

uint64_t bcq_weight_bytes(size_t m, size_t n, int q) {
  const uint64_t plane = static_cast<uint64_t>(m) * ceil_div(n, 8);
  return static_cast<uint64_t>(q) * plane + 4ull * (static_cast<uint64_t>(q) * m + m);
}

uint64_t uniform_weight_bytes(size_t m, size_t n, int q) {
  return static_cast<uint64_t>(m) * ceil_div(static_cast<uint64_t>(n) * q, 8) + 8ull * m;
}

}  // namespace figlut::perf
