// Copyright 2026 the figlut-sim authors
// SPDX-License-Identifier: Apache-2.0

#include "figlut/perf.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "figlut/engines.hpp"
#include "figlut/errors.hpp"

namespace figlut::perf {
namespace {

CostModel flat_cost_model(double energy_cost) {
  CostModel cm;
  for (const std::string& name : EventTrace::counter_names()) {
    cm.energy_per_event[name] = energy_cost;
  }
  for (const std::string& name : CostModel::resource_names()) {
    cm.area_per_resource[name] = 1.0;
  }
  cm.beta = 1.0 / 1023.0;
  return cm;
}

TEST(EventTraceTest, JsonRoundTripAndNamedAccess) {
  EventTrace t;
  t.rac_reads = 10;
  t.cycles = 7;
  t.weight_dram_bytes = 1u << 20;
  const std::string text = t.to_json_text();
  const EventTrace back = EventTrace::from_json_text(text);
  EXPECT_TRUE(back == t);
  EXPECT_EQ(back.get("rac_reads"), 10u);
  EXPECT_EQ(back.get("fp_adds"), 0u);
  EXPECT_EQ(EventTrace::counter_names().size(), 13u);

  EventTrace named;
  named.set("int_muls", 3);
  EXPECT_EQ(named.int_muls, 3u);
  EXPECT_THROW(named.set("warp_drive", 1), ValidationError);
  EXPECT_THROW(named.get("warp_drive"), ValidationError);
}

TEST(EventTraceTest, ParserRejectsDamagedInput) {
  EXPECT_THROW(EventTrace::from_json_text("not json"), IoError);
  EXPECT_THROW(EventTrace::from_json_text(R"({"rac_reads": -1})"), ValidationError);
  EXPECT_THROW(EventTrace::from_json_text(R"({"rac_reads": 1.5})"), ValidationError);
  EXPECT_THROW(EventTrace::from_json_text(R"({"warp_drive": 1})"), ValidationError);
}

TEST(EventTraceTest, MergeAddsFieldwiseAndEnergyIsLinear) {
  EventTrace a;
  a.rac_reads = 5;
  a.cycles = 2;
  EventTrace b;
  b.rac_reads = 7;
  b.fp_adds = 3;
  EventTrace sum = a;
  sum += b;
  EXPECT_EQ(sum.rac_reads, 12u);
  EXPECT_EQ(sum.cycles, 2u);
  EXPECT_EQ(sum.fp_adds, 3u);
  const CostModel cm = flat_cost_model(0.5);
  EXPECT_DOUBLE_EQ(energy(sum, cm), energy(a, cm) + energy(b, cm));
}

TEST(Energy, WeighsEveryCounterAndDemandsCompleteness) {
  EventTrace t;
  t.rac_reads = 10;
  CostModel cm = flat_cost_model(0.0);
  cm.energy_per_event["rac_reads"] = 2.0;
  EXPECT_DOUBLE_EQ(energy(t, cm), 20.0);
  cm.energy_per_event.erase("cycles");
  EXPECT_THROW(energy(t, cm), ValidationError);
}

TEST(CostModelTest, ParsesCompleteDescriptions) {
  CostModel base = flat_cost_model(1.0);
  std::string text = "{\"energy_per_event\":{";
  bool first = true;
  for (const std::string& name : EventTrace::counter_names()) {
    if (!first) text += ",";
    first = false;
    text += "\"" + name + "\":0.25";
  }
  text += "},\"area_per_resource\":{";
  first = true;
  for (const std::string& name : CostModel::resource_names()) {
    if (!first) text += ",";
    first = false;
    text += "\"" + name + "\":0.5";
  }
  text += "},\"beta\":0.001,\"frequency_hz\":5e8,\"p_lut0\":4.0,\"p_rac0\":2.0}";
  const CostModel cm = CostModel::from_json_text(text);
  EXPECT_DOUBLE_EQ(cm.energy_per_event.at("rac_reads"), 0.25);
  EXPECT_DOUBLE_EQ(cm.area_per_resource.at("rac"), 0.5);
  EXPECT_DOUBLE_EQ(cm.beta, 0.001);
  EXPECT_DOUBLE_EQ(cm.frequency_hz, 5e8);
  EXPECT_DOUBLE_EQ(cm.p_lut0, 4.0);
  EXPECT_DOUBLE_EQ(cm.p_rac0, 2.0);

  EXPECT_THROW(CostModel::from_json_text("{]"), IoError);
  EXPECT_THROW(CostModel::from_json_text(R"({"beta": 0.1, "mystery": 1})"),
               ValidationError);
  EXPECT_THROW(
      CostModel::from_json_text(R"({"energy_per_event": {"rac_reads": -1.0}})"),
      ValidationError);
  EXPECT_THROW(CostModel::from_json_text(R"({"beta": -0.5})"), ValidationError);
  EXPECT_THROW(CostModel::from_json_text(R"({"frequency_hz": 0})"), ValidationError);
  EXPECT_THROW(CostModel::from_json_text(R"({"p_lut0": 0})"), ValidationError);
}

TEST(PePower, ZeroFanOutCoefficientPushesSharingToTheLimit) {
  PePowerModel m;
  m.beta = 0.0;
  const PePowerCurve curve = pe_power_curve(m, 1, 256);
  ASSERT_EQ(curve.points.size(), 256u);
  for (size_t i = 1; i < curve.points.size(); ++i) {
    EXPECT_LT(curve.points[i].p_rac, curve.points[i - 1].p_rac);
  }
  EXPECT_EQ(curve.argmin_k, 256);
}

TEST(PePower, CalibratedCoefficientHasInteriorMinimum) {
  PePowerModel m;
  m.p_lut0 = 8.0;
  m.p_rac0 = 1.0;
  m.beta = 1.0 / 1023.0;
  // Continuous minimum at sqrt(1/beta + 1) = sqrt(1024) = 32, an integer.
  const PePowerCurve curve = pe_power_curve(m);
  EXPECT_EQ(curve.argmin_k, 32);
  EXPECT_GT(m.p_rac(31), m.p_rac(32));
  EXPECT_GT(m.p_rac(33), m.p_rac(32));
  EXPECT_DOUBLE_EQ(m.p_lut(1), m.p_lut0);
  EXPECT_DOUBLE_EQ(m.p_pe(1), m.p_lut0 + m.p_rac0);
  for (int k = 2; k <= 256; ++k) {
    EXPECT_GT(m.p_pe(k), m.p_pe(k - 1)) << "k=" << k;
  }
  EXPECT_THROW(pe_power_curve(m, 0, 16), ValidationError);
  EXPECT_THROW(pe_power_curve(m, 8, 4), ValidationError);
}

TEST(CycleModel, BitPlanePassesScaleLinearly) {
  const size_t m = 256, n = 256, batch = 512;
  const uint64_t q2 = cycle_count(m, n, batch, 2, 128, 128, 8, 4);
  const uint64_t q3 = cycle_count(m, n, batch, 3, 128, 128, 8, 4);
  const uint64_t q4 = cycle_count(m, n, batch, 4, 128, 128, 8, 4);
  const uint64_t q8 = cycle_count(m, n, batch, 8, 128, 128, 8, 4);
  EXPECT_EQ(q4 % q2, 0u);
  EXPECT_EQ(q4 / q2, 2u);
  EXPECT_EQ(q2 * 3, q3 * 2);
  EXPECT_EQ(q8, 2 * q4);
  const double ratio = static_cast<double>(q8) / static_cast<double>(q4);
  EXPECT_GE(ratio, 1.99);
  EXPECT_LE(ratio, 2.01);

  EXPECT_EQ(cycle_count(4, 8, 1, 1, 4, 8, 8, 4), 12u);
  EXPECT_EQ(cycle_count(33, 40, 9, 3, 16, 12, 8, 4), 3u * 4 * 3 * 20);
  EXPECT_THROW(cycle_count(0, 8, 1, 1, 4, 8, 8, 4), ValidationError);
  EXPECT_THROW(cycle_count(4, 8, 1, 0, 4, 8, 8, 4), ValidationError);
  EXPECT_THROW(cycle_count(4, 8, 1, 1, 0, 8, 8, 4), ValidationError);
}

TEST(LutScaling, SharedTablesDivideByFanOut) {
  EXPECT_EQ(lut_count_scaling(4096, 32), 128u);
  EXPECT_EQ(lut_count_scaling(4096, 1), 4096u);
  EXPECT_EQ(lut_count_scaling(4096, 64), 64u);
  EXPECT_EQ(lut_count_scaling(100, 64), 2u);  // ceil(100 / 64)
  EXPECT_EQ(lut_count_scaling(0, 8), 0u);
  EXPECT_THROW(lut_count_scaling(16, 0), ValidationError);
}

TEST(BankConflicts, CountsDistinctAddressesPerBank) {
  // Four accesses spread across four banks: one cycle.
  EXPECT_EQ(bank_conflict_cycles({{{0, 0}, {1, 4}, {2, 8}, {3, 12}}}, 4), 1u);
  // Four distinct addresses in one bank serialize.
  EXPECT_EQ(bank_conflict_cycles({{{2, 0}, {2, 1}, {2, 2}, {2, 3}}}, 4), 4u);
  // Identical addresses broadcast.
  EXPECT_EQ(bank_conflict_cycles({{{1, 9}, {1, 9}, {1, 9}, {1, 9}}}, 4), 1u);
  // An issue cycle with no requests still takes a cycle.
  EXPECT_EQ(bank_conflict_cycles({{}}, 4), 1u);
  // Costs add across issue cycles.
  EXPECT_EQ(bank_conflict_cycles({{{0, 0}, {0, 1}}, {{3, 5}}}, 4), 3u);
  EXPECT_EQ(bank_conflict_cycles({}, 4), 0u);
  EXPECT_THROW(bank_conflict_cycles({{{4, 0}}}, 4), ValidationError);
  EXPECT_THROW(bank_conflict_cycles({{{-1, 0}}}, 4), ValidationError);
  EXPECT_THROW(bank_conflict_cycles({}, 0), ValidationError);
}

TEST(MetricsTest, DerivesRatesFromTraceAndCostModel) {
  engines::GemmResult result;
  result.y = Matrix::zeros(2, 2, FpFormat::fp32);
  result.trace.cycles = 1000;
  result.trace.rac_reads = 50;
  result.config.kind = engines::EngineKind::figlut_f;
  result.config = result.config.normalized(2, 8, 2);
  CostModel cm = flat_cost_model(0.0);
  cm.energy_per_event["rac_reads"] = 2.0;  // 100 pJ total
  cm.frequency_hz = 1e8;
  const Metrics got = metrics(result, cm, {2, 8, 2});
  EXPECT_DOUBLE_EQ(got.ops, 2.0 * 2 * 8 * 2);
  EXPECT_DOUBLE_EQ(got.seconds, 1000 / 1e8);
  EXPECT_DOUBLE_EQ(got.energy, 100.0);
  EXPECT_DOUBLE_EQ(got.tops, got.ops / got.seconds / 1e12);
  EXPECT_DOUBLE_EQ(got.tops_per_w, got.ops / got.energy);
  EXPECT_GT(got.area, 0.0);
  EXPECT_DOUBLE_EQ(got.tops_per_mm2, got.tops / got.area);

  engines::GemmResult idle = result;
  idle.trace.cycles = 0;
  EXPECT_THROW(metrics(idle, cm, {2, 8, 2}), ValidationError);
}

TEST(WeightBytes, ClosedFormsMatchHandTotals) {
  EXPECT_EQ(dense_weight_bytes(1024, 1024, FpFormat::fp16), 2097152u);
  EXPECT_EQ(dense_weight_bytes(3, 5, FpFormat::fp32), 60u);
  EXPECT_EQ(bcq_weight_bytes(8, 32, 3), 224u);
  EXPECT_EQ(uniform_weight_bytes(8, 32, 3), 160u);
  EXPECT_EQ(bcq_weight_bytes(1024, 1024, 4), 544768u);
  const double ratio = static_cast<double>(bcq_weight_bytes(1024, 1024, 4)) /
                       static_cast<double>(dense_weight_bytes(1024, 1024, FpFormat::fp16));
  EXPECT_DOUBLE_EQ(ratio, 0.259765625);
}

TEST(AreaEstimate, PricesTheResourceCensusPerEngine) {
  CostModel cm;
  cm.area_per_resource = {{"fp_adder", 1.0}, {"fp_mul", 10.0},  {"int_adder", 100.0},
                          {"int_mul", 1e3},  {"lut_bit", 1e-3}, {"rac", 0.5},
                          {"generator_adder", 2.0}};
  auto cfg_for = [](engines::EngineKind kind) {
    engines::EngineConfig cfg;
    cfg.kind = kind;
    cfg.pe_rows = 2;
    cfg.pe_cols = 3;
    cfg.mu = 4;
    cfg.k = 8;
    cfg.align_width = 24;
    return cfg.normalized(16, 16, 4);
  };
  const int pes = 2 * 3;
  EXPECT_DOUBLE_EQ(area_estimate(cfg_for(engines::EngineKind::fpe), cm), pes * 11.0);
  EXPECT_DOUBLE_EQ(area_estimate(cfg_for(engines::EngineKind::reference), cm), pes * 11.0);
  EXPECT_DOUBLE_EQ(area_estimate(cfg_for(engines::EngineKind::ifpu), cm), pes * 100.0);
  EXPECT_DOUBLE_EQ(area_estimate(cfg_for(engines::EngineKind::figna), cm), pes * 1100.0);

  // FP LUT: 8 entries of 1 + 8 + 7 bits (fp16 table) plus k RACs per PE, plus
  // one generator adder tree of 14 adds per PE column.
  engines::EngineConfig lut_cfg = cfg_for(engines::EngineKind::figlut_f);
  lut_cfg.lut_format = FpFormat::fp16;
  const double lut_bits = 8 * (1 + 5 + 10) * 1e-3;
  const double racs = 8 * 0.5;
  const double generators = 3 * 14 * 2.0;
  EXPECT_DOUBLE_EQ(area_estimate(lut_cfg, cm), pes * (lut_bits + racs) + generators);

  engines::EngineConfig int_cfg = cfg_for(engines::EngineKind::figlut_i);
  const double int_bits = 8 * 24 * 1e-3;
  EXPECT_DOUBLE_EQ(area_estimate(int_cfg, cm), pes * (int_bits + racs) + generators);

  cm.area_per_resource.erase("rac");
  EXPECT_THROW(area_estimate(int_cfg, cm), ValidationError);
}

}  // namespace
}  // namespace figlut::perf
