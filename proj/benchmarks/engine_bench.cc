// Copyright 2026 the figlut-sim authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "figlut/bcq.hpp"
#include "figlut/engines.hpp"
#include "figlut/numerics.hpp"

namespace {

using figlut::Dist;
using figlut::FpFormat;
using figlut::Matrix;

struct BenchProblem {
  figlut::bcq::UniformQuant weights;
  Matrix x;
};

BenchProblem bench_problem(size_t m, size_t n, size_t batch, int q) {
  const Matrix w = figlut::gen_matrix(11, m, n, FpFormat::fp32, {Dist::normal, 0.0, 1.0});
  return {figlut::bcq::quantize_rtn(w, q),
          figlut::gen_matrix(22, n, batch, FpFormat::fp16, {Dist::normal, 0.0, 1.0})};
}

void run_engine(benchmark::State& state, figlut::engines::EngineKind kind) {
  const BenchProblem p = bench_problem(64, 96, 8, static_cast<int>(state.range(0)));
  figlut::engines::EngineConfig cfg;
  cfg.kind = kind;
  for (auto _ : state) {
    benchmark::DoNotOptimize(figlut::engines::gemm(cfg, p.weights, p.x));
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * 2 * 64 * 96 * 8);
}

void BM_GemmFpe(benchmark::State& state) {
  run_engine(state, figlut::engines::EngineKind::fpe);
}
void BM_GemmIfpu(benchmark::State& state) {
  run_engine(state, figlut::engines::EngineKind::ifpu);
}
void BM_GemmFigna(benchmark::State& state) {
  run_engine(state, figlut::engines::EngineKind::figna);
}
void BM_GemmFiglutF(benchmark::State& state) {
  run_engine(state, figlut::engines::EngineKind::figlut_f);
}
void BM_GemmFiglutI(benchmark::State& state) {
  run_engine(state, figlut::engines::EngineKind::figlut_i);
}

BENCHMARK(BM_GemmFpe)->Arg(4);
BENCHMARK(BM_GemmIfpu)->Arg(4);
BENCHMARK(BM_GemmFigna)->Arg(4);
BENCHMARK(BM_GemmFiglutF)->Arg(2)->Arg(4);
BENCHMARK(BM_GemmFiglutI)->Arg(2)->Arg(4);

}  // namespace
