// Copyright 2026 The nullfuse Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <random>

#include <benchmark/benchmark.h>

#include "nullfuse/seqrec.h"
#include "nullfuse/spectra.h"

namespace nullfuse {
namespace {

Matrix RandomMatrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g;
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

Sequence History(std::size_t length, std::size_t n_items) {
  Sequence h(length);
  for (std::size_t i = 0; i < length; ++i) h[i] = ItemIndex((i * 7919) % n_items);
  return h;
}

void BM_ComputeStatsAndDecompose(benchmark::State& state) {
  const EmbeddingMatrix e(RandomMatrix(2000, state.range(0), 1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(Decompose(ComputeStats(e)));
  }
}
BENCHMARK(BM_ComputeStatsAndDecompose)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Standardize(benchmark::State& state) {
  const EmbeddingMatrix e(RandomMatrix(state.range(0), 64, 2));
  const auto dec = Decompose(ComputeStats(e));
  const auto part = PartitionDirect(dec, 16, 16);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Standardize(e, dec, part));
  }
}
BENCHMARK(BM_Standardize)->Arg(2000)->Arg(20000)->Unit(benchmark::kMillisecond);

void BM_Encode(benchmark::State& state) {
  SeqModelConfig cfg;
  cfg.dim = static_cast<std::size_t>(state.range(0));
  const auto params = SeqModelParams<float>::Init(cfg, 3);
  const Matrix emb = RandomMatrix(2000, state.range(0), 4);
  const Sequence h = History(cfg.max_history, 2000);
  for (auto _ : state) {
    benchmark::DoNotOptimize(Encode(params, emb, h));
  }
}
BENCHMARK(BM_Encode)->Arg(32)->Arg(128);

void BM_ScoreAll(benchmark::State& state) {
  SeqModelConfig cfg;
  const auto params = SeqModelParams<float>::Init(cfg, 5);
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix emb = RandomMatrix(state.range(0), cfg.dim, 6);
  const Sequence h = History(cfg.max_history, n);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ScoreAll(params, emb, h));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ScoreAll)->Arg(2000)->Arg(44014);

}  // namespace
}  // namespace nullfuse

BENCHMARK_MAIN();
