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


#include "nullfuse/diffrec.h"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "nullfuse/baselines.h"
#include "nullfuse/optim.h"
#include "nullfuse/synth.h"
#include "support/gradcheck.h"
#include "support/test_util.h"

namespace nullfuse {
namespace {

using testing::Gaussian;

TEST(Schedule, EndpointsAndMonotone) {
  const auto s = DiffusionSchedule::Linear(100, 1e-4, 0.02);
  EXPECT_EQ(s.steps(), 100u);
  EXPECT_DOUBLE_EQ(s.AlphaBar(0), 1.0);
  EXPECT_NEAR(s.AlphaBar(1), 1.0 - 1e-4, 1e-15);
  for (std::size_t t = 1; t <= 100; ++t) EXPECT_LT(s.AlphaBar(t), s.AlphaBar(t - 1));
  EXPECT_NEAR(s.Beta(100), 0.02, 1e-15);
  double prod = 1;
  for (std::size_t t = 1; t <= 100; ++t) prod *= 1 - s.Beta(t);
  EXPECT_NEAR(s.AlphaBar(100), prod, 1e-14);
}

TEST(ForwardNoise, Endpoints) {
  std::mt19937_64 rng(1);
  const Matrix x0 = Gaussian<float>(3, 4, rng);
  const Matrix eps = Gaussian<float>(3, 4, rng);
  EXPECT_EQ(ForwardNoiseWith(x0, 1.0, eps), x0);
  EXPECT_EQ(ForwardNoiseWith(x0, 0.0, eps), eps);
  const auto s = DiffusionSchedule::Linear(10, 1e-3, 0.1);
  EXPECT_THROW(ForwardNoise(x0, s, 0, eps), ValidationError);
  EXPECT_THROW(ForwardNoise(x0, s, 11, eps), ValidationError);
}

TEST(ForwardNoise, SecondMomentInterpolatesTowardIdentity) {
  // x0 rows: unit-variance semantic part plus an ID part
  std::mt19937_64 rng(2);
  const Eigen::Index n = 2000, d = 6;
  const MatrixD table = Gaussian<double>(n, d, rng);
  const MatrixD m0 = table.transpose() * table / double(n);
  std::uniform_int_distribution<Eigen::Index> row(0, n - 1);
  const int draws = 100000;
  MatrixD acc = MatrixD::Zero(d, d);
  for (int i = 0; i < draws; ++i) {
    const Mat<double> x0 = table.row(row(rng));
    const Mat<double> eps = Gaussian<double>(1, d, rng);
    const Mat<double> xt = ForwardNoiseWith<double>(x0, 0.5, eps);
    acc += xt.transpose() * xt;
  }
  acc /= draws;
  const MatrixD expect = 0.5 * m0 + 0.5 * MatrixD::Identity(d, d);
  EXPECT_LT((acc - expect).norm() / expect.norm(), 0.05);
}

TEST(DenoiserLoss, GradientsPredictX0) {
  for (const auto& r : testing::CheckDenoiserGradients(21)) {
    EXPECT_LT(r.relative_error, 1e-3) << r.name;
  }
}

TEST(DenoiserLoss, GradientsPredictEpsilon) {
  for (const auto& r : testing::CheckDenoiserGradients(22, Prediction::kEpsilon)) {
    EXPECT_LT(r.relative_error, 1e-3) << r.name;
  }
}

TEST(Denoiser, ConstantDatasetOverfits) {
  DenoiserConfig cfg;
  cfg.dim = 8;
  cfg.hidden = 32;
  cfg.steps = 50;
  auto params = DenoiserParams<float>::Init(cfg, 22);
  const auto schedule = DiffusionSchedule::Linear(cfg.steps, 1e-4, 0.05);
  std::mt19937_64 rng(22);
  const Matrix emb = Gaussian<float>(1, 8, rng);
  std::uniform_int_distribution<std::size_t> step(1, cfg.steps);

  auto batch = [&] {
    std::vector<DiffusionDraw<float>> draws;
    for (int i = 0; i < 16; ++i) {
      draws.push_back({Sequence{0}, 0, step(rng), Gaussian<float>(1, 8, rng)});
    }
    return draws;
  };
  Adam adam(1e-2);
  double first = 0, last = 0;
  for (int it = 0; it < 200; ++it) {
    auto grad = params.ZerosLike();
    const auto draws = batch();
    const double loss = DenoiserLoss<float>(params, emb, schedule, draws, &grad, nullptr);
    if (it == 0) first = loss;
    last = loss;
    auto p = params.Blocks();
    auto g = grad.Blocks();
    for (std::size_t j = 0; j < p.size(); ++j) adam.Update(p[j].name, *p[j].value, *g[j].value);
  }
  EXPECT_LT(last, 0.01 * first);

  const Matrix x = Sample(params, emb, Sequence{0}, schedule, 10, Sampler::kDdim, 22);
  const float cos = x.row(0).dot(emb.row(0)) / (x.norm() * emb.norm());
  EXPECT_GT(cos, 0.99f);
}

TEST(SampleWith, PerfectDenoiserReturnsX0) {
  std::mt19937_64 rng(3);
  const Matrix x0 = Gaussian<float>(1, 5, rng);
  const Matrix noise = Gaussian<float>(1, 5, rng);
  X0Predictor perfect = [&](const Matrix&, std::size_t) { return x0; };
  const auto one = DiffusionSchedule::Linear(1, 0.5, 0.5);
  EXPECT_TRUE(SampleWith(perfect, one, 1, noise, Sampler::kDdim, nullptr)
                  .isApprox(x0, 1e-6f));
  const auto s = DiffusionSchedule::Linear(100, 1e-4, 0.02);
  EXPECT_TRUE(SampleWith(perfect, s, 10, noise, Sampler::kDdim, nullptr)
                  .isApprox(x0, 1e-5f));
  EXPECT_TRUE(SampleWith(perfect, s, 10, noise, Sampler::kDdpm, &rng)
                  .isApprox(x0, 1e-5f));
  EXPECT_THROW(SampleWith(perfect, s, 0, noise, Sampler::kDdim, nullptr),
               ValidationError);
  EXPECT_THROW(SampleWith(perfect, s, 10, noise, Sampler::kDdpm, nullptr),
               ValidationError);
}

TEST(Sample, DeterministicPerSeed) {
  DenoiserConfig cfg;
  cfg.dim = 6;
  cfg.hidden = 16;
  cfg.steps = 20;
  const auto p = DenoiserParams<float>::Init(cfg, 4);
  const auto s = DiffusionSchedule::Linear(20, 1e-3, 0.1);
  std::mt19937_64 rng(4);
  const Matrix emb = Gaussian<float>(10, 6, rng);
  const Sequence h = {1, 2, 3};
  EXPECT_EQ(Sample(p, emb, h, s, 5, Sampler::kDdim, 9),
            Sample(p, emb, h, s, 5, Sampler::kDdim, 9));
  EXPECT_EQ(Sample(p, emb, h, s, 5, Sampler::kDdpm, 9),
            Sample(p, emb, h, s, 5, Sampler::kDdpm, 9));
  EXPECT_NE(Sample(p, emb, h, s, 5, Sampler::kDdim, 9),
            Sample(p, emb, h, s, 5, Sampler::kDdim, 10));
}

TEST(Ground, ExactMatchZeroAndLoop) {
  std::mt19937_64 rng(5);
  const Matrix emb = Gaussian<float>(100, 8, rng);
  EXPECT_EQ(Ground(emb.row(7), emb, /*cosine=*/true), 7u);
  EXPECT_EQ(Ground(Matrix::Zero(1, 8), emb), 0u);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix x = Gaussian<float>(1, 8, rng);
    ItemIndex best = 0;
    float best_score = -1e30f;
    for (int i = 0; i < 100; ++i) {
      float s = 0;
      for (int j = 0; j < 8; ++j) s += x(0, j) * emb(i, j);
      if (s > best_score) {
        best_score = s;
        best = ItemIndex(i);
      }
    }
    EXPECT_EQ(Ground(x, emb), best);
  }
}

TEST(HistoryCondition, MeanOfLastRows) {
  Matrix emb(4, 2);
  emb << 1, 0, 0, 1, 2, 2, 4, 4;
  const Matrix c = HistoryCondition<float>(emb, Sequence{0, 1, 2, 3}, 2);
  EXPECT_FLOAT_EQ(c(0, 0), 3.0f);
  EXPECT_FLOAT_EQ(c(0, 1), 3.0f);
}

TEST(TrainDenoiser, ZeroLearningRateLeavesEverythingUnchanged) {
  SynthConfig sc;
  sc.n_items = 60;
  sc.n_users = 80;
  sc.language_dim = 8;
  sc.groups = 5;
  auto corpus = SynthGenerate(sc, 5);
  const auto ds = BuildSplits(corpus.interactions, {});
  DenoiserConfig cfg;
  cfg.dim = 8;
  cfg.hidden = 16;
  cfg.steps = 20;
  cfg.max_history = 5;
  const auto init = DenoiserParams<float>::Init(cfg, 22);
  FreeTable table("random_id", RandomTable(ds.n_items(), 8, 22));
  const Matrix before = table.Embeddings();
  DiffusionTrainConfig tc;
  tc.base.lr = 0.0;
  tc.base.max_epochs = 1;
  tc.sample_steps = 4;
  const auto r = TrainDenoiser(init, table, ds,
                               DiffusionSchedule::Linear(20, 1e-3, 0.1), tc);
  EXPECT_EQ(table.Embeddings(), before);
  auto trained = r.params;
  auto initial = init;
  auto a = trained.Blocks();
  auto b = initial.Blocks();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].value, *b[i].value);
}

TEST(DenoiserArchive, RoundTrip) {
  DenoiserConfig cfg;
  cfg.dim = 4;
  cfg.hidden = 8;
  cfg.steps = 10;
  cfg.prediction = Prediction::kEpsilon;
  auto p = DenoiserParams<float>::Init(cfg, 1);
  TensorArchive ar;
  SaveDenoiser(p, ar);
  auto back = LoadDenoiser(ar);
  EXPECT_EQ(back.config.prediction, Prediction::kEpsilon);
  auto a = back.Blocks();
  auto b = p.Blocks();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].value, *b[i].value);
}

}  // namespace
}  // namespace nullfuse
