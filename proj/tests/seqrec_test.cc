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


#include "nullfuse/seqrec.h"

#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "nullfuse/baselines.h"
#include "nullfuse/synth.h"
#include "support/gradcheck.h"
#include "support/test_util.h"

namespace nullfuse {
namespace {

using testing::Gaussian;

SeqModelConfig SmallConfig() {
  SeqModelConfig c;
  c.dim = 8;
  c.layers = 2;
  c.heads = 2;
  c.max_history = 5;
  return c;
}

TEST(InfoNce, SymmetricScoresGiveLn2) {
  Mat<double> pref = Mat<double>::Zero(1, 2);
  Mat<double> cand = Mat<double>::Ones(2, 2);
  EXPECT_NEAR(InfoNceLoss<double>(pref, cand, nullptr, nullptr), std::log(2.0),
              1e-12);
}

TEST(InfoNce, DirectFormula) {
  Mat<double> pref(1, 2);
  pref << 1, 0;
  Mat<double> cand(3, 2);
  cand << 1, 0, 0, 1, 0, -1;  // s+ = 1, s- = {0, 0}
  const double e = std::exp(1.0);
  EXPECT_NEAR(InfoNceLoss<double>(pref, cand, nullptr, nullptr),
              -std::log(e / (e + 2)), 1e-12);
  EXPECT_NEAR(-std::log(e / (e + 2)), 0.5514, 1e-4);
}

TEST(InfoNce, LargeMarginApproachesZero) {
  Mat<float> pref(1, 1);
  pref << 1;
  Mat<float> cand(3, 1);
  cand << 200, -200, -200;
  const float loss = InfoNceLoss<float>(pref, cand, nullptr, nullptr);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_LT(loss, 1e-6f);
}

TEST(BinaryLoss, SymmetricScores) {
  Mat<double> pref = Mat<double>::Zero(1, 2);
  Mat<double> cand = Mat<double>::Ones(3, 2);
  EXPECT_NEAR(BinaryLoss<double>(pref, cand, nullptr, nullptr),
              2 * std::log(2.0), 1e-12);
}

TEST(Encode, DegenerateNetworkIsLayerNormOfInput) {
  auto p = SeqModelParams<double>::Init(SmallConfig(), 3);
  for (auto& b : p.blocks) {
    b.wo.setZero();
    b.ff_w2.setZero();
  }
  std::mt19937_64 rng(1);
  const Mat<double> emb = Gaussian<double>(4, 8, rng);
  const Mat<double> out = Encode(p, emb, Sequence{2});
  const Mat<double> x = emb.row(2) + p.position.row(4);
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  const Mat<double> expect = (x.array() - mean) / std::sqrt(var + kLayerNormEps);
  EXPECT_LT((out - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Encode, CausalMask) {
  const auto p = SeqModelParams<double>::Init(SmallConfig(), 4);
  std::mt19937_64 rng(2);
  Mat<double> tokens = Gaussian<double>(5, 8, rng);
  const Mat<double> a = EncodeTokens<double>(p, tokens, nullptr);
  tokens.row(3) += Gaussian<double>(1, 8, rng);
  const Mat<double> b = EncodeTokens<double>(p, tokens, nullptr);
  EXPECT_LT((a.topRows(3) - b.topRows(3)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_GT((a.bottomRows(2) - b.bottomRows(2)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Encode, EarlierOrderMatters) {
  const auto p = SeqModelParams<double>::Init(SmallConfig(), 5);
  std::mt19937_64 rng(3);
  const Mat<double> emb = Gaussian<double>(6, 8, rng);
  const Mat<double> a = Encode(p, emb, Sequence{0, 1, 2, 3});
  const Mat<double> b = Encode(p, emb, Sequence{1, 0, 2, 3});
  EXPECT_GT((a - b).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Encode, RepeatedItemMatchesSingleWithoutPositions) {
  auto p = SeqModelParams<double>::Init(SmallConfig(), 6);
  p.position.setZero();
  std::mt19937_64 rng(4);
  const Mat<double> emb = Gaussian<double>(3, 8, rng);
  const Mat<double> one = Encode(p, emb, Sequence{1});
  const Mat<double> many = Encode(p, emb, Sequence{1, 1, 1, 1, 1});
  EXPECT_LT((one - many).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Encode, LongHistoryTruncatedToWindow) {
  const auto p = SeqModelParams<double>::Init(SmallConfig(), 7);
  std::mt19937_64 rng(5);
  const Mat<double> emb = Gaussian<double>(8, 8, rng);
  EXPECT_EQ(Encode(p, emb, Sequence{7, 6, 0, 1, 2, 3, 4}),
            Encode(p, emb, Sequence{0, 1, 2, 3, 4}));
  EXPECT_THROW(Encode(p, emb, Sequence{}), ValidationError);
}

TEST(Encode, InputGradientMatchesCentralDifferences) {
  const auto p = SeqModelParams<double>::Init(SmallConfig(), 8);
  std::mt19937_64 rng(6);
  Mat<double> tokens = Gaussian<double>(4, 8, rng);
  const Mat<double> w = Gaussian<double>(4, 8, rng);  // loss = sum(w .* out)
  EncodeCache<double> cache;
  EncodeTokens<double>(p, tokens, &cache);
  auto grad = p.ZerosLike();
  const Mat<double> analytic = EncodeTokensBackward<double>(p, cache, w, grad);
  auto loss = [&] {
    return EncodeTokens<double>(p, tokens, nullptr).cwiseProduct(w).sum();
  };
  const MatrixD numeric = testing::NumericGradient(tokens, loss, 1e-3);
  EXPECT_LT(testing::BlockRelativeError(analytic, numeric), 1e-4);
}

TEST(WindowLoss, GradientsInfoNce) {
  for (const auto& r : testing::CheckSeqRecGradients(11)) {
    EXPECT_LT(r.relative_error, 1e-3) << r.name;
  }
}

TEST(WindowLoss, GradientsBinary) {
  for (const auto& r : testing::CheckSeqRecGradients(12, LossKind::kBinary)) {
    EXPECT_LT(r.relative_error, 1e-3) << r.name;
  }
}

TEST(MakeWindows, CoversEveryTransitionOnce) {
  Sequence seq(23);
  for (std::size_t i = 0; i < seq.size(); ++i) seq[i] = ItemIndex(i);
  const auto windows = MakeWindows(seq, 5);
  std::multiset<std::pair<ItemIndex, ItemIndex>> seen;
  for (const auto& w : windows) {
    EXPECT_LE(w.size(), 6u);
    EXPECT_GE(w.size(), 2u);
    for (std::size_t i = 0; i + 1 < w.size(); ++i) seen.insert({w[i], w[i + 1]});
  }
  ASSERT_EQ(seen.size(), seq.size() - 1);
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
    EXPECT_EQ(seen.count({seq[i], seq[i + 1]}), 1u);
  }
  EXPECT_TRUE(MakeWindows(Sequence{4}, 5).empty());
}

TEST(SampleNegatives, NeverPositiveAndCoversRest) {
  std::mt19937_64 rng(7);
  std::set<ItemIndex> seen;
  for (int i = 0; i < 200; ++i) {
    for (ItemIndex v : SampleNegatives(6, 2, 4, rng)) {
      EXPECT_NE(v, 2u);
      EXPECT_LT(v, 6u);
      seen.insert(v);
    }
  }
  EXPECT_EQ(seen, (std::set<ItemIndex>{0, 1, 3, 4, 5}));
}

TEST(ScoreAll, MatchesPerItemLoop) {
  SeqModelConfig c = SmallConfig();
  const auto p = SeqModelParams<float>::Init(c, 9);
  std::mt19937_64 rng(8);
  const Matrix emb = Gaussian<float>(100, 8, rng);
  const Sequence h = {3, 50, 7};
  const auto scores = ScoreAll(p, emb, h);
  const Matrix pref = Encode(p, emb, h);
  ASSERT_EQ(scores.size(), 100u);
  for (int i = 0; i < 100; ++i) {
    float s = 0;
    for (int j = 0; j < 8; ++j) s += pref(0, j) * emb(i, j);
    EXPECT_NEAR(scores[i], s, 1e-5f);
  }
}

TEST(ScoreAll, PreferenceEqualToItemRanksItFirst) {
  // a preference equal to item j's embedding, with the other items shorter
  Matrix emb(3, 2);
  emb << 0.1f, 0.2f, 3, 4, -1, 0.5f;
  const Matrix pref = emb.row(1);
  const Matrix s = emb * pref.transpose();
  Eigen::Index best;
  s.col(0).maxCoeff(&best);
  EXPECT_EQ(best, 1);
}

InteractionDataset SmallSynth(std::size_t max_history) {
  SynthConfig sc;
  sc.n_items = 120;
  sc.n_users = 200;
  sc.clusters = 2;
  sc.language_dim = 8;
  sc.semantic_rank = 2;
  sc.groups = 6;
  sc.min_length = 6;
  sc.max_length = 10;
  auto corpus = SynthGenerate(sc, max_history);
  return BuildSplits(corpus.interactions, {});
}

TEST(TrainSeqRec, ZeroLearningRateLeavesEverythingUnchanged) {
  const auto ds = SmallSynth(5);
  SeqModelConfig c = SmallConfig();
  const auto init = SeqModelParams<float>::Init(c, 22);
  FreeTable table("random_id", RandomTable(ds.n_items(), c.dim, 22));
  const Matrix before = table.Embeddings();
  TrainConfig tc;
  tc.lr = 0.0;
  tc.max_epochs = 1;
  tc.negatives = 4;
  tc.batch_size = 32;
  const auto r = TrainSeqRec(init, table, ds, tc);
  EXPECT_EQ(table.Embeddings(), before);
  auto trained = r.params;
  auto initial = init;
  auto a = trained.Blocks();
  auto b = initial.Blocks();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].value, *b[i].value);
}

TEST(TrainSeqRec, PatienceStopsOnFlatValidation) {
  const auto ds = SmallSynth(5);
  SeqModelConfig c = SmallConfig();
  FreeTable table("random_id", RandomTable(ds.n_items(), c.dim, 22));
  TrainConfig tc;
  tc.lr = 0.0;
  tc.patience = 3;
  tc.max_epochs = 20;
  tc.negatives = 4;
  const auto r = TrainSeqRec(SeqModelParams<float>::Init(c, 22), table, ds, tc);
  EXPECT_LE(r.log.size(), 4u);
  EXPECT_EQ(r.best_epoch, 1u);
}

TEST(TrainSeqRec, WarmupDelaysEarlyStop) {
  const auto ds = SmallSynth(5);
  SeqModelConfig c = SmallConfig();
  FreeTable table("random_id", RandomTable(ds.n_items(), c.dim, 22));
  TrainConfig tc;
  tc.lr = 0.0;
  tc.patience = 3;
  tc.warmup = 7;
  tc.max_epochs = 20;
  tc.negatives = 4;
  const auto r = TrainSeqRec(SeqModelParams<float>::Init(c, 22), table, ds, tc);
  EXPECT_EQ(r.log.size(), 7u);
}

TEST(TrainSeqRec, LossDecreasesOverFirstEpochs) {
  const auto ds = SmallSynth(5);
  SeqModelConfig c = SmallConfig();
  FreeTable table("random_id", RandomTable(ds.n_items(), c.dim, 22));
  TrainConfig tc;
  tc.lr = 1e-3;
  tc.patience = 100;
  tc.max_epochs = 5;
  tc.negatives = 8;
  tc.batch_size = 32;
  const auto r = TrainSeqRec(SeqModelParams<float>::Init(c, 22), table, ds, tc);
  ASSERT_EQ(r.log.size(), 5u);
  for (std::size_t i = 1; i < r.log.size(); ++i) {
    EXPECT_LT(r.log[i].loss, r.log[i - 1].loss) << "epoch " << r.log[i].epoch;
  }
}

TEST(TrainSeqRec, Deterministic) {
  const auto ds = SmallSynth(5);
  SeqModelConfig c = SmallConfig();
  TrainConfig tc;
  tc.max_epochs = 2;
  tc.negatives = 4;
  std::string logs[2];
  Matrix tables[2];
  for (int i = 0; i < 2; ++i) {
    FreeTable table("random_id", RandomTable(ds.n_items(), c.dim, 22));
    const auto r = TrainSeqRec(SeqModelParams<float>::Init(c, 22), table, ds, tc);
    logs[i] = FormatTrainLog(r.log);
    tables[i] = table.Embeddings();
  }
  EXPECT_EQ(logs[0], logs[1]);
  EXPECT_EQ(tables[0], tables[1]);
}

TEST(SeqModelArchive, RoundTrip) {
  const auto p = SeqModelParams<float>::Init(SmallConfig(), 10);
  TensorArchive ar;
  SaveSeqModel(p, ar);
  auto back = LoadSeqModel(ar);
  auto orig = p;
  auto a = back.Blocks();
  auto b = orig.Blocks();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].value, *b[i].value);
  EXPECT_EQ(back.config.heads, 2u);
}

}  // namespace
}  // namespace nullfuse
