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


#include "nullfuse/corpus.h"

#include <cmath>
#include <fstream>
#include <limits>

#include <gtest/gtest.h>

#include "support/test_util.h"

namespace nullfuse {
namespace {

UserHistory User(std::string id, Sequence items,
                 std::vector<std::int64_t> ts = {}) {
  return {std::move(id), std::move(items), std::move(ts)};
}

TEST(Embeddings, RoundTripThreeByTwo) {
  Matrix m(3, 2);
  m << 1, 2, 3, 4, 5, 6;
  const auto dir = testing::ScratchDir("emb");
  SaveEmbeddings(EmbeddingMatrix(m), dir / "e.f32");
  const auto back = LoadEmbeddings(dir / "e.f32");
  EXPECT_EQ(back.n_items(), 3u);
  EXPECT_EQ(back.dim(), 2u);
  EXPECT_EQ(back.data(), m);
  EXPECT_EQ(std::filesystem::file_size(dir / "e.f32"), 6 * sizeof(float));
}

TEST(Embeddings, NanNamesRow) {
  Matrix m = Matrix::Zero(4, 2);
  m(2, 1) = std::numeric_limits<float>::quiet_NaN();
  try {
    EmbeddingMatrix e(m);
    FAIL() << "expected rejection";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(Embeddings, ShortPayloadRejected) {
  const auto dir = testing::ScratchDir("emb");
  {
    std::ofstream bin(dir / "e.f32", std::ios::binary);
    const float x[5] = {1, 2, 3, 4, 5};
    bin.write(reinterpret_cast<const char*>(x), sizeof(x));
    std::ofstream side(SidecarPath(dir / "e.f32"));
    side << R"({"n_items": 3, "dim": 2, "dtype": "f32"})";
  }
  EXPECT_THROW(LoadEmbeddings(dir / "e.f32"), ValidationError);
}

TEST(Catalog, DuplicateIdsRejected) {
  EXPECT_THROW(ItemCatalog({{"a", ""}, {"b", ""}, {"a", ""}}), ValidationError);
}

TEST(Catalog, FileRoundTrip) {
  const ItemCatalog c({{"i1", "first\tpart"}, {"i2", ""}});
  const auto dir = testing::ScratchDir("cat");
  SaveCatalog(c, dir / "c.txt");
  const auto back = LoadCatalog(dir / "c.txt");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.at(0).external_id, "i1");
  EXPECT_EQ(back.at(0).metadata, "first\tpart");
  EXPECT_EQ(back.Find("i2"), std::optional<ItemIndex>(1));
  EXPECT_FALSE(back.Find("zz").has_value());
}

TEST(MockEmbeddings, DependsOnlyOnEntry) {
  const ItemCatalog a({{"x", "m"}, {"y", ""}});
  const ItemCatalog b({{"y", ""}, {"x", "m"}});
  const auto ea = MockEmbeddings(a, 8);
  const auto eb = MockEmbeddings(b, 8);
  EXPECT_EQ(ea.data().row(0), eb.data().row(1));
  EXPECT_NE(ea.data().row(0), ea.data().row(1));
}

TEST(LeaveOneOut, FourItemSequence) {
  InteractionDataset ds({User("u", {0, 1, 2, 3})}, 4, 10);
  const auto s = BuildSplits(ds, {});
  const auto train = s.TrainSequences();
  ASSERT_EQ(train.size(), 1u);
  EXPECT_EQ(train[0], (Sequence{0, 1}));
  const auto valid = s.Examples(SplitLabel::kValid);
  ASSERT_EQ(valid.size(), 1u);
  EXPECT_EQ(valid[0].target, 2u);
  EXPECT_EQ(valid[0].history, (Sequence{0, 1}));
  const auto test = s.Examples(SplitLabel::kTest);
  ASSERT_EQ(test.size(), 1u);
  EXPECT_EQ(test[0].target, 3u);
  EXPECT_EQ(test[0].history, (Sequence{0, 1, 2}));
}

TEST(LeaveOneOut, LengthTwoRejected) {
  InteractionDataset ds({User("u", {0, 1})}, 2, 10);
  EXPECT_THROW(BuildSplits(ds, {}), ValidationError);
}

TEST(LeaveOneOut, HistoryTruncatedToWindow) {
  InteractionDataset ds({User("u", {0, 1, 2, 3, 4, 5, 6})}, 7, 3);
  const auto test = BuildSplits(ds, {}).Examples(SplitLabel::kTest);
  ASSERT_EQ(test.size(), 1u);
  EXPECT_EQ(test[0].history, (Sequence{3, 4, 5}));
}

TEST(ColdStart, EightOneOneByLastTimestamp) {
  std::vector<UserHistory> users;
  for (int u = 0; u < 10; ++u) {
    // reverse insertion order so sorting matters
    const std::int64_t last = 100 - u;
    users.push_back(User("u" + std::to_string(u), {0, 1, 2}, {1, 2, last}));
  }
  InteractionDataset ds(users, 3, 10);
  SplitSpec spec;
  spec.mode = SplitMode::kColdStart;
  const auto s = BuildSplits(ds, spec);
  std::size_t n_train = 0, n_valid = 0, n_test = 0;
  for (const auto& l : s.labels()) {
    n_train += l.back() == SplitLabel::kTrain;
    n_valid += l.back() == SplitLabel::kValid;
    n_test += l.back() == SplitLabel::kTest;
  }
  EXPECT_EQ(n_train, 8u);
  EXPECT_EQ(n_valid, 1u);
  EXPECT_EQ(n_test, 1u);
  // the most recent user (u0) is the test user
  EXPECT_EQ(s.labels()[0].back(), SplitLabel::kTest);
  EXPECT_EQ(s.labels()[1].back(), SplitLabel::kValid);
}

TEST(ColdStart, TiesBrokenByUserIdAndWindowApplied) {
  std::vector<UserHistory> users;
  for (const char* id : {"b", "a", "c", "d", "e", "f", "g", "h", "i", "j"}) {
    users.push_back(User(id, {0, 1, 2, 3, 4}, {1, 2, 3, 4, 9}));
  }
  InteractionDataset ds(users, 5, 10);
  SplitSpec spec;
  spec.mode = SplitMode::kColdStart;
  spec.history_window = 2;
  const auto s = BuildSplits(ds, spec);
  // all tied: order a,b,c,...; "j" is last and so the test user
  EXPECT_EQ(s.labels()[9].back(), SplitLabel::kTest);
  EXPECT_EQ(s.labels()[8].back(), SplitLabel::kValid);
  for (const auto& u : s.users()) EXPECT_EQ(u.items, (Sequence{2, 3, 4}));
}

TEST(ColdStart, RequiresTimestamps) {
  InteractionDataset ds({User("u", {0, 1, 2})}, 3, 10);
  SplitSpec spec;
  spec.mode = SplitMode::kColdStart;
  EXPECT_THROW(BuildSplits(ds, spec), ValidationError);
}

TEST(Interactions, LoadGroupsAndOrders) {
  const auto dir = testing::ScratchDir("ia");
  {
    std::ofstream f(dir / "i.tsv");
    f << "u1\tb\t20\nu2\ta\t5\nu1\ta\t10\nu1\tc\t30\nu3\ta\t1\n";
  }
  const ItemCatalog cat({{"a", ""}, {"b", ""}, {"c", ""}});
  const auto ds = LoadInteractions(dir / "i.tsv", cat, 10);
  // single-interaction users are dropped
  ASSERT_EQ(ds.users().size(), 1u);
  EXPECT_EQ(ds.users()[0].items, (Sequence{0, 1, 2}));
  EXPECT_EQ(ds.users()[0].timestamps, (std::vector<std::int64_t>{10, 20, 30}));

  {
    std::ofstream f(dir / "bad.tsv");
    f << "u1\tzz\t1\n";
  }
  EXPECT_THROW(LoadInteractions(dir / "bad.tsv", cat, 10), ValidationError);
}

TEST(Splits, JsonRoundTrip) {
  InteractionDataset ds({User("u", {0, 1, 2, 3}), User("v", {1, 2, 3})}, 4, 10);
  const auto s = BuildSplits(ds, {});
  InteractionDataset fresh({User("u", {0, 1, 2, 3}), User("v", {1, 2, 3})}, 4, 10);
  fresh.ApplySplitsJson(s.SplitsToJson());
  EXPECT_EQ(fresh.labels(), s.labels());
  EXPECT_EQ(fresh.split_mode(), SplitMode::kLeaveOneOut);
}

TEST(HeadTail, ExtremeSkew) {
  const auto h = HeadByCount({10, 1, 1, 1, 1}, 0.2);
  EXPECT_EQ(h, (std::vector<bool>{true, false, false, false, false}));
}

TEST(HeadTail, AllEqualIsDegenerate) {
  bool degenerate = false;
  const auto h = HeadByCount({3, 3, 3, 3, 3}, 0.2, &degenerate);
  EXPECT_TRUE(degenerate);
  EXPECT_EQ(h, std::vector<bool>(5, true));
}

TEST(HeadTail, SortAndCut) {
  const std::vector<std::size_t> counts = {3, 5, 1, 4, 2};
  const auto h = HeadByCount(counts, 0.4);
  // oracle: the two largest counts
  std::vector<std::size_t> sorted = counts;
  std::sort(sorted.rbegin(), sorted.rend());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    EXPECT_EQ(h[i], counts[i] >= sorted[1]);
  }
}

TEST(HeadTail, ItemCountsUseTrainingPositions) {
  InteractionDataset ds({User("u", {0, 1, 2, 3})}, 4, 10);
  const auto s = BuildSplits(ds, {});
  EXPECT_EQ(s.ItemCounts(), (std::vector<std::size_t>{1, 1, 0, 0}));
}

}  // namespace
}  // namespace nullfuse
