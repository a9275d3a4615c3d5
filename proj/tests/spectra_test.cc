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


#include "nullfuse/spectra.h"

#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "support/test_util.h"

namespace nullfuse {
namespace {

using testing::Gaussian;

EmbeddingMatrix Rows(std::initializer_list<std::initializer_list<float>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (float v : r) m(i, j++) = v;
    ++i;
  }
  return EmbeddingMatrix(m);
}

SpectralDecomposition DiagonalDecomposition(std::vector<double> spectrum) {
  SpectralDecomposition dec;
  const auto d = static_cast<Eigen::Index>(spectrum.size());
  dec.mean = VectorD::Zero(d);
  dec.basis = MatrixD::Identity(d, d);
  dec.spectrum = Eigen::Map<VectorD>(spectrum.data(), d);
  return dec;
}

TEST(ComputeStats, ThreePointExample) {
  const auto s = ComputeStats(Rows({{1, 0}, {-1, 0}, {0, 0}}));
  EXPECT_NEAR(s.mean(0), 0.0, 1e-15);
  EXPECT_NEAR(s.mean(1), 0.0, 1e-15);
  EXPECT_NEAR(s.covariance(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(s.covariance(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(s.covariance(1, 1), 0.0, 1e-15);
}

TEST(ComputeStats, IdenticalRowsHaveZeroCovariance) {
  const auto s = ComputeStats(Rows({{2, -1, 3}, {2, -1, 3}, {2, -1, 3}}));
  EXPECT_NEAR(s.mean(2), 3.0, 1e-12);
  EXPECT_NEAR(s.covariance.cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(ComputeStats, SingleItemRejected) {
  EXPECT_THROW(ComputeStats(Rows({{1, 2}})), ValidationError);
}

TEST(ComputeStats, WeightedMatchesDoubleLoop) {
  std::mt19937_64 rng(5);
  const Matrix e = Gaussian<float>(8, 8, rng);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<double> w(8);
  double total = 0;
  for (auto& x : w) total += (x = u(rng));
  for (auto& x : w) x /= total;

  const auto s = ComputeStats(EmbeddingMatrix(e), w);
  double sum_sq = 0;
  for (double x : w) sum_sq += x * x;
  for (int a = 0; a < 8; ++a) {
    long double mu_a = 0;
    for (int v = 0; v < 8; ++v) mu_a += w[v] * e(v, a);
    EXPECT_NEAR(s.mean(a), static_cast<double>(mu_a), 1e-12);
  }
  for (int a = 0; a < 8; ++a) {
    for (int b = 0; b < 8; ++b) {
      long double mu_a = 0, mu_b = 0;
      for (int v = 0; v < 8; ++v) {
        mu_a += w[v] * e(v, a);
        mu_b += w[v] * e(v, b);
      }
      long double acc = 0;
      for (int v = 0; v < 8; ++v) acc += w[v] * (e(v, a) - mu_a) * (e(v, b) - mu_b);
      EXPECT_NEAR(s.covariance(a, b), static_cast<double>(acc / (1 - sum_sq)),
                  1e-10);
    }
  }
}

TEST(Decompose, IsotropicIdentity) {
  SpectralStats s{VectorD::Zero(2), MatrixD::Identity(2, 2), VectorD()};
  const auto dec = Decompose(s);
  EXPECT_NEAR(dec.spectrum(0), 1.0, 1e-12);
  EXPECT_NEAR(dec.spectrum(1), 1.0, 1e-12);
  EXPECT_LT((dec.basis * dec.spectrum.asDiagonal() * dec.basis.transpose() -
             MatrixD::Identity(2, 2))
                .norm(),
            1e-12);
}

TEST(Decompose, RankOneTwoByTwo) {
  MatrixD c(2, 2);
  c << 1, 0, 0, 0;
  const auto dec = Decompose({VectorD::Zero(2), c, VectorD()});
  EXPECT_NEAR(dec.spectrum(0), 1.0, 1e-12);
  EXPECT_NEAR(dec.spectrum(1), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(dec.basis(0, 0)), 1.0, 1e-12);
  EXPECT_NEAR(dec.basis(1, 0), 0.0, 1e-12);
}

TEST(Decompose, DiagonalSortedAndAxisAligned) {
  MatrixD c = MatrixD::Zero(3, 3);
  c(0, 0) = 0.01;
  c(1, 1) = 4;
  c(2, 2) = 1;
  const auto dec = Decompose({VectorD::Zero(3), c, VectorD()});
  EXPECT_NEAR(dec.spectrum(0), 4.0, 1e-12);
  EXPECT_NEAR(dec.spectrum(1), 1.0, 1e-12);
  EXPECT_NEAR(dec.spectrum(2), 0.01, 1e-12);
  EXPECT_NEAR(std::abs(dec.basis(1, 0)), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(dec.basis(2, 1)), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(dec.basis(0, 2)), 1.0, 1e-12);
  // sign convention: largest-magnitude entry of each column is positive
  for (int j = 0; j < 3; ++j) {
    Eigen::Index at;
    dec.basis.col(j).cwiseAbs().maxCoeff(&at);
    EXPECT_GT(dec.basis(at, j), 0.0);
  }
}

TEST(Decompose, RejectsAsymmetricAndIndefinite) {
  MatrixD a(2, 2);
  a << 1, 0.5, 0, 1;
  EXPECT_THROW(Decompose({VectorD::Zero(2), a, VectorD()}), ValidationError);
  MatrixD b(2, 2);
  b << 1, 0, 0, -1;
  EXPECT_THROW(Decompose({VectorD::Zero(2), b, VectorD()}), ValidationError);
}

TEST(Partition, ThresholdExample) {
  const auto dec = DiagonalDecomposition({1, 0.25, 1e-9, 1e-12});
  const auto p = PartitionByThreshold(dec, 0.5, 1);
  EXPECT_EQ(p.semantic_dim, 1u);
  EXPECT_EQ(p.null_dim, 1u);
  EXPECT_EQ(p.kept_columns(), (std::vector<std::size_t>{0, 1}));
}

TEST(Partition, ThresholdIsStrict) {
  const auto dec = DiagonalDecomposition({1, 0.5, 0.1});
  EXPECT_EQ(PartitionByThreshold(dec, 0.5, std::nullopt).semantic_dim, 1u);
  EXPECT_EQ(PartitionByThreshold(dec, 0.49, std::nullopt).semantic_dim, 2u);
}

TEST(Partition, SingularScaleComparesSquareRoots) {
  // sqrt(0.25) = 0.5 on the singular scale
  const auto dec = DiagonalDecomposition({1, 0.25, 0.01});
  EXPECT_EQ(PartitionByThreshold(dec, 0.3, 1, ThresholdScale::kSquared)
                .semantic_dim,
            1u);
  EXPECT_EQ(PartitionByThreshold(dec, 0.3, 1, ThresholdScale::kSingular)
                .semantic_dim,
            2u);
}

TEST(Partition, IsotropicSpectrumHasNoNullSpace) {
  const auto dec = DiagonalDecomposition({2, 2, 2});
  EXPECT_THROW(PartitionByThreshold(dec, 0.5, std::nullopt), ValidationError);
}

TEST(Partition, MissingNullDimKeepsAll) {
  const auto dec = DiagonalDecomposition({1, 0.2, 0.1, 0.0});
  const auto p = PartitionByThreshold(dec, 0.5, std::nullopt);
  EXPECT_EQ(p.semantic_dim, 1u);
  EXPECT_EQ(p.null_dim, 3u);
  EXPECT_THROW(PartitionByThreshold(dec, 0.5, 4), ValidationError);
}

TEST(Partition, DirectAssignmentKeepsLeadingColumns) {
  std::vector<double> s(1536);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = 1.0 / double(i + 1);
  const auto p = PartitionDirect(DiagonalDecomposition(s), 64, 64);
  const auto cols = p.kept_columns();
  ASSERT_EQ(cols.size(), 128u);
  for (std::size_t i = 0; i < cols.size(); ++i) EXPECT_EQ(cols[i], i);
}

TEST(Standardize, WhitenedInputIsPureRotation) {
  // rows of sqrt(3/2) * [I; -I] have zero mean and unit covariance (N=4,
  // denominator 1 - 4/16)
  const float a = std::sqrt(1.5f);
  const auto e = Rows({{a, 0}, {0, a}, {-a, 0}, {0, -a}});
  const auto dec = Decompose(ComputeStats(e));
  const auto p = PartitionDirect(dec, 1, 1);
  const Matrix out = Standardize(e, dec, p);
  const Matrix expect = e.data() * dec.basis.cast<float>();
  EXPECT_LT((out - expect).cwiseAbs().maxCoeff(), 1e-5f);
}

TEST(Standardize, FloorOnRankDeficientDirection) {
  const auto e = Rows({{1, 0}, {-1, 0}, {0, 0}});
  const auto dec = Decompose(ComputeStats(e));
  const auto p = PartitionDirect(dec, 1, 1);
  const Matrix out = Standardize(e, dec, p);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(std::abs(out(i, 0)), std::abs(e.data()(i, 0)), 1e-6);
    EXPECT_NEAR(out(i, 1), 0.0f, 1e-6f);
  }
}

TEST(Standardize, SemanticBlockHasUnitSecondMoment) {
  std::mt19937_64 rng(9);
  Matrix e = Gaussian<float>(400, 6, rng);
  for (int j = 0; j < 6; ++j) e.col(j) *= float(6 - j) * 3.0f;
  e.rowwise() += Matrix::Constant(1, 6, 2.0f).row(0);
  const EmbeddingMatrix em(e);
  const auto dec = Decompose(ComputeStats(em));
  const auto p = PartitionDirect(dec, 3, 2);
  const Matrix out = Standardize(em, dec, p);
  const MatrixD sem = out.leftCols(3).cast<double>();
  const MatrixD m = sem.transpose() * sem / double(sem.rows() - 1);
  EXPECT_LT((m - MatrixD::Identity(3, 3)).norm() / std::sqrt(3.0), 0.05);
}

TEST(SpectrumReport, TwoEntries) {
  const auto rows = SpectrumReport(DiagonalDecomposition({4, 1}));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].index, 0u);
  EXPECT_DOUBLE_EQ(rows[0].normalized, 1.0);
  EXPECT_NEAR(rows[0].cumulative_energy, 0.8, 1e-12);
  EXPECT_NEAR(rows[1].normalized, 0.25, 1e-12);
  EXPECT_DOUBLE_EQ(rows[1].cumulative_energy, 1.0);

  const auto one = SpectrumReport(DiagonalDecomposition({1}));
  ASSERT_EQ(one.size(), 1u);
  EXPECT_DOUBLE_EQ(one[0].normalized, 1.0);
  EXPECT_DOUBLE_EQ(one[0].cumulative_energy, 1.0);
}

TEST(CosineEcdf, IdenticalAndOrthogonalRows) {
  Matrix same(2, 3);
  same << 1, 2, 3, 1, 2, 3;
  const auto r = CosineEcdf(same, 50, 1);
  ASSERT_EQ(r.points.size(), 1u);
  EXPECT_NEAR(r.points[0].similarity, 1.0, 1e-6);
  EXPECT_DOUBLE_EQ(r.points[0].fraction, 1.0);

  Matrix ortho(2, 2);
  ortho << 1, 0, 0, 1;
  const auto o = CosineEcdf(ortho, 50, 1);
  ASSERT_EQ(o.points.size(), 1u);
  EXPECT_NEAR(o.points[0].similarity, 0.0, 1e-7);
}

TEST(CosineEcdf, WhiteningShrinksSimilarities) {
  std::mt19937_64 rng(3);
  Matrix e = Gaussian<float>(500, 16, rng);
  e.col(0) *= 8.0f;
  e.col(0).array() += 20.0f;
  const EmbeddingMatrix em(e);
  const auto dec = Decompose(ComputeStats(em));
  const auto part = PartitionDirect(dec, 8, 8);
  const auto raw = CosineEcdf(e, 4000, 22);
  const auto white = CosineEcdf(Standardize(em, dec, part), 4000, 22);
  EXPECT_GT(EcdfAt(white, 0.5), EcdfAt(raw, 0.5));
}

TEST(DecompositionFile, RoundTrip) {
  std::mt19937_64 rng(4);
  const auto dec = Decompose(ComputeStats(EmbeddingMatrix(Gaussian<float>(30, 5, rng))));
  const auto dir = testing::ScratchDir("dec");
  SaveDecomposition(dec, dir / "dec");
  const auto back = LoadDecomposition(dir / "dec");
  EXPECT_EQ(back.basis, dec.basis);
  EXPECT_EQ(back.spectrum, dec.spectrum);
  EXPECT_EQ(back.mean, dec.mean);
}

}  // namespace
}  // namespace nullfuse
