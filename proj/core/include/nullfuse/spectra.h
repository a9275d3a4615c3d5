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

// Spectral analysis of language embeddings: weighted mean and covariance,
// eigendecomposition, division into semantic-rich and null subspaces, null
// clipping, and standardization of the retained bases.

#ifndef NULLFUSE_SPECTRA_H_
#define NULLFUSE_SPECTRA_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "nullfuse/corpus.h"
#include "nullfuse/types.h"

namespace nullfuse {

struct SpectralStats {
  VectorD mean;        // d_l
  MatrixD covariance;  // d_l x d_l, symmetric PSD
  VectorD weights;     // N, sums to 1
};

struct SpectralDecomposition {
  VectorD mean;      // carried along so a decomposition file is self-contained
  MatrixD basis;     // d_l x d_l, orthonormal columns
  VectorD spectrum;  // squared singular values, non-increasing, >= 0

  std::size_t dim() const { return static_cast<std::size_t>(spectrum.size()); }
};

/// Which quantity the threshold is compared against. Both are normalized by
/// their maximum.
enum class ThresholdScale { kSquared, kSingular };

struct SubspacePartition {
  std::optional<double> threshold;
  std::size_t semantic_dim = 0;  // d_s
  std::size_t null_dim = 0;      // d_n retained after clipping
  std::size_t full_dim = 0;      // d_l

  std::size_t kept() const { return semantic_dim + null_dim; }
  /// Spectrum-ordered column indices 0..d_s+d_n-1 of the basis.
  std::vector<std::size_t> kept_columns() const;
};

/// mu = sum_v p(v) e_v and
/// Sigma = (1 - sum_v p(v)^2)^-1 sum_v p(v) (e_v - mu)(e_v - mu)^T.
/// Uniform weights when `weights` is empty. Accumulates in double.
SpectralStats ComputeStats(const EmbeddingMatrix& e,
                           std::span<const double> weights = {});

/// Symmetric eigendecomposition U S U^T of the covariance. Eigenvalues are
/// sorted descending and clamped at zero; each column of U is sign-fixed so
/// its largest-magnitude entry is positive.
SpectralDecomposition Decompose(const SpectralStats& stats);

/// d_s counts normalized spectrum entries strictly above `threshold`; the d_n
/// largest-spectrum dimensions of the remainder are retained. A missing
/// `null_dim` keeps the whole null space.
SubspacePartition PartitionByThreshold(
    const SpectralDecomposition& dec, double threshold,
    std::optional<std::size_t> null_dim,
    ThresholdScale scale = ThresholdScale::kSquared);

/// Direct assignment of (d_s, d_n).
SubspacePartition PartitionDirect(const SpectralDecomposition& dec,
                                  std::size_t semantic_dim,
                                  std::size_t null_dim);

/// Spectrum entries are floored at this value before S^-1/2.
inline constexpr double kSpectrumFloor = 1e-6;

/// (E - mu) U[:, :kept] S^-1/2[:kept, :kept].
Matrix Standardize(const EmbeddingMatrix& e, const SpectralDecomposition& dec,
                   const SubspacePartition& part);

/// (E - mu) U[:, :kept], rotation without rescaling.
Matrix Project(const EmbeddingMatrix& e, const SpectralDecomposition& dec,
               const SubspacePartition& part);

struct SpectrumRow {
  std::size_t index = 0;
  double normalized = 0.0;
  double cumulative_energy = 0.0;
};

std::vector<SpectrumRow> SpectrumReport(const SpectralDecomposition& dec);
void WriteSpectrumCsv(std::ostream& os, const std::vector<SpectrumRow>& rows);

struct EcdfPoint {
  double similarity = 0.0;
  double fraction = 0.0;
};

struct EcdfReport {
  std::vector<EcdfPoint> points;
  std::size_t pairs_used = 0;
  std::size_t pairs_skipped = 0;  // pairs touching a zero-norm row
};

/// ECDF of cosine similarity over `sample_pairs` uniformly drawn pairs of
/// distinct rows. Equal similarities collapse into one point.
EcdfReport CosineEcdf(const Matrix& rows, std::size_t sample_pairs,
                      std::uint64_t seed);
/// Fraction of sampled similarities <= x.
double EcdfAt(const EcdfReport& report, double x);
void WriteEcdfCsv(std::ostream& os, const EcdfReport& report);

void SaveDecomposition(const SpectralDecomposition& dec,
                       const std::filesystem::path& stem);
SpectralDecomposition LoadDecomposition(const std::filesystem::path& stem);

}  // namespace nullfuse

#endif  // NULLFUSE_SPECTRA_H_
