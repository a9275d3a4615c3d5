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

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "nullfuse/tensor_archive.h"

namespace nullfuse {

namespace {

// Row block size for passes over E; bounds the double-precision scratch.
constexpr Eigen::Index kRowBlock = 4096;

}  // namespace

SpectralStats ComputeStats(const EmbeddingMatrix& e,
                           std::span<const double> weights) {
  const auto n = static_cast<Eigen::Index>(e.n_items());
  const auto d = static_cast<Eigen::Index>(e.dim());
  if (n < 2) {
    throw ValidationError(
        "compute_stats: need at least 2 items (1 - sum p^2 vanishes)");
  }

  SpectralStats s;
  if (weights.empty()) {
    s.weights = VectorD::Constant(n, 1.0 / static_cast<double>(n));
  } else {
    if (static_cast<Eigen::Index>(weights.size()) != n) {
      throw ValidationError("compute_stats: weight count != n_items");
    }
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw ValidationError("compute_stats: weights must be finite and >= 0");
      }
      total += w;
    }
    if (total <= 0.0) throw ValidationError("compute_stats: all weights zero");
    s.weights.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      s.weights[i] = weights[static_cast<std::size_t>(i)] / total;
    }
  }

  const double denom = 1.0 - s.weights.squaredNorm();
  if (!(denom > 0.0)) {
    throw ValidationError(
        "compute_stats: weights concentrated on one item (1 - sum p^2 = 0)");
  }

  const Matrix& data = e.data();
  s.mean = VectorD::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.mean += s.weights[i] * data.row(i).transpose().cast<double>();
  }

  s.covariance = MatrixD::Zero(d, d);
  for (Eigen::Index begin = 0; begin < n; begin += kRowBlock) {
    const Eigen::Index rows = std::min(kRowBlock, n - begin);
    MatrixD centered = data.middleRows(begin, rows).cast<double>();
    centered.rowwise() -= s.mean.transpose();
    const MatrixD weighted =
        centered.array().colwise() * s.weights.segment(begin, rows).array();
    s.covariance.noalias() += weighted.transpose() * centered;
  }
  s.covariance /= denom;
  s.covariance = 0.5 * (s.covariance + s.covariance.transpose()).eval();
  return s;
}

SpectralDecomposition Decompose(const SpectralStats& stats) {
  const MatrixD& cov = stats.covariance;
  if (cov.rows() != cov.cols() || cov.rows() == 0) {
    throw ValidationError("decompose: covariance must be square and non-empty");
  }
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-6 * scale) {
    throw ValidationError("decompose: covariance is not symmetric");
  }

  Eigen::SelfAdjointEigenSolver<MatrixD> solver(cov);
  if (solver.info() != Eigen::Success) {
    const MatrixD& v = solver.eigenvectors();
    const double residual =
        (cov * v - v * solver.eigenvalues().asDiagonal()).norm();
    throw NumericalError("decompose: eigen-solver did not converge (residual " +
                         std::to_string(residual) + ")");
  }

  const auto d = cov.rows();
  const VectorD& values = solver.eigenvalues();  // ascending
  const double largest = values[d - 1];
  if (values[0] < -1e-6 * std::max(1.0, std::abs(largest))) {
    throw ValidationError("decompose: covariance is not positive semi-definite "
                          "(eigenvalue " + std::to_string(values[0]) + ")");
  }

  SpectralDecomposition dec;
  dec.mean = stats.mean;
  dec.basis.resize(d, d);
  dec.spectrum.resize(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const Eigen::Index src = d - 1 - k;
    dec.spectrum[k] = std::max(0.0, values[src]);
    VectorD col = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    col.cwiseAbs().maxCoeff(&arg);
    if (col[arg] < 0.0) col = -col;
    dec.basis.col(k) = col;
  }
  return dec;
}

std::vector<std::size_t> SubspacePartition::kept_columns() const {
  std::vector<std::size_t> cols(kept());
  for (std::size_t i = 0; i < cols.size(); ++i) cols[i] = i;
  return cols;
}

namespace {

SubspacePartition FinishPartition(std::size_t d_l, std::size_t d_s,
                                  std::optional<std::size_t> null_dim,
                                  std::optional<double> threshold) {
  if (d_s >= d_l) {
    throw ValidationError("partition: empty null space (d_s = d_l = " +
                          std::to_string(d_l) + ")");
  }
  const std::size_t available = d_l - d_s;
  const std::size_t d_n = null_dim.value_or(available);
  if (d_n < 1) throw ValidationError("partition: null_dim must be >= 1");
  if (d_n > available) {
    throw ValidationError("partition: null_dim " + std::to_string(d_n) +
                          " exceeds null dimensionality " +
                          std::to_string(available));
  }
  SubspacePartition p;
  p.threshold = threshold;
  p.semantic_dim = d_s;
  p.null_dim = d_n;
  p.full_dim = d_l;
  return p;
}

}  // namespace

SubspacePartition PartitionByThreshold(const SpectralDecomposition& dec,
                                       double threshold,
                                       std::optional<std::size_t> null_dim,
                                       ThresholdScale scale) {
  if (!(threshold >= 0.0)) {
    throw ValidationError("partition: threshold must be >= 0");
  }
  const std::size_t d_l = dec.dim();
  const double top = d_l ? dec.spectrum[0] : 0.0;
  std::size_t d_s = 0;
  for (std::size_t i = 0; i < d_l; ++i) {
    double normalized = top > 0.0 ? dec.spectrum[static_cast<Eigen::Index>(i)] / top : 0.0;
    if (scale == ThresholdScale::kSingular) normalized = std::sqrt(normalized);
    if (normalized > threshold) ++d_s;
  }
  return FinishPartition(d_l, d_s, null_dim, threshold);
}

SubspacePartition PartitionDirect(const SpectralDecomposition& dec,
                                  std::size_t semantic_dim,
                                  std::size_t null_dim) {
  return FinishPartition(dec.dim(), semantic_dim, null_dim, std::nullopt);
}

namespace {

Matrix ProjectScaled(const EmbeddingMatrix& e, const SpectralDecomposition& dec,
                     const SubspacePartition& part, bool standardize) {
  if (e.dim() != dec.dim()) {
    throw ValidationError("standardize: embedding dim does not match basis");
  }
  const auto kept = static_cast<Eigen::Index>(part.kept());
  if (kept < 1 || kept > static_cast<Eigen::Index>(dec.dim())) {
    throw ValidationError("standardize: invalid partition");
  }
  const MatrixD basis = dec.basis.leftCols(kept);
  VectorD col_scale = VectorD::Ones(kept);
  if (standardize) {
    for (Eigen::Index j = 0; j < kept; ++j) {
      col_scale[j] = 1.0 / std::sqrt(std::max(dec.spectrum[j], kSpectrumFloor));
    }
  }
  const auto n = static_cast<Eigen::Index>(e.n_items());
  Matrix out(n, kept);
  for (Eigen::Index begin = 0; begin < n; begin += kRowBlock) {
    const Eigen::Index rows = std::min(kRowBlock, n - begin);
    MatrixD centered = e.data().middleRows(begin, rows).cast<double>();
    centered.rowwise() -= dec.mean.transpose();
    MatrixD projected = centered * basis;
    projected = projected * col_scale.asDiagonal();
    out.middleRows(begin, rows) = projected.cast<float>();
  }
  return out;
}

}  // namespace

Matrix Standardize(const EmbeddingMatrix& e, const SpectralDecomposition& dec,
                   const SubspacePartition& part) {
  return ProjectScaled(e, dec, part, true);
}

Matrix Project(const EmbeddingMatrix& e, const SpectralDecomposition& dec,
               const SubspacePartition& part) {
  return ProjectScaled(e, dec, part, false);
}

std::vector<SpectrumRow> SpectrumReport(const SpectralDecomposition& dec) {
  std::vector<SpectrumRow> rows(dec.dim());
  const double top = dec.dim() ? dec.spectrum[0] : 0.0;
  const double total = dec.spectrum.sum();
  double running = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double s = dec.spectrum[static_cast<Eigen::Index>(i)];
    running += s;
    rows[i].index = i;
    rows[i].normalized = top > 0.0 ? s / top : 0.0;
    rows[i].cumulative_energy = total > 0.0 ? std::min(1.0, running / total) : 1.0;
  }
  if (!rows.empty()) rows.back().cumulative_energy = 1.0;
  return rows;
}

void WriteSpectrumCsv(std::ostream& os, const std::vector<SpectrumRow>& rows) {
  os << "index,normalized,cumulative_energy\n";
  os << std::setprecision(10);
  for (const auto& r : rows) {
    os << r.index << ',' << r.normalized << ',' << r.cumulative_energy << '\n';
  }
}

EcdfReport CosineEcdf(const Matrix& rows, std::size_t sample_pairs,
                      std::uint64_t seed) {
  if (sample_pairs < 1) throw ValidationError("ecdf: sample_pairs must be >= 1");
  const auto n = rows.rows();
  if (n < 2) throw ValidationError("ecdf: need at least 2 rows");

  std::vector<double> norms(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    norms[static_cast<std::size_t>(i)] = rows.row(i).cast<double>().norm();
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  std::uniform_int_distribution<Eigen::Index> second(0, n - 2);
  EcdfReport report;
  std::vector<double> sims;
  sims.reserve(sample_pairs);
  for (std::size_t s = 0; s < sample_pairs; ++s) {
    const Eigen::Index i = first(rng);
    Eigen::Index j = second(rng);
    if (j >= i) ++j;
    const double ni = norms[static_cast<std::size_t>(i)];
    const double nj = norms[static_cast<std::size_t>(j)];
    if (ni == 0.0 || nj == 0.0) {
      ++report.pairs_skipped;
      continue;
    }
    const double dot = rows.row(i).cast<double>().dot(rows.row(j).cast<double>());
    sims.push_back(std::clamp(dot / (ni * nj), -1.0, 1.0));
  }
  if (report.pairs_skipped > 0) {
    spdlog::warn("ecdf: skipped {} pairs touching zero-norm rows",
                 report.pairs_skipped);
  }
  report.pairs_used = sims.size();
  std::sort(sims.begin(), sims.end());
  const double total = static_cast<double>(sims.size());
  for (std::size_t i = 0; i < sims.size(); ++i) {
    if (i + 1 < sims.size() && sims[i + 1] == sims[i]) continue;
    report.points.push_back({sims[i], static_cast<double>(i + 1) / total});
  }
  return report;
}

double EcdfAt(const EcdfReport& report, double x) {
  auto it = std::upper_bound(
      report.points.begin(), report.points.end(), x,
      [](double v, const EcdfPoint& p) { return v < p.similarity; });
  if (it == report.points.begin()) return 0.0;
  return std::prev(it)->fraction;
}

void WriteEcdfCsv(std::ostream& os, const EcdfReport& report) {
  os << "similarity,cumulative_fraction\n";
  os << std::setprecision(10);
  for (const auto& p : report.points) {
    os << p.similarity << ',' << p.fraction << '\n';
  }
}

void SaveDecomposition(const SpectralDecomposition& dec,
                       const std::filesystem::path& stem) {
  TensorArchive ar;
  ar.Put("mean", MatrixD(dec.mean.transpose()));
  ar.Put("basis", dec.basis);
  ar.Put("spectrum", MatrixD(dec.spectrum.transpose()));
  ar.meta()["kind"] = "spectral_decomposition";
  ar.meta()["dim"] = dec.dim();
  ar.Save(stem);
}

SpectralDecomposition LoadDecomposition(const std::filesystem::path& stem) {
  const auto ar = TensorArchive::Load(stem);
  SpectralDecomposition dec;
  dec.mean = ar.GetDouble("mean").row(0).transpose();
  dec.basis = ar.GetDouble("basis");
  dec.spectrum = ar.GetDouble("spectrum").row(0).transpose();
  if (dec.basis.rows() != dec.mean.size() ||
      dec.basis.cols() != dec.spectrum.size()) {
    throw ValidationError("decomposition file has inconsistent shapes");
  }
  return dec;
}

}  // namespace nullfuse
