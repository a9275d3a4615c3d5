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

#ifndef NULLFUSE_FUSION_H_
#define NULLFUSE_FUSION_H_

#include <cstdint>
#include <filesystem>
#include <string>

#include "nullfuse/item_encoder.h"
#include "nullfuse/types.h"

namespace nullfuse {

enum class IdInit { kZeros, kGaussian, kResidual };

std::string ToString(IdInit init);
IdInit ParseIdInit(const std::string& s);

struct FusionOptions {
  IdInit init = IdInit::kGaussian;
  std::uint64_t seed = 22;
  /// When false the rich block gets a trainable offset (the "w/o Frozen"
  /// ablation); the frozen language block itself still never changes.
  bool freeze_language = true;
  /// When false the ID block is never updated (frozen language baseline).
  bool train_ids = true;
};

/// Item table whose first d_s coordinates come from a frozen language block
/// and whose last d_n coordinates are language null columns plus a trainable
/// ID block:
///
///   fused = language + [0 | E_ID]
///
/// For zeros/gaussian init the null columns of the language block are zeroed
/// so E_ID owns them outright. For residual init E_ID starts from those
/// columns and they are then zeroed, so the initial fused table equals the
/// standardized input.
class FusedTable final : public ItemEncoder {
 public:
  FusedTable(Matrix language_block, std::size_t semantic_dim,
             std::size_t null_dim, const FusionOptions& options);

  std::string kind() const override { return "alphafuse"; }
  std::size_t n_items() const override {
    return static_cast<std::size_t>(language_.rows());
  }
  std::size_t dim() const override { return semantic_dim_ + null_dim_; }
  std::size_t semantic_dim() const { return semantic_dim_; }
  std::size_t null_dim() const { return null_dim_; }
  const FusionOptions& options() const { return options_; }

  const Matrix& language_block() const { return language_; }
  const Matrix& id_block() const { return id_; }
  /// Checksum of the frozen language block bytes.
  std::uint64_t LanguageChecksum() const { return HashMatrix(language_); }

  /// Fused embedding of one item. Throws ValidationError when out of range.
  Matrix Fuse(std::size_t item) const;
  const Matrix& Embeddings() const override { return fused_; }

  /// Only E_ID (and the rich offset when unfrozen) change; the first d_s
  /// gradient columns are otherwise discarded.
  void ApplyGradient(const Matrix& grad_embeddings, Optimizer& opt) override;

  ParameterCount Trainable() const override;

  void Save(TensorArchive& archive) const override;
  void Load(const TensorArchive& archive) override;

  /// Two binary matrices plus manifest {d_s, d_n, init_mode, seed}.
  void SaveTable(const std::filesystem::path& stem) const;
  static FusedTable LoadTable(const std::filesystem::path& stem);

 private:
  void Refresh();

  Matrix language_;  // N x (d_s + d_n), frozen
  Matrix id_;        // N x d_n
  Matrix rich_offset_;  // N x d_s, only when !freeze_language
  Matrix fused_;
  std::size_t semantic_dim_;
  std::size_t null_dim_;
  FusionOptions options_;
};

}  // namespace nullfuse

#endif  // NULLFUSE_FUSION_H_
