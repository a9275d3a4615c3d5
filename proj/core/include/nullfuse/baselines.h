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

// Item-embedding strategies compared against null-space fusion: free ID
// tables (random or PCA-initialized), MLP adapters over raw or whitened
// language embeddings, and cosine reconstruction regularizers.

#ifndef NULLFUSE_BASELINES_H_
#define NULLFUSE_BASELINES_H_

#include <cstdint>
#include <memory>
#include <string>

#include "nullfuse/corpus.h"
#include "nullfuse/fusion.h"
#include "nullfuse/item_encoder.h"
#include "nullfuse/nn.h"
#include "nullfuse/spectra.h"

namespace nullfuse {

enum class StrategyKind {
  kRandomId,
  kLlmInit,
  kAdaptiveProjection,
  kWhitenAdapter,
  kRlmrecCon,
  kRlmrecGen,
  kAlphaFuse,
};

std::string ToString(StrategyKind kind);
StrategyKind ParseStrategyKind(const std::string& s);

struct StrategySpec {
  StrategyKind kind = StrategyKind::kAlphaFuse;
  /// Item embedding dim for non-fusion kinds; fusion derives d_s + d_n from
  /// the partition.
  std::size_t dim = 32;
  /// Adapter / mapper hidden width; 0 means 4 * dim.
  std::size_t adapter_hidden = 0;
  /// Regularizer weight, rlmrec kinds only.
  double reg_coef = 0.1;
  std::uint64_t seed = 22;

  // Fusion-only knobs. The "w/o" ablations flip these.
  FusionOptions fusion;
  bool standardize = true;

  std::size_t hidden() const { return adapter_hidden ? adapter_hidden : 4 * dim; }
  void Validate() const;
};

/// Free N x d table trained directly.
class FreeTable final : public ItemEncoder {
 public:
  FreeTable(std::string kind, Matrix init);

  std::string kind() const override { return kind_; }
  std::size_t n_items() const override { return table_.rows(); }
  std::size_t dim() const override { return table_.cols(); }
  const Matrix& Embeddings() const override { return table_; }
  void ApplyGradient(const Matrix& grad_embeddings, Optimizer& opt) override;
  ParameterCount Trainable() const override;
  void Save(TensorArchive& archive) const override;
  void Load(const TensorArchive& archive) override;

 private:
  std::string kind_;
  Matrix table_;
};

/// Frozen input features pushed through a trainable 2-layer MLP.
class AdapterEncoder final : public ItemEncoder {
 public:
  AdapterEncoder(std::string kind, Matrix features, std::size_t hidden,
                 std::size_t dim, std::uint64_t seed);

  std::string kind() const override { return kind_; }
  std::size_t n_items() const override { return features_.rows(); }
  std::size_t dim() const override { return output_.cols(); }
  const Matrix& Embeddings() const override { return output_; }
  void ApplyGradient(const Matrix& grad_embeddings, Optimizer& opt) override;
  ParameterCount Trainable() const override;
  void Save(TensorArchive& archive) const override;
  void Load(const TensorArchive& archive) override;

 private:
  void Refresh();

  std::string kind_;
  Matrix features_;
  Mlp2<float> mlp_;
  Mlp2<float>::Cache cache_;
  Matrix output_;
};

/// Mean over rows of (1 - cos(mapped_i, target_i)). Rows where either side
/// has zero norm are skipped and counted in `skipped`. `d_mapped`, when
/// given, receives the gradient (same shape as `mapped`).
double CosineReconstructionPenalty(const Matrix& mapped, const Matrix& target,
                                   Matrix* d_mapped,
                                   std::size_t* skipped = nullptr);

inline double RegularizedLoss(double base_loss, double penalty, double coef) {
  return base_loss + coef * penalty;
}

/// Random ID table plus an MLP mapper tying it to language embeddings.
/// rlmrec_con maps IDs into the language space; rlmrec_gen maps language
/// embeddings into the ID space.
class RlmrecEncoder final : public ItemEncoder {
 public:
  RlmrecEncoder(StrategyKind kind, Matrix id_init, Matrix language,
                std::size_t hidden, double coef, std::uint64_t seed);

  std::string kind() const override;
  std::size_t n_items() const override { return table_.rows(); }
  std::size_t dim() const override { return table_.cols(); }
  const Matrix& Embeddings() const override { return table_; }
  double AuxiliaryLoss(Matrix& grad_embeddings) override;
  void ApplyGradient(const Matrix& grad_embeddings, Optimizer& opt) override;
  ParameterCount Trainable() const override;
  void Save(TensorArchive& archive) const override;
  void Load(const TensorArchive& archive) override;

  double last_penalty() const { return last_penalty_; }

 private:
  StrategyKind kind_;
  Matrix table_;
  Matrix language_;
  Mlp2<float> mapper_;
  Mlp2<float> mapper_grad_;
  double coef_;
  double last_penalty_ = 0.0;
};

/// Random standard-normal N x d table.
Matrix RandomTable(std::size_t n_items, std::size_t dim, std::uint64_t seed);

/// Top-`dim` PCA projection of the centered embeddings.
Matrix PcaTable(const EmbeddingMatrix& e, const SpectralDecomposition& dec,
                std::size_t dim);

/// Full-rank whitening of the centered embeddings.
Matrix WhitenFull(const EmbeddingMatrix& e, const SpectralDecomposition& dec);

std::unique_ptr<ItemEncoder> MakeItemEncoder(const StrategySpec& spec,
                                             const EmbeddingMatrix& e,
                                             const SpectralDecomposition& dec,
                                             const SubspacePartition& part);

/// Trainable scalars of the item encoder plus `backbone_params`. Excludes
/// frozen language blocks.
ParameterCount CountTrainable(const StrategySpec& spec, std::size_t n_items,
                              std::size_t language_dim,
                              const SubspacePartition& part,
                              std::size_t backbone_params);

}  // namespace nullfuse

#endif  // NULLFUSE_BASELINES_H_
