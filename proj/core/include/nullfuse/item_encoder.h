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

#ifndef NULLFUSE_ITEM_ENCODER_H_
#define NULLFUSE_ITEM_ENCODER_H_

#include <string>
#include <utility>
#include <vector>

#include "nullfuse/optim.h"
#include "nullfuse/tensor_archive.h"
#include "nullfuse/types.h"

namespace nullfuse {

/// Trainable scalar counts, by block.
struct ParameterCount {
  std::vector<std::pair<std::string, std::size_t>> blocks;

  void Add(std::string name, std::size_t n) {
    blocks.emplace_back(std::move(name), n);
  }
  std::size_t Of(const std::string& name) const;
  std::size_t total() const;
};

/// Source of the N x d item embedding matrix consumed by a backbone. The
/// backbone only ever sees Embeddings() and hands back a dense gradient, so
/// swapping strategies never touches backbone code.
class ItemEncoder {
 public:
  virtual ~ItemEncoder() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t n_items() const = 0;
  virtual std::size_t dim() const = 0;

  virtual const Matrix& Embeddings() const = 0;

  /// Extra loss owned by the encoder (already scaled by its coefficient).
  /// Adds d(loss)/d(embeddings) into `grad_embeddings`; private gradients are
  /// consumed by the next ApplyGradient.
  virtual double AuxiliaryLoss(Matrix& grad_embeddings) {
    (void)grad_embeddings;
    return 0.0;
  }

  /// Routes a gradient w.r.t. Embeddings() into trainable state and refreshes
  /// the embedding cache. Throws NumericalError on non-finite input, leaving
  /// the encoder unchanged.
  virtual void ApplyGradient(const Matrix& grad_embeddings,
                             Optimizer& opt) = 0;

  virtual ParameterCount Trainable() const = 0;

  virtual void Save(TensorArchive& archive) const = 0;
  virtual void Load(const TensorArchive& archive) = 0;
};

}  // namespace nullfuse

#endif  // NULLFUSE_ITEM_ENCODER_H_
