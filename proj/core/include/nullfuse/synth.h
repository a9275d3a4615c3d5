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

#ifndef NULLFUSE_SYNTH_H_
#define NULLFUSE_SYNTH_H_

#include <cstdint>

#include <nlohmann/json.hpp>

#include "nullfuse/corpus.h"

namespace nullfuse {

/// Synthetic corpus where language embeddings carry a cluster signal and
/// interactions additionally depend on a hidden per-item group that has no
/// footprint in the language embeddings.
///
/// Item i belongs to cluster i % clusters. Its embedding is the cluster
/// centroid plus within-cluster jitter, both inside a random
/// `semantic_rank`-dimensional subspace of R^language_dim, plus isotropic
/// noise of scale `noise`. Each item also gets a hidden group in
/// [0, groups). A user walks a Markov chain: the next cluster is
/// (current + 1) % clusters with probability `p_cluster` (else uniform), and
/// within it an item of the current group is chosen with probability
/// `p_group` (else uniform over the cluster).
struct SynthConfig {
  std::size_t n_items = 2000;
  std::size_t n_users = 3000;
  std::size_t clusters = 4;
  std::size_t language_dim = 64;
  std::size_t semantic_rank = 3;
  std::size_t groups = 25;
  std::size_t min_length = 8;
  std::size_t max_length = 16;
  double noise = 0.05;
  double jitter = 0.3;
  double p_cluster = 0.9;
  double p_group = 0.8;
  std::uint64_t seed = 22;

  void Validate() const;
  nlohmann::json ToJson() const;
  static SynthConfig FromJson(const nlohmann::json& j);
  bool operator==(const SynthConfig&) const = default;
};

struct SynthCorpus {
  EmbeddingMatrix embeddings;
  ItemCatalog catalog;
  InteractionDataset interactions;
  std::vector<std::size_t> cluster;  // per item
  std::vector<std::size_t> group;    // per item, hidden
};

SynthCorpus SynthGenerate(const SynthConfig& config, std::size_t max_history);

}  // namespace nullfuse

#endif  // NULLFUSE_SYNTH_H_
