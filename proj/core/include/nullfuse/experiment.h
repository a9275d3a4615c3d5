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

// End-to-end runs: data preparation, training, evaluation, run-directory
// persistence, and multi-run comparison tables.

#ifndef NULLFUSE_EXPERIMENT_H_
#define NULLFUSE_EXPERIMENT_H_

#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "nullfuse/config.h"
#include "nullfuse/eval.h"

namespace nullfuse {

struct PreparedData {
  EmbeddingMatrix embeddings;
  ItemCatalog catalog;
  InteractionDataset dataset;  // with splits
  Segmentation segmentation;
  SpectralDecomposition decomposition;
};

/// Loads or synthesizes the corpus, builds splits and decomposes the
/// embeddings.
PreparedData PrepareData(const RunConfig& config);

/// Partition implied by the spectral config; `clip = false` keeps the whole
/// null space.
SubspacePartition ResolvePartition(const SpectralConfig& spectral,
                                   const SpectralDecomposition& dec);

struct RunOutcome {
  EvalReport test;
  std::vector<EpochLog> log;
  ParameterCount parameters;
  std::size_t item_dim = 0;
  std::uint64_t language_checksum_before = 0;
  std::uint64_t language_checksum_after = 0;
  double wall_seconds = 0.0;
};

/// Trains and evaluates one config. When `config.output_dir` is set the run
/// directory receives config.json, splits.json, train_log.csv, checkpoint
/// tensors and report.{json,csv}.
RunOutcome RunExperiment(const RunConfig& config,
                         const PreparedData* prepared = nullptr);

/// Re-evaluates a run directory on "valid" or "test".
EvalReport EvaluateRunDirectory(const std::filesystem::path& run_dir,
                                const std::string& split, bool mask_history);

struct ComparisonRow {
  std::string name;
  std::string strategy;
  std::string backbone;
  EvalReport report;
  std::size_t trainable = 0;
  double wall_seconds = 0.0;
};

/// Runs every config (which must share data and split settings).
std::vector<ComparisonRow> Compare(const std::vector<RunConfig>& configs);

/// One row per run; the best value per metric column is suffixed with '*'.
void WriteComparisonCsv(std::ostream& os, const std::vector<ComparisonRow>& rows,
                        bool include_wall_time = true);

/// Variants {full, w/o-Frozen, w/o-Clip, w/o-Stand} of a fusion config.
std::vector<RunConfig> AblationConfigs(const RunConfig& base);

}  // namespace nullfuse

#endif  // NULLFUSE_EXPERIMENT_H_
