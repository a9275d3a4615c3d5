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

#ifndef NULLFUSE_CONFIG_H_
#define NULLFUSE_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nullfuse/baselines.h"
#include "nullfuse/corpus.h"
#include "nullfuse/diffrec.h"
#include "nullfuse/seqrec.h"
#include "nullfuse/spectra.h"
#include "nullfuse/synth.h"

namespace nullfuse {

enum class Backbone { kSasRec, kDreamRec };

std::string ToString(Backbone b);
Backbone ParseBackbone(const std::string& s);

struct DataConfig {
  std::string embeddings;
  std::string interactions;
  std::string catalog;  // optional
  std::optional<SynthConfig> synth;  // replaces the files when present
};

struct SpectralConfig {
  std::optional<double> threshold = 0.1;
  ThresholdScale scale = ThresholdScale::kSquared;
  std::optional<std::size_t> semantic_dim;  // direct assignment
  std::optional<std::size_t> null_dim;      // none keeps the whole null space
  bool clip = true;
};

struct DiffusionConfig {
  std::size_t steps = 100;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::size_t sample_steps = 10;
  std::size_t hidden = 0;  // 0 means 4 * dim
  Sampler sampler = Sampler::kDdim;
  Prediction prediction = Prediction::kX0;
};

struct EvalConfig {
  std::vector<std::size_t> ks = {10, 20};
  bool mask_history = false;
  double head_quantile = 0.2;
};

/// Everything needed to reproduce one run. Serializes to a single JSON
/// document; parsing rejects unknown keys.
struct RunConfig {
  std::string name = "run";
  DataConfig data;
  std::string output_dir;
  Backbone backbone = Backbone::kSasRec;
  StrategySpec strategy;
  SplitSpec split;
  SpectralConfig spectral;
  SeqModelConfig model;
  TrainConfig train;
  DiffusionConfig diffusion;
  EvalConfig eval;

  nlohmann::json ToJson() const;
  static RunConfig FromJson(const nlohmann::json& j);
  static RunConfig Load(const std::filesystem::path& path);
  void Save(const std::filesystem::path& path) const;
  /// FNV-1a of the canonical JSON dump.
  std::uint64_t Hash() const;
};

/// Applies a dotted-path override such as "train.lr=0.01" to a config
/// document. Values are parsed as JSON, falling back to a plain string.
void ApplyOverride(nlohmann::json& doc, const std::string& assignment);

}  // namespace nullfuse

#endif  // NULLFUSE_CONFIG_H_
