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

#include "nullfuse/experiment.h"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <limits>
#include <variant>

#include <spdlog/spdlog.h>

namespace nullfuse {

namespace fs = std::filesystem;

PreparedData PrepareData(const RunConfig& config) {
  PreparedData out;
  const std::size_t window = config.model.max_history;
  if (config.data.synth) {
    auto corpus = SynthGenerate(*config.data.synth, window);
    out.embeddings = std::move(corpus.embeddings);
    out.catalog = std::move(corpus.catalog);
    out.dataset = std::move(corpus.interactions);
  } else {
    if (config.data.embeddings.empty() || config.data.interactions.empty()) {
      throw ValidationError("data: embeddings and interactions paths required");
    }
    out.embeddings = LoadEmbeddings(config.data.embeddings);
    out.catalog = config.data.catalog.empty()
                      ? ItemCatalog::Identity(out.embeddings.n_items())
                      : LoadCatalog(config.data.catalog);
    if (out.catalog.size() != out.embeddings.n_items()) {
      throw ValidationError("data: catalog has " +
                            std::to_string(out.catalog.size()) +
                            " items, embeddings have " +
                            std::to_string(out.embeddings.n_items()));
    }
    out.dataset = LoadInteractions(config.data.interactions, out.catalog, window);
  }
  out.dataset = BuildSplits(out.dataset, config.split);
  out.segmentation = SegmentHeadTail(out.dataset, config.eval.head_quantile);
  out.decomposition = Decompose(ComputeStats(out.embeddings));
  return out;
}

SubspacePartition ResolvePartition(const SpectralConfig& spectral,
                                   const SpectralDecomposition& dec) {
  if (spectral.semantic_dim) {
    const std::size_t ds = *spectral.semantic_dim;
    if (ds >= dec.dim()) {
      throw ValidationError("partition: semantic_dim must be < d_l");
    }
    const std::size_t rest = dec.dim() - ds;
    const std::size_t dn = spectral.clip ? spectral.null_dim.value_or(rest) : rest;
    return PartitionDirect(dec, ds, dn);
  }
  if (!spectral.threshold) {
    throw ValidationError("partition: need a threshold or a semantic_dim");
  }
  return PartitionByThreshold(
      dec, *spectral.threshold,
      spectral.clip ? spectral.null_dim : std::optional<std::size_t>(),
      spectral.scale);
}

namespace {

// A trained backbone of either kind.
using TrainedModel = std::variant<SeqModelParams<float>, DenoiserParams<float>>;

DiffusionSchedule ScheduleFor(const RunConfig& c) {
  return DiffusionSchedule::Linear(c.diffusion.steps, c.diffusion.beta_start,
                                   c.diffusion.beta_end);
}

std::size_t BackboneParameterCount(const TrainedModel& b) {
  return std::visit([](const auto& p) { return p.ParameterCount(); }, b);
}

Scorer MakeScorer(const RunConfig& config, const TrainedModel& model,
                  const ItemEncoder& encoder,
                  const DiffusionSchedule& schedule) {
  const Matrix* emb = &encoder.Embeddings();
  if (const auto* seq = std::get_if<SeqModelParams<float>>(&model)) {
    return [seq, emb](const Example& ex, std::vector<float>& scores) {
      scores = ScoreAll(*seq, *emb, ex.history);
    };
  }
  const auto* den = &std::get<DenoiserParams<float>>(model);
  // Each query draws its initial noise from (seed + user index).
  const std::uint64_t seed = config.train.seed;
  const std::size_t steps = config.diffusion.sample_steps;
  const Sampler sampler = config.diffusion.sampler;
  return [den, emb, &schedule, seed, steps, sampler](const Example& ex,
                                                     std::vector<float>& scores) {
    scores = ScoreAllGenerative(*den, *emb, ex.history, schedule, steps, sampler,
                                seed + ex.user);
  };
}

SubspacePartition PartitionFor(const RunConfig& config,
                               const SpectralDecomposition& dec) {
  if (config.strategy.kind != StrategyKind::kAlphaFuse) return {};
  return ResolvePartition(config.spectral, dec);
}

EvalReport EvaluateSplit(const RunConfig& config, const PreparedData& data,
                         const TrainedModel& model, const ItemEncoder& encoder,
                         SplitLabel split, bool mask_history) {
  const auto schedule = ScheduleFor(config);
  EvalOptions opts;
  opts.ks = config.eval.ks;
  opts.mask_history = mask_history;
  auto report = Evaluate(MakeScorer(config, model, encoder, schedule),
                         data.dataset.Examples(split), encoder.n_items(),
                         &data.segmentation, opts);
  report.manifest = {{"name", config.name},
                     {"strategy", ToString(config.strategy.kind)},
                     {"backbone", ToString(config.backbone)},
                     {"seed", config.train.seed},
                     {"config_hash", HexDigest(config.Hash())},
                     {"split", split == SplitLabel::kTest ? "test" : "valid"},
                     {"mask_history", mask_history}};
  return report;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

}  // namespace

RunOutcome RunExperiment(const RunConfig& config, const PreparedData* prepared) {
  const auto t0 = std::chrono::steady_clock::now();
  std::optional<PreparedData> local;
  if (!prepared) {
    local = PrepareData(config);
    prepared = &*local;
  }
  const PreparedData& data = *prepared;
  const auto part = PartitionFor(config, data.decomposition);
  auto encoder = MakeItemEncoder(config.strategy, data.embeddings,
                                 data.decomposition, part);
  auto* fused = dynamic_cast<FusedTable*>(encoder.get());

  RunOutcome out;
  out.item_dim = encoder->dim();
  if (fused) out.language_checksum_before = fused->LanguageChecksum();
  spdlog::info("run '{}': {} on {}, item dim {}", config.name,
               ToString(config.strategy.kind), ToString(config.backbone),
               out.item_dim);

  TrainedModel model;
  if (config.backbone == Backbone::kSasRec) {
    SeqModelConfig mc = config.model;
    mc.dim = encoder->dim();
    auto result = TrainSeqRec(SeqModelParams<float>::Init(mc, config.train.seed),
                              *encoder, data.dataset, config.train);
    out.log = std::move(result.log);
    model = std::move(result.params);
  } else {
    DenoiserConfig dc;
    dc.dim = encoder->dim();
    dc.hidden = config.diffusion.hidden ? config.diffusion.hidden : 4 * dc.dim;
    dc.steps = config.diffusion.steps;
    dc.max_history = config.model.max_history;
    dc.prediction = config.diffusion.prediction;
    DiffusionTrainConfig tc;
    tc.base = config.train;
    tc.sample_steps = config.diffusion.sample_steps;
    tc.sampler = config.diffusion.sampler;
    auto result = TrainDenoiser(DenoiserParams<float>::Init(dc, config.train.seed),
                                *encoder, data.dataset, ScheduleFor(config), tc);
    out.log = std::move(result.log);
    model = std::move(result.params);
  }
  if (fused) out.language_checksum_after = fused->LanguageChecksum();

  out.parameters = encoder->Trainable();
  out.parameters.Add("backbone", BackboneParameterCount(model));
  out.test = EvaluateSplit(config, data, model, *encoder, SplitLabel::kTest,
                           config.eval.mask_history);
  out.test.manifest["trainable_parameters"] = out.parameters.total();
  out.test.manifest["item_dim"] = out.item_dim;
  if (fused) {
    out.test.manifest["language_checksum"] =
        HexDigest(out.language_checksum_after);
    out.test.manifest["semantic_dim"] = fused->semantic_dim();
    out.test.manifest["null_dim"] = fused->null_dim();
  }

  if (!config.output_dir.empty()) {
    const fs::path dir = config.output_dir;
    fs::create_directories(dir);
    config.Save(dir / "config.json");
    WriteText(dir / "splits.json", data.dataset.SplitsToJson().dump(2) + "\n");
    WriteText(dir / "train_log.csv", FormatTrainLog(out.log));
    TensorArchive ckpt;
    encoder->Save(ckpt);
    std::visit(
        [&ckpt](const auto& p) {
          if constexpr (std::is_same_v<std::decay_t<decltype(p)>,
                                       SeqModelParams<float>>) {
            SaveSeqModel(p, ckpt);
          } else {
            SaveDenoiser(p, ckpt);
          }
        },
        model);
    ckpt.meta()["backbone"] = ToString(config.backbone);
    ckpt.Save(dir / "checkpoint");
    WriteText(dir / "report.json", out.test.ToJson().dump(2) + "\n");
    std::ofstream csv(dir / "report.csv", std::ios::binary);
    out.test.WriteCsv(csv);
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

EvalReport EvaluateRunDirectory(const fs::path& run_dir, const std::string& split,
                                bool mask_history) {
  SplitLabel label;
  if (split == "test") {
    label = SplitLabel::kTest;
  } else if (split == "valid") {
    label = SplitLabel::kValid;
  } else {
    throw ValidationError("eval: split must be 'valid' or 'test'");
  }
  const auto config = RunConfig::Load(run_dir / "config.json");
  const auto data = PrepareData(config);
  {
    std::ifstream in(run_dir / "splits.json");
    if (!in) throw ValidationError("eval: missing splits.json in " + run_dir.string());
    nlohmann::json stored;
    in >> stored;
    if (stored != data.dataset.SplitsToJson()) {
      throw ValidationError("eval: rebuilt splits differ from splits.json");
    }
  }
  const auto part = PartitionFor(config, data.decomposition);
  auto encoder = MakeItemEncoder(config.strategy, data.embeddings,
                                 data.decomposition, part);
  const auto ckpt = TensorArchive::Load(run_dir / "checkpoint");
  encoder->Load(ckpt);
  TrainedModel model;
  if (config.backbone == Backbone::kSasRec) {
    model = LoadSeqModel(ckpt);
    if (std::get<SeqModelParams<float>>(model).config.dim != encoder->dim()) {
      throw ValidationError("eval: checkpoint dim differs from item table dim");
    }
  } else {
    model = LoadDenoiser(ckpt);
    if (std::get<DenoiserParams<float>>(model).config.dim != encoder->dim()) {
      throw ValidationError("eval: checkpoint dim differs from item table dim");
    }
  }
  return EvaluateSplit(config, data, model, *encoder, label, mask_history);
}

std::vector<ComparisonRow> Compare(const std::vector<RunConfig>& configs) {
  if (configs.size() < 2) throw ValidationError("compare: need at least 2 configs");
  const auto& first = configs.front();
  for (const auto& c : configs) {
    if (c.ToJson().at("data") != first.ToJson().at("data") ||
        c.ToJson().at("split") != first.ToJson().at("split") ||
        c.model.max_history != first.model.max_history ||
        c.eval.head_quantile != first.eval.head_quantile) {
      throw ValidationError("compare: run '" + c.name +
                            "' uses a different dataset or split");
    }
  }
  const auto data = PrepareData(first);
  std::vector<ComparisonRow> rows;
  for (const auto& c : configs) {
    auto outcome = RunExperiment(c, &data);
    ComparisonRow row;
    row.name = c.name;
    row.strategy = ToString(c.strategy.kind);
    row.backbone = ToString(c.backbone);
    row.report = std::move(outcome.test);
    row.trainable = outcome.parameters.total();
    row.wall_seconds = outcome.wall_seconds;
    rows.push_back(std::move(row));
  }
  return rows;
}

void WriteComparisonCsv(std::ostream& os, const std::vector<ComparisonRow>& rows,
                        bool include_wall_time) {
  if (rows.empty()) return;
  const auto ks = rows.front().report.ks;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> values(rows.size());
  for (std::size_t k : ks) {
    for (const char* m : {"ndcg", "mrr", "recall"}) {
      columns.push_back(std::string(m) + "@" + std::to_string(k));
    }
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k : ks) {
      const auto& m = rows[r].report.Overall(k);
      values[r].insert(values[r].end(), {m.ndcg, m.mrr, m.recall});
    }
  }
  std::vector<double> best(columns.size(), -1.0);
  for (const auto& v : values) {
    for (std::size_t c = 0; c < v.size(); ++c) best[c] = std::max(best[c], v[c]);
  }
  std::size_t fewest = std::numeric_limits<std::size_t>::max();
  for (const auto& r : rows) fewest = std::min(fewest, r.trainable);

  os << "name,strategy,backbone,trainable";
  for (const auto& c : columns) os << ',' << c;
  if (include_wall_time) os << ",wall_seconds";
  os << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    os << row.name << ',' << row.strategy << ',' << row.backbone << ','
       << row.trainable << (row.trainable == fewest ? "*" : "");
    for (std::size_t c = 0; c < columns.size(); ++c) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(6) << values[r][c];
      os << ',' << cell.str() << (values[r][c] == best[c] ? "*" : "");
    }
    if (include_wall_time) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(2) << row.wall_seconds;
      os << ',' << cell.str();
    }
    os << '\n';
  }
}

std::vector<RunConfig> AblationConfigs(const RunConfig& base) {
  if (base.strategy.kind != StrategyKind::kAlphaFuse) {
    throw ValidationError("ablate: base config must use the alphafuse strategy");
  }
  auto variant = [&base](const std::string& label, const std::string& slug) {
    RunConfig c = base;
    c.name = label;
    if (!base.output_dir.empty()) {
      c.output_dir = (fs::path(base.output_dir) / slug).string();
    }
    return c;
  };
  RunConfig full = variant("full", "full");
  RunConfig no_frozen = variant("w/o-Frozen", "wo_frozen");
  no_frozen.strategy.fusion.freeze_language = false;
  RunConfig no_clip = variant("w/o-Clip", "wo_clip");
  no_clip.spectral.clip = false;
  RunConfig no_stand = variant("w/o-Stand", "wo_stand");
  no_stand.strategy.standardize = false;
  return {full, no_frozen, no_clip, no_stand};
}

}  // namespace nullfuse
