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

// nullfuse command-line driver.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "nullfuse/baselines.h"
#include "nullfuse/config.h"
#include "nullfuse/corpus.h"
#include "nullfuse/experiment.h"
#include "nullfuse/spectra.h"
#include "nullfuse/synth.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nullfuse;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

std::ofstream OpenOut(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

void WriteCorpus(const fs::path& dir, const EmbeddingMatrix& e,
                 const ItemCatalog& catalog, const InteractionDataset& ds) {
  fs::create_directories(dir);
  SaveEmbeddings(e, dir / "embeddings.f32");
  SaveCatalog(catalog, dir / "catalog.txt");
  SaveInteractions(ds, catalog, dir / "interactions.tsv");
}

// Options shared by train / compare / ablate.
struct RunFlags {
  std::vector<std::string> sets;
  std::string backbone, strategy, out;
  double reg_coef = -1.0;
  std::int64_t seed = -1;
};

void AddRunFlags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--set", f.sets, "Config override key.path=value (repeatable)");
  cmd->add_option("--backbone", f.backbone, "sasrec | dreamrec");
  cmd->add_option("--strategy", f.strategy,
                  "random_id | llm_init | adaptive_projection | whiten_adapter | "
                  "rlmrec_con | rlmrec_gen | alphafuse");
  cmd->add_option("--reg-coef", f.reg_coef, "Regularizer weight for rlmrec kinds");
  cmd->add_option("--seed", f.seed, "Seed for training, strategy and fusion");
}

RunConfig LoadRunConfig(const std::string& path, const RunFlags& f) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read config " + path);
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw ValidationError("config " + path + ": " + e.what());
    }
  }
  if (!f.backbone.empty()) doc["backbone"] = f.backbone;
  if (!f.strategy.empty()) doc["strategy"]["kind"] = f.strategy;
  if (f.reg_coef >= 0.0) doc["strategy"]["reg_coef"] = f.reg_coef;
  if (f.seed >= 0) {
    doc["train"]["seed"] = f.seed;
    doc["strategy"]["seed"] = f.seed;
    doc["strategy"]["fusion"]["seed"] = f.seed;
  }
  for (const auto& s : f.sets) ApplyOverride(doc, s);
  return RunConfig::FromJson(doc);
}

void PrintReport(const EvalReport& report) {
  for (std::size_t k : report.ks) {
    const auto& m = report.Overall(k);
    std::printf("N@%zu %.4f  M@%zu %.4f  R@%zu %.4f\n", k, m.ndcg, k, m.mrr, k,
                m.recall);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nullfuse: null-space fusion of language and ID item embeddings"};
  app.require_subcommand(1);
  app.fallthrough();
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate and normalize a corpus");
  std::string in_emb, in_cat, in_inter, in_out;
  std::size_t mock_dim = 0, in_window = 10;
  ingest->add_option("--embeddings", in_emb, "Raw f32 matrix with .json sidecar");
  ingest->add_option("--mock-dim", mock_dim,
                     "Generate deterministic mock embeddings of this dim instead");
  ingest->add_option("--catalog", in_cat, "One external id per line")->required();
  ingest->add_option("--interactions", in_inter, "user<TAB>item<TAB>ts")->required();
  ingest->add_option("--window", in_window, "History window L");
  ingest->add_option("--out", in_out, "Output directory")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  std::string synth_config, synth_out;
  SynthConfig sc;
  synth->add_option("--config", synth_config, "SynthConfig JSON");
  synth->add_option("--n-items", sc.n_items);
  synth->add_option("--n-users", sc.n_users);
  synth->add_option("--clusters", sc.clusters);
  synth->add_option("--noise", sc.noise);
  synth->add_option("--seed", sc.seed);
  synth->add_option("--out", synth_out, "Output directory")->required();

  // decompose
  auto* decompose = app.add_subcommand("decompose", "Spectral decomposition");
  std::string dec_emb, dec_out, dec_scale = "squared";
  double dec_threshold = 0.1;
  std::size_t dec_null = 0;
  decompose->add_option("--embeddings", dec_emb)->required();
  decompose->add_option("--threshold", dec_threshold, "On the normalized spectrum");
  decompose->add_option("--scale", dec_scale, "squared | singular");
  decompose->add_option("--null-dim", dec_null, "Clip the null space to this size");
  decompose->add_option("--out", dec_out, "Output stem")->required();

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Spectrum and cosine ECDF reports");
  std::string an_emb, an_out;
  std::size_t an_pairs = 100000;
  std::uint64_t an_seed = 22;
  analyze->add_option("--embeddings", an_emb)->required();
  analyze->add_option("--pairs", an_pairs, "Sampled item pairs");
  analyze->add_option("--seed", an_seed);
  analyze->add_option("--out", an_out, "Output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "Train and test one run");
  std::string train_config;
  RunFlags train_flags;
  train->add_option("--config", train_config, "RunConfig JSON");
  AddRunFlags(train, train_flags);
  train->add_option("--out", train_flags.out, "Run directory");

  // eval
  auto* eval = app.add_subcommand("eval", "Re-evaluate a run directory");
  std::string ev_ckpt, ev_split = "test", ev_out;
  bool ev_mask = false;
  eval->add_option("--checkpoint", ev_ckpt, "Run directory")->required();
  eval->add_option("--split", ev_split, "valid | test");
  eval->add_flag("--mask-history", ev_mask, "Exclude history items from ranking");
  eval->add_option("--out", ev_out, "report.json path");

  // compare
  auto* compare = app.add_subcommand("compare", "Run several configs on one dataset");
  std::vector<std::string> cmp_configs;
  std::string cmp_out;
  bool cmp_no_wall = false;
  RunFlags cmp_flags;
  compare->add_option("--config", cmp_configs, "RunConfig JSON files")->required();
  compare->add_option("--out", cmp_out, "Comparison CSV");
  compare->add_flag("--no-wall-time", cmp_no_wall, "Omit the wall-time column");
  compare->add_option("--set", cmp_flags.sets, "Override applied to every config");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Full vs w/o-Frozen, w/o-Clip, w/o-Stand");
  std::string abl_config, abl_out;
  bool abl_no_wall = false;
  RunFlags abl_flags;
  ablate->add_option("--config", abl_config, "Base alphafuse RunConfig JSON");
  AddRunFlags(ablate, abl_flags);
  ablate->add_option("--out", abl_out, "Ablation CSV");
  ablate->add_flag("--no-wall-time", abl_no_wall, "Omit the wall-time column");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitValidation;
  }
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    if (*ingest) {
      const ItemCatalog catalog = LoadCatalog(in_cat);
      EmbeddingMatrix e;
      if (mock_dim > 0) {
        e = MockEmbeddings(catalog, mock_dim);
      } else if (!in_emb.empty()) {
        e = LoadEmbeddings(in_emb);
      } else {
        throw ValidationError("ingest: give --embeddings or --mock-dim");
      }
      if (e.n_items() != catalog.size()) {
        throw ValidationError("ingest: catalog and embeddings disagree on item count");
      }
      const auto ds = LoadInteractions(in_inter, catalog, in_window);
      WriteCorpus(in_out, e, catalog, ds);
      std::size_t n_inter = 0;
      for (const auto& u : ds.users()) n_inter += u.items.size();
      std::printf("items %zu  dim %zu  users %zu  interactions %zu\n",
                  e.n_items(), e.dim(), ds.users().size(), n_inter);
    } else if (*synth) {
      SynthConfig cfg = sc;
      if (!synth_config.empty()) {
        std::ifstream in(synth_config);
        if (!in) throw ValidationError("cannot read " + synth_config);
        cfg = SynthConfig::FromJson(json::parse(in));
      }
      const auto corpus = SynthGenerate(cfg, 10);
      WriteCorpus(synth_out, corpus.embeddings, corpus.catalog, corpus.interactions);
      OpenOut(fs::path(synth_out) / "synth.json") << cfg.ToJson().dump(2) << "\n";
      std::printf("wrote %zu items, %zu users to %s\n", cfg.n_items, cfg.n_users,
                  synth_out.c_str());
    } else if (*decompose) {
      const auto e = LoadEmbeddings(dec_emb);
      const auto dec = Decompose(ComputeStats(e));
      const auto scale =
          dec_scale == "singular" ? ThresholdScale::kSingular : ThresholdScale::kSquared;
      if (dec_scale != "singular" && dec_scale != "squared") {
        throw ValidationError("unknown scale '" + dec_scale + "'");
      }
      const auto part = PartitionByThreshold(
          dec, dec_threshold,
          dec_null ? std::optional<std::size_t>(dec_null) : std::nullopt, scale);
      SaveDecomposition(dec, dec_out);
      const json summary = {{"d_l", part.full_dim},
                            {"semantic_dim", part.semantic_dim},
                            {"null_dim", part.null_dim},
                            {"threshold", dec_threshold},
                            {"scale", dec_scale}};
      OpenOut(dec_out + ".partition.json") << summary.dump(2) << "\n";
      std::printf("d_l %zu  d_s %zu  d_n %zu\n", part.full_dim, part.semantic_dim,
                  part.null_dim);
    } else if (*analyze) {
      const auto e = LoadEmbeddings(an_emb);
      const auto dec = Decompose(ComputeStats(e));
      const fs::path dir = an_out;
      auto spectrum = OpenOut(dir / "spectrum.csv");
      WriteSpectrumCsv(spectrum, SpectrumReport(dec));
      auto raw = OpenOut(dir / "ecdf_raw.csv");
      WriteEcdfCsv(raw, CosineEcdf(e.data(), an_pairs, an_seed));
      SubspacePartition full;
      full.semantic_dim = dec.dim();
      full.full_dim = dec.dim();
      auto white = OpenOut(dir / "ecdf_standardized.csv");
      WriteEcdfCsv(white, CosineEcdf(Standardize(e, dec, full), an_pairs, an_seed));
      std::printf("wrote spectrum and ECDF reports to %s\n", an_out.c_str());
    } else if (*train) {
      RunConfig cfg = LoadRunConfig(train_config, train_flags);
      if (!train_flags.out.empty()) cfg.output_dir = train_flags.out;
      const auto outcome = RunExperiment(cfg);
      PrintReport(outcome.test);
      std::printf("trainable %zu  item_dim %zu\n", outcome.parameters.total(),
                  outcome.item_dim);
    } else if (*eval) {
      const auto report = EvaluateRunDirectory(ev_ckpt, ev_split, ev_mask);
      if (!ev_out.empty()) OpenOut(ev_out) << report.ToJson().dump(2) << "\n";
      PrintReport(report);
    } else if (*compare) {
      std::vector<RunConfig> configs;
      for (const auto& path : cmp_configs) {
        configs.push_back(LoadRunConfig(path, cmp_flags));
      }
      const auto rows = Compare(configs);
      if (cmp_out.empty()) {
        WriteComparisonCsv(std::cout, rows, !cmp_no_wall);
      } else {
        auto out = OpenOut(cmp_out);
        WriteComparisonCsv(out, rows, !cmp_no_wall);
      }
    } else if (*ablate) {
      const RunConfig base = LoadRunConfig(abl_config, abl_flags);
      const auto rows = Compare(AblationConfigs(base));
      if (abl_out.empty()) {
        WriteComparisonCsv(std::cout, rows, !abl_no_wall);
      } else {
        auto out = OpenOut(abl_out);
        WriteComparisonCsv(out, rows, !abl_no_wall);
      }
    }
  } catch (const NumericalError& e) {
    spdlog::error("{}", e.what());
    return kExitNumerical;
  } catch (const ValidationError& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  }
  return 0;
}
