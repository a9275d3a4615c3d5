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

#include "nullfuse/baselines.h"

#include <cmath>
#include <random>

#include <spdlog/spdlog.h>

namespace nullfuse {

namespace {

// Offsets the mapper's RNG stream from the ID table's.
constexpr std::uint64_t kMapperStream = 0x9e3779b97f4a7c15ULL;

void CheckGradient(const Matrix& grad, const Matrix& like) {
  if (grad.rows() != like.rows() || grad.cols() != like.cols()) {
    throw ValidationError("item encoder: gradient shape mismatch");
  }
  if (!grad.allFinite()) {
    throw NumericalError("item encoder: non-finite gradient rejected");
  }
}

void UpdateMlp(const std::string& prefix, Mlp2<float>& mlp,
               Mlp2<float>& grad, Optimizer& opt) {
  auto p = mlp.Blocks(prefix);
  auto g = grad.Blocks(prefix);
  for (std::size_t i = 0; i < p.size(); ++i) {
    opt.Update(p[i].name, *p[i].value, *g[i].value);
  }
}

void PutMlp(TensorArchive& ar, const std::string& prefix,
            const Mlp2<float>& mlp) {
  for (const auto& b : const_cast<Mlp2<float>&>(mlp).Blocks(prefix)) {
    ar.Put(b.name, *b.value);
  }
}

void GetMlp(const TensorArchive& ar, const std::string& prefix,
            Mlp2<float>& mlp) {
  for (auto& b : mlp.Blocks(prefix)) {
    const Matrix& src = ar.GetFloat(b.name);
    if (src.rows() != b.value->rows() || src.cols() != b.value->cols()) {
      throw ValidationError("checkpoint: shape mismatch for " + b.name);
    }
    *b.value = src;
  }
}

std::size_t MlpCount(std::size_t in, std::size_t hidden, std::size_t out) {
  return in * hidden + hidden + hidden * out + out;
}

}  // namespace

std::string ToString(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kRandomId: return "random_id";
    case StrategyKind::kLlmInit: return "llm_init";
    case StrategyKind::kAdaptiveProjection: return "adaptive_projection";
    case StrategyKind::kWhitenAdapter: return "whiten_adapter";
    case StrategyKind::kRlmrecCon: return "rlmrec_con";
    case StrategyKind::kRlmrecGen: return "rlmrec_gen";
    case StrategyKind::kAlphaFuse: return "alphafuse";
  }
  return "?";
}

StrategyKind ParseStrategyKind(const std::string& s) {
  for (auto k : {StrategyKind::kRandomId, StrategyKind::kLlmInit,
                 StrategyKind::kAdaptiveProjection, StrategyKind::kWhitenAdapter,
                 StrategyKind::kRlmrecCon, StrategyKind::kRlmrecGen,
                 StrategyKind::kAlphaFuse}) {
    if (ToString(k) == s) return k;
  }
  throw ValidationError("unknown strategy '" + s + "'");
}

void StrategySpec::Validate() const {
  if (dim < 1) throw ValidationError("strategy: dim must be >= 1");
  if (!(reg_coef >= 0.0) || !std::isfinite(reg_coef)) {
    throw ValidationError("strategy: reg_coef must be finite and >= 0");
  }
}

FreeTable::FreeTable(std::string kind, Matrix init)
    : kind_(std::move(kind)), table_(std::move(init)) {
  if (table_.size() == 0) throw ValidationError("free table: empty");
}

void FreeTable::ApplyGradient(const Matrix& grad, Optimizer& opt) {
  CheckGradient(grad, table_);
  opt.Update("item.table", table_, grad);
}

ParameterCount FreeTable::Trainable() const {
  ParameterCount c;
  c.Add("item.table", static_cast<std::size_t>(table_.size()));
  return c;
}

void FreeTable::Save(TensorArchive& ar) const {
  ar.Put("item.table", table_);
  ar.meta()["item"] = {{"kind", kind_}};
}

void FreeTable::Load(const TensorArchive& ar) {
  const Matrix& t = ar.GetFloat("item.table");
  if (t.rows() != table_.rows() || t.cols() != table_.cols()) {
    throw ValidationError("free table: checkpoint shape mismatch");
  }
  table_ = t;
}

AdapterEncoder::AdapterEncoder(std::string kind, Matrix features,
                               std::size_t hidden, std::size_t dim,
                               std::uint64_t seed)
    : kind_(std::move(kind)), features_(std::move(features)) {
  if (features_.size() == 0 || hidden < 1 || dim < 1) {
    throw ValidationError("adapter: empty features or zero width");
  }
  std::mt19937_64 rng(seed);
  mlp_ = Mlp2<float>::Init(static_cast<std::size_t>(features_.cols()), hidden,
                           dim, rng);
  Refresh();
}

void AdapterEncoder::Refresh() { output_ = mlp_.Forward(features_, &cache_); }

void AdapterEncoder::ApplyGradient(const Matrix& grad, Optimizer& opt) {
  CheckGradient(grad, output_);
  Mlp2<float> g = mlp_.ZerosLike();
  mlp_.Backward(cache_, grad, g, false);
  UpdateMlp("item.mlp", mlp_, g, opt);
  Refresh();
}

ParameterCount AdapterEncoder::Trainable() const {
  ParameterCount c;
  c.Add("item.mlp", mlp_.ParameterCount());
  return c;
}

void AdapterEncoder::Save(TensorArchive& ar) const {
  PutMlp(ar, "item.mlp", mlp_);
  ar.meta()["item"] = {{"kind", kind_}};
}

void AdapterEncoder::Load(const TensorArchive& ar) {
  GetMlp(ar, "item.mlp", mlp_);
  Refresh();
}

double CosineReconstructionPenalty(const Matrix& mapped, const Matrix& target,
                                   Matrix* d_mapped, std::size_t* skipped) {
  if (mapped.rows() != target.rows() || mapped.cols() != target.cols()) {
    throw ValidationError("reconstruction: shape mismatch");
  }
  const auto n = mapped.rows();
  std::vector<double> cosines(static_cast<std::size_t>(n), 0.0);
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  std::size_t count = 0, skip = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double nm = mapped.row(i).cast<double>().norm();
    const double nt = target.row(i).cast<double>().norm();
    if (nm == 0.0 || nt == 0.0) {
      ++skip;
      continue;
    }
    cosines[static_cast<std::size_t>(i)] =
        mapped.row(i).cast<double>().dot(target.row(i).cast<double>()) / (nm * nt);
    used[static_cast<std::size_t>(i)] = true;
    ++count;
  }
  if (skipped) *skipped = skip;
  if (skip > 0) spdlog::warn("reconstruction: skipped {} zero-norm rows", skip);
  if (d_mapped) *d_mapped = Matrix::Zero(n, mapped.cols());
  if (count == 0) return 0.0;

  double penalty = 0.0;
  const double inv = 1.0 / static_cast<double>(count);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!used[static_cast<std::size_t>(i)]) continue;
    const double c = cosines[static_cast<std::size_t>(i)];
    penalty += 1.0 - c;
    if (d_mapped) {
      const Eigen::RowVectorXd m = mapped.row(i).cast<double>();
      const Eigen::RowVectorXd t = target.row(i).cast<double>();
      const double nm = m.norm(), nt = t.norm();
      d_mapped->row(i) =
          (-(t / (nm * nt) - c * m / (nm * nm)) * inv).cast<float>();
    }
  }
  return penalty * inv;
}

RlmrecEncoder::RlmrecEncoder(StrategyKind kind, Matrix id_init, Matrix language,
                             std::size_t hidden, double coef,
                             std::uint64_t seed)
    : kind_(kind),
      table_(std::move(id_init)),
      language_(std::move(language)),
      coef_(coef) {
  if (kind_ != StrategyKind::kRlmrecCon && kind_ != StrategyKind::kRlmrecGen) {
    throw ValidationError("rlmrec: kind must be rlmrec_con or rlmrec_gen");
  }
  if (table_.rows() != language_.rows()) {
    throw ValidationError("rlmrec: ID and language tables differ in rows");
  }
  if (!(coef_ >= 0.0)) throw ValidationError("rlmrec: coefficient must be >= 0");
  std::mt19937_64 rng(seed ^ kMapperStream);
  const auto d = static_cast<std::size_t>(table_.cols());
  const auto dl = static_cast<std::size_t>(language_.cols());
  mapper_ = kind_ == StrategyKind::kRlmrecCon
                ? Mlp2<float>::Init(d, hidden, dl, rng)
                : Mlp2<float>::Init(dl, hidden, d, rng);
  mapper_grad_ = mapper_.ZerosLike();
}

std::string RlmrecEncoder::kind() const { return ToString(kind_); }

double RlmrecEncoder::AuxiliaryLoss(Matrix& grad_embeddings) {
  Mlp2<float>::Cache cache;
  Matrix d_mapped;
  mapper_grad_ = mapper_.ZerosLike();
  if (kind_ == StrategyKind::kRlmrecCon) {
    const Matrix mapped = mapper_.Forward(table_, &cache);
    last_penalty_ = CosineReconstructionPenalty(mapped, language_, &d_mapped);
    if (coef_ == 0.0) return 0.0;
    d_mapped *= static_cast<float>(coef_);
    grad_embeddings += mapper_.Backward(cache, d_mapped, mapper_grad_, true);
  } else {
    const Matrix mapped = mapper_.Forward(language_, &cache);
    last_penalty_ = CosineReconstructionPenalty(mapped, table_, &d_mapped);
    if (coef_ == 0.0) return 0.0;
    d_mapped *= static_cast<float>(coef_);
    mapper_.Backward(cache, d_mapped, mapper_grad_, false);
    // The penalty is symmetric, so swapping arguments gives d/d(target).
    Matrix d_target;
    CosineReconstructionPenalty(table_, mapped, &d_target);
    grad_embeddings += static_cast<float>(coef_) * d_target;
  }
  return coef_ * last_penalty_;
}

void RlmrecEncoder::ApplyGradient(const Matrix& grad, Optimizer& opt) {
  CheckGradient(grad, table_);
  for (const auto& b : mapper_grad_.Blocks("g")) {
    if (!b.value->allFinite()) {
      throw NumericalError("rlmrec: non-finite mapper gradient rejected");
    }
  }
  opt.Update("item.table", table_, grad);
  UpdateMlp("item.mapper", mapper_, mapper_grad_, opt);
  mapper_grad_ = mapper_.ZerosLike();
}

ParameterCount RlmrecEncoder::Trainable() const {
  ParameterCount c;
  c.Add("item.table", static_cast<std::size_t>(table_.size()));
  c.Add("item.mapper", mapper_.ParameterCount());
  return c;
}

void RlmrecEncoder::Save(TensorArchive& ar) const {
  ar.Put("item.table", table_);
  PutMlp(ar, "item.mapper", mapper_);
  ar.meta()["item"] = {{"kind", kind()}, {"reg_coef", coef_}};
}

void RlmrecEncoder::Load(const TensorArchive& ar) {
  const Matrix& t = ar.GetFloat("item.table");
  if (t.rows() != table_.rows() || t.cols() != table_.cols()) {
    throw ValidationError("rlmrec: checkpoint shape mismatch");
  }
  table_ = t;
  GetMlp(ar, "item.mapper", mapper_);
}

Matrix RandomTable(std::size_t n_items, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  Matrix m(static_cast<Eigen::Index>(n_items), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

Matrix PcaTable(const EmbeddingMatrix& e, const SpectralDecomposition& dec,
                std::size_t dim) {
  if (dim < 1 || dim > dec.dim()) {
    throw ValidationError("llm_init: dim " + std::to_string(dim) +
                          " must be in [1, d_l = " + std::to_string(dec.dim()) +
                          "]");
  }
  SubspacePartition part;
  part.semantic_dim = dim;
  part.full_dim = dec.dim();
  return Project(e, dec, part);
}

Matrix WhitenFull(const EmbeddingMatrix& e, const SpectralDecomposition& dec) {
  SubspacePartition part;
  part.semantic_dim = dec.dim();
  part.full_dim = dec.dim();
  return Standardize(e, dec, part);
}

std::unique_ptr<ItemEncoder> MakeItemEncoder(const StrategySpec& spec,
                                             const EmbeddingMatrix& e,
                                             const SpectralDecomposition& dec,
                                             const SubspacePartition& part) {
  spec.Validate();
  const std::size_t n = e.n_items();
  const std::string name = ToString(spec.kind);
  switch (spec.kind) {
    case StrategyKind::kRandomId:
      return std::make_unique<FreeTable>(name, RandomTable(n, spec.dim, spec.seed));
    case StrategyKind::kLlmInit:
      return std::make_unique<FreeTable>(name, PcaTable(e, dec, spec.dim));
    case StrategyKind::kAdaptiveProjection:
      return std::make_unique<AdapterEncoder>(name, e.data(), spec.hidden(),
                                              spec.dim, spec.seed);
    case StrategyKind::kWhitenAdapter:
      return std::make_unique<AdapterEncoder>(name, WhitenFull(e, dec),
                                              spec.hidden(), spec.dim, spec.seed);
    case StrategyKind::kRlmrecCon:
    case StrategyKind::kRlmrecGen:
      return std::make_unique<RlmrecEncoder>(
          spec.kind, RandomTable(n, spec.dim, spec.seed), e.data(),
          spec.hidden(), spec.reg_coef, spec.seed);
    case StrategyKind::kAlphaFuse: {
      Matrix language =
          spec.standardize ? Standardize(e, dec, part) : Project(e, dec, part);
      return std::make_unique<FusedTable>(std::move(language), part.semantic_dim,
                                          part.null_dim, spec.fusion);
    }
  }
  throw ValidationError("unknown strategy");
}

ParameterCount CountTrainable(const StrategySpec& spec, std::size_t n_items,
                              std::size_t language_dim,
                              const SubspacePartition& part,
                              std::size_t backbone_params) {
  ParameterCount c;
  const std::size_t d = spec.dim, h = spec.hidden();
  switch (spec.kind) {
    case StrategyKind::kRandomId:
    case StrategyKind::kLlmInit:
      c.Add("item.table", n_items * d);
      break;
    case StrategyKind::kAdaptiveProjection:
    case StrategyKind::kWhitenAdapter:
      c.Add("item.mlp", MlpCount(language_dim, h, d));
      break;
    case StrategyKind::kRlmrecCon:
      c.Add("item.table", n_items * d);
      c.Add("item.mapper", MlpCount(d, h, language_dim));
      break;
    case StrategyKind::kRlmrecGen:
      c.Add("item.table", n_items * d);
      c.Add("item.mapper", MlpCount(language_dim, h, d));
      break;
    case StrategyKind::kAlphaFuse:
      if (spec.fusion.train_ids) c.Add("item.id", n_items * part.null_dim);
      if (!spec.fusion.freeze_language) {
        c.Add("item.rich_offset", n_items * part.semantic_dim);
      }
      break;
  }
  c.Add("backbone", backbone_params);
  return c;
}

}  // namespace nullfuse
