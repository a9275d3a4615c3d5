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

#include "nullfuse/fusion.h"

#include <random>

namespace nullfuse {

std::string ToString(IdInit init) {
  switch (init) {
    case IdInit::kZeros: return "zeros";
    case IdInit::kGaussian: return "gaussian";
    case IdInit::kResidual: return "residual";
  }
  return "?";
}

IdInit ParseIdInit(const std::string& s) {
  if (s == "zeros") return IdInit::kZeros;
  if (s == "gaussian") return IdInit::kGaussian;
  if (s == "residual") return IdInit::kResidual;
  throw ValidationError("unknown id init '" + s + "'");
}

FusedTable::FusedTable(Matrix language_block, std::size_t semantic_dim,
                       std::size_t null_dim, const FusionOptions& options)
    : language_(std::move(language_block)),
      semantic_dim_(semantic_dim),
      null_dim_(null_dim),
      options_(options) {
  if (null_dim_ < 1) throw ValidationError("fusion: null_dim must be >= 1");
  if (static_cast<std::size_t>(language_.cols()) != semantic_dim_ + null_dim_) {
    throw ValidationError("fusion: language block has " +
                          std::to_string(language_.cols()) +
                          " columns, expected d_s + d_n = " +
                          std::to_string(semantic_dim_ + null_dim_));
  }
  if (language_.rows() < 1) throw ValidationError("fusion: empty table");
  if (!language_.allFinite()) {
    throw NumericalError("fusion: non-finite language block");
  }
  const auto n = language_.rows();
  const auto ds = static_cast<Eigen::Index>(semantic_dim_);
  const auto dn = static_cast<Eigen::Index>(null_dim_);

  switch (options_.init) {
    case IdInit::kZeros:
      id_ = Matrix::Zero(n, dn);
      break;
    case IdInit::kGaussian: {
      id_.resize(n, dn);
      std::mt19937_64 rng(options_.seed);
      std::normal_distribution<float> g(0.0f, 1.0f);
      for (Eigen::Index i = 0; i < id_.size(); ++i) id_.data()[i] = g(rng);
      break;
    }
    case IdInit::kResidual:
      id_ = language_.rightCols(dn);
      break;
  }
  // E_ID owns the null columns from here on.
  language_.rightCols(dn).setZero();
  if (!options_.freeze_language) rich_offset_ = Matrix::Zero(n, ds);
  Refresh();
}

void FusedTable::Refresh() {
  fused_ = language_;
  fused_.rightCols(static_cast<Eigen::Index>(null_dim_)) += id_;
  if (rich_offset_.size() > 0) {
    fused_.leftCols(static_cast<Eigen::Index>(semantic_dim_)) += rich_offset_;
  }
}

Matrix FusedTable::Fuse(std::size_t item) const {
  if (item >= n_items()) {
    throw ValidationError("fusion: item " + std::to_string(item) +
                          " out of range");
  }
  return fused_.row(static_cast<Eigen::Index>(item));
}

void FusedTable::ApplyGradient(const Matrix& grad, Optimizer& opt) {
  if (grad.rows() != fused_.rows() || grad.cols() != fused_.cols()) {
    throw ValidationError("fusion: gradient shape mismatch");
  }
  if (!grad.allFinite()) {
    throw NumericalError("fusion: non-finite gradient rejected");
  }
  const auto ds = static_cast<Eigen::Index>(semantic_dim_);
  const auto dn = static_cast<Eigen::Index>(null_dim_);
  if (options_.train_ids) {
    const Matrix g = grad.rightCols(dn);
    opt.Update("item.id", id_, g);
  }
  if (rich_offset_.size() > 0 && ds > 0) {
    const Matrix g = grad.leftCols(ds);
    opt.Update("item.rich_offset", rich_offset_, g);
  }
  Refresh();
}

ParameterCount FusedTable::Trainable() const {
  ParameterCount c;
  if (options_.train_ids) c.Add("item.id", static_cast<std::size_t>(id_.size()));
  if (rich_offset_.size() > 0) {
    c.Add("item.rich_offset", static_cast<std::size_t>(rich_offset_.size()));
  }
  return c;
}

void FusedTable::Save(TensorArchive& ar) const {
  ar.Put("item.language", language_);
  ar.Put("item.id", id_);
  if (rich_offset_.size() > 0) ar.Put("item.rich_offset", rich_offset_);
  auto& m = ar.meta()["item"];
  m["kind"] = kind();
  m["d_s"] = semantic_dim_;
  m["d_n"] = null_dim_;
  m["init_mode"] = ToString(options_.init);
  m["seed"] = options_.seed;
  m["freeze_language"] = options_.freeze_language;
  m["train_ids"] = options_.train_ids;
}

void FusedTable::Load(const TensorArchive& ar) {
  const Matrix& id = ar.GetFloat("item.id");
  if (id.rows() != id_.rows() || id.cols() != id_.cols()) {
    throw ValidationError("fusion: checkpoint ID block shape mismatch");
  }
  if (HashMatrix(ar.GetFloat("item.language")) != LanguageChecksum()) {
    throw ValidationError("fusion: checkpoint language block differs");
  }
  id_ = id;
  if (rich_offset_.size() > 0) rich_offset_ = ar.GetFloat("item.rich_offset");
  Refresh();
}

void FusedTable::SaveTable(const std::filesystem::path& stem) const {
  TensorArchive ar;
  Save(ar);
  ar.Save(stem);
}

FusedTable FusedTable::LoadTable(const std::filesystem::path& stem) {
  const auto ar = TensorArchive::Load(stem);
  const auto& m = ar.meta().at("item");
  FusionOptions opt;
  opt.init = ParseIdInit(m.at("init_mode").get<std::string>());
  opt.seed = m.at("seed").get<std::uint64_t>();
  opt.freeze_language = m.at("freeze_language").get<bool>();
  opt.train_ids = m.at("train_ids").get<bool>();
  FusedTable table(ar.GetFloat("item.language"), m.at("d_s").get<std::size_t>(),
                   m.at("d_n").get<std::size_t>(), opt);
  table.Load(ar);
  return table;
}

}  // namespace nullfuse
