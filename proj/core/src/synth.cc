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

#include "nullfuse/synth.h"

#include <cstdio>
#include <random>

#include <Eigen/QR>

namespace nullfuse {

namespace {

// Spread of cluster centroids inside the semantic subspace.
constexpr double kCentroidScale = 2.0;

bool IsProbability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void SynthConfig::Validate() const {
  if (clusters < 2) throw ValidationError("synth: clusters must be >= 2");
  if (n_items < clusters || n_items % clusters != 0) {
    throw ValidationError("synth: n_items must be a positive multiple of clusters");
  }
  if (n_users < 1) throw ValidationError("synth: n_users must be >= 1");
  if (semantic_rank < 1 || semantic_rank >= language_dim) {
    throw ValidationError("synth: semantic_rank must be in [1, language_dim)");
  }
  if (groups < 1) throw ValidationError("synth: groups must be >= 1");
  if (min_length < 3 || min_length > max_length) {
    throw ValidationError("synth: need 3 <= min_length <= max_length");
  }
  if (!(noise >= 0.0) || !(jitter >= 0.0)) {
    throw ValidationError("synth: noise and jitter must be >= 0");
  }
  if (!IsProbability(p_cluster) || !IsProbability(p_group)) {
    throw ValidationError("synth: transition probabilities must be in [0, 1]");
  }
}

nlohmann::json SynthConfig::ToJson() const {
  return {{"n_items", n_items},     {"n_users", n_users},
          {"clusters", clusters},   {"language_dim", language_dim},
          {"semantic_rank", semantic_rank}, {"groups", groups},
          {"min_length", min_length}, {"max_length", max_length},
          {"noise", noise},         {"jitter", jitter},
          {"p_cluster", p_cluster}, {"p_group", p_group},
          {"seed", seed}};
}

SynthConfig SynthConfig::FromJson(const nlohmann::json& j) {
  SynthConfig c;
  const auto known = c.ToJson();
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) {
      throw ValidationError("synth: unknown key '" + key + "'");
    }
  }
  try {
    c.n_items = j.value("n_items", c.n_items);
    c.n_users = j.value("n_users", c.n_users);
    c.clusters = j.value("clusters", c.clusters);
    c.language_dim = j.value("language_dim", c.language_dim);
    c.semantic_rank = j.value("semantic_rank", c.semantic_rank);
    c.groups = j.value("groups", c.groups);
    c.min_length = j.value("min_length", c.min_length);
    c.max_length = j.value("max_length", c.max_length);
    c.noise = j.value("noise", c.noise);
    c.jitter = j.value("jitter", c.jitter);
    c.p_cluster = j.value("p_cluster", c.p_cluster);
    c.p_group = j.value("p_group", c.p_group);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("synth: bad value: ") + e.what());
  }
  return c;
}

SynthCorpus SynthGenerate(const SynthConfig& config, std::size_t max_history) {
  config.Validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const auto dl = static_cast<Eigen::Index>(config.language_dim);
  const auto r = static_cast<Eigen::Index>(config.semantic_rank);
  const auto n = static_cast<Eigen::Index>(config.n_items);

  MatrixD gauss(dl, r);
  for (Eigen::Index i = 0; i < gauss.size(); ++i) gauss.data()[i] = unit(rng);
  Eigen::HouseholderQR<MatrixD> qr(gauss);
  const MatrixD basis = qr.householderQ() * MatrixD::Identity(dl, r);

  MatrixD centroids(static_cast<Eigen::Index>(config.clusters), r);
  for (Eigen::Index i = 0; i < centroids.size(); ++i) {
    centroids.data()[i] = kCentroidScale * unit(rng);
  }

  SynthCorpus out;
  Matrix data(n, dl);
  out.cluster.resize(config.n_items);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t c = static_cast<std::size_t>(i) % config.clusters;
    out.cluster[static_cast<std::size_t>(i)] = c;
    Eigen::RowVectorXd coord = centroids.row(static_cast<Eigen::Index>(c));
    for (Eigen::Index k = 0; k < r; ++k) coord[k] += config.jitter * unit(rng);
    Eigen::RowVectorXd row = coord * basis.transpose();
    for (Eigen::Index k = 0; k < dl; ++k) row[k] += config.noise * unit(rng);
    data.row(i) = row.cast<float>();
  }
  out.embeddings = EmbeddingMatrix(std::move(data));
  out.catalog = ItemCatalog::Identity(config.n_items);

  std::uniform_int_distribution<std::size_t> pick_group(0, config.groups - 1);
  out.group.resize(config.n_items);
  for (auto& g : out.group) g = pick_group(rng);

  // cell[c][g] lists the items of cluster c in hidden group g.
  std::vector<std::vector<Sequence>> cell(
      config.clusters, std::vector<Sequence>(config.groups));
  std::vector<Sequence> by_cluster(config.clusters);
  for (std::size_t i = 0; i < config.n_items; ++i) {
    cell[out.cluster[i]][out.group[i]].push_back(static_cast<ItemIndex>(i));
    by_cluster[out.cluster[i]].push_back(static_cast<ItemIndex>(i));
  }

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_item(0, config.n_items - 1);
  std::uniform_int_distribution<std::size_t> pick_cluster(0, config.clusters - 1);
  std::uniform_int_distribution<std::size_t> pick_length(config.min_length,
                                                         config.max_length);
  std::uniform_int_distribution<std::int64_t> pick_start(0, 1'000'000);
  auto pick_from = [&rng](const Sequence& items) {
    std::uniform_int_distribution<std::size_t> d(0, items.size() - 1);
    return items[d(rng)];
  };

  std::vector<UserHistory> users(config.n_users);
  for (std::size_t u = 0; u < config.n_users; ++u) {
    char name[32];
    std::snprintf(name, sizeof(name), "u%06zu", u);
    auto& h = users[u];
    h.user_id = name;
    const std::size_t len = pick_length(rng);
    const std::int64_t start = pick_start(rng);
    ItemIndex item = static_cast<ItemIndex>(pick_item(rng));
    for (std::size_t j = 0; j < len; ++j) {
      h.items.push_back(item);
      h.timestamps.push_back(start + static_cast<std::int64_t>(j));
      const std::size_t c = out.cluster[item];
      const std::size_t next =
          coin(rng) < config.p_cluster ? (c + 1) % config.clusters : pick_cluster(rng);
      const Sequence& same = cell[next][out.group[item]];
      item = (coin(rng) < config.p_group && !same.empty()) ? pick_from(same)
                                                           : pick_from(by_cluster[next]);
    }
  }
  out.interactions =
      InteractionDataset(std::move(users), config.n_items, max_history);
  return out;
}

}  // namespace nullfuse
