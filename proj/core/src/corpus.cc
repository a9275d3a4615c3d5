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

#include "nullfuse/corpus.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

namespace nullfuse {

static_assert(std::endian::native == std::endian::little,
              "embedding payloads are little-endian");

// ---------------------------------------------------------------------------
// Embeddings

EmbeddingMatrix::EmbeddingMatrix(Matrix data) : data_(std::move(data)) {
  if (data_.rows() < 1) throw ValidationError("embeddings: n_items must be >= 1");
  if (data_.cols() < 1) throw ValidationError("embeddings: dim must be >= 1");
  for (Eigen::Index r = 0; r < data_.rows(); ++r) {
    for (Eigen::Index c = 0; c < data_.cols(); ++c) {
      if (!std::isfinite(data_(r, c))) {
        throw ValidationError("embeddings: non-finite entry at row " +
                              std::to_string(r) + ", column " +
                              std::to_string(c));
      }
    }
  }
}

std::filesystem::path SidecarPath(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

EmbeddingMatrix LoadEmbeddings(const std::filesystem::path& path) {
  std::ifstream side(SidecarPath(path));
  if (!side) {
    throw ValidationError("embeddings: missing sidecar " +
                          SidecarPath(path).string());
  }
  nlohmann::json header;
  try {
    side >> header;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("embeddings: bad sidecar: ") + e.what());
  }
  const auto n = header.at("n_items").get<std::size_t>();
  const auto d = header.at("dim").get<std::size_t>();
  const auto dtype = header.value("dtype", std::string("f32"));
  if (dtype != "f32") throw ValidationError("embeddings: dtype must be f32");
  if (d == 0) throw ValidationError("embeddings: dim must be >= 1");
  if (n == 0) throw ValidationError("embeddings: n_items must be >= 1");

  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw ValidationError("embeddings: cannot open " + path.string());
  std::string payload((std::istreambuf_iterator<char>(bin)),
                      std::istreambuf_iterator<char>());
  const std::size_t expected = n * d * sizeof(float);
  if (payload.size() != expected) {
    throw ValidationError("embeddings: header declares " + std::to_string(n) +
                          "x" + std::to_string(d) + " (" +
                          std::to_string(expected) + " bytes) but payload has " +
                          std::to_string(payload.size()) + " bytes");
  }
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::memcpy(m.data(), payload.data(), expected);
  spdlog::info("loaded embeddings {} ({} items x {} dims)", path.string(), n, d);
  return EmbeddingMatrix(std::move(m));
}

void SaveEmbeddings(const EmbeddingMatrix& e,
                    const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream bin(path, std::ios::binary);
  bin.write(reinterpret_cast<const char*>(e.data().data()),
            static_cast<std::streamsize>(e.n_items() * e.dim() * sizeof(float)));
  nlohmann::json header = {
      {"n_items", e.n_items()}, {"dim", e.dim()}, {"dtype", "f32"}};
  std::ofstream side(SidecarPath(path));
  side << header.dump() << "\n";
  if (!bin || !side) throw ValidationError("embeddings: write failed");
}

// ---------------------------------------------------------------------------
// Catalog

ItemCatalog::ItemCatalog(std::vector<CatalogEntry> entries)
    : entries_(std::move(entries)) {
  index_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto [it, inserted] =
        index_.emplace(entries_[i].external_id, static_cast<ItemIndex>(i));
    if (!inserted) {
      throw ValidationError("catalog: duplicate item id '" +
                            entries_[i].external_id + "'");
    }
  }
}

ItemCatalog ItemCatalog::Identity(std::size_t n_items) {
  std::vector<CatalogEntry> entries(n_items);
  for (std::size_t i = 0; i < n_items; ++i) {
    entries[i].external_id = std::to_string(i);
  }
  return ItemCatalog(std::move(entries));
}

std::optional<ItemIndex> ItemCatalog::Find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingMatrix MockEmbeddings(const ItemCatalog& catalog, std::size_t dim) {
  if (catalog.size() == 0 || dim == 0) {
    throw ValidationError("mock embeddings: empty catalog or zero dim");
  }
  Matrix m(static_cast<Eigen::Index>(catalog.size()),
           static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const auto& entry = catalog.at(static_cast<ItemIndex>(i));
    const std::string text = entry.external_id + "\t" + entry.metadata;
    std::mt19937_64 rng(Fnv1a64(text.data(), text.size()));
    std::normal_distribution<float> g(0.0f, 1.0f);
    for (std::size_t k = 0; k < dim; ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = g(rng);
    }
  }
  return EmbeddingMatrix(std::move(m));
}

ItemCatalog LoadCatalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("catalog: cannot open " + path.string());
  std::vector<CatalogEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    CatalogEntry e;
    const auto tab = line.find('\t');
    e.external_id = line.substr(0, tab);
    if (tab != std::string::npos) e.metadata = line.substr(tab + 1);
    entries.push_back(std::move(e));
  }
  return ItemCatalog(std::move(entries));
}

void SaveCatalog(const ItemCatalog& catalog,
                 const std::filesystem::path& path) {
  std::ofstream out(path);
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const auto& e = catalog.at(static_cast<ItemIndex>(i));
    out << e.external_id;
    if (!e.metadata.empty()) out << '\t' << e.metadata;
    out << '\n';
  }
  if (!out) throw ValidationError("catalog: write failed");
}

// ---------------------------------------------------------------------------
// Splits

std::string ToString(SplitMode mode) {
  return mode == SplitMode::kLeaveOneOut ? "leave_one_out" : "cold_start";
}

SplitMode ParseSplitMode(const std::string& s) {
  if (s == "leave_one_out") return SplitMode::kLeaveOneOut;
  if (s == "cold_start") return SplitMode::kColdStart;
  throw ValidationError("unknown split mode '" + s + "'");
}

void SplitSpec::Validate() const {
  if (history_window < 1) throw ValidationError("split: history_window >= 1");
  double sum = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw ValidationError("split: ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ValidationError("split: ratios must sum to 1");
  }
}

InteractionDataset::InteractionDataset(std::vector<UserHistory> users,
                                       std::size_t n_items,
                                       std::size_t max_history)
    : users_(std::move(users)), n_items_(n_items), max_history_(max_history) {
  if (max_history_ < 1) throw ValidationError("dataset: max_history >= 1");
  for (const auto& u : users_) {
    if (u.items.size() < 2) {
      throw ValidationError("dataset: user '" + u.user_id +
                            "' has fewer than 2 interactions");
    }
    if (!u.timestamps.empty() && u.timestamps.size() != u.items.size()) {
      throw ValidationError("dataset: timestamp count mismatch for user '" +
                            u.user_id + "'");
    }
    for (ItemIndex v : u.items) {
      if (v >= n_items_) {
        throw ValidationError("dataset: item index " + std::to_string(v) +
                              " out of range for user '" + u.user_id + "'");
      }
    }
    if (!std::is_sorted(u.timestamps.begin(), u.timestamps.end())) {
      throw ValidationError("dataset: timestamps decrease for user '" +
                            u.user_id + "'");
    }
  }
}

bool InteractionDataset::has_timestamps() const {
  return std::all_of(users_.begin(), users_.end(),
                     [](const UserHistory& u) { return !u.timestamps.empty(); });
}

std::vector<Sequence> InteractionDataset::TrainSequences() const {
  if (!has_splits()) throw ValidationError("dataset: splits not built");
  std::vector<Sequence> out;
  for (std::size_t u = 0; u < users_.size(); ++u) {
    Sequence seq;
    for (std::size_t p = 0; p < users_[u].items.size(); ++p) {
      if (labels_[u][p] == SplitLabel::kTrain) seq.push_back(users_[u].items[p]);
    }
    if (seq.size() >= 2) out.push_back(std::move(seq));
  }
  return out;
}

std::vector<Example> InteractionDataset::Examples(SplitLabel split) const {
  if (!has_splits()) throw ValidationError("dataset: splits not built");
  std::vector<Example> out;
  auto make = [&](std::size_t u, std::size_t p) {
    const auto& items = users_[u].items;
    Example ex;
    ex.user = u;
    ex.target = items[p];
    const std::size_t begin = p > max_history_ ? p - max_history_ : 0;
    ex.history.assign(items.begin() + static_cast<std::ptrdiff_t>(begin),
                      items.begin() + static_cast<std::ptrdiff_t>(p));
    return ex;
  };
  for (std::size_t u = 0; u < users_.size(); ++u) {
    const auto& labels = labels_[u];
    if (*split_mode_ == SplitMode::kLeaveOneOut) {
      for (std::size_t p = 1; p < labels.size(); ++p) {
        if (labels[p] == split) out.push_back(make(u, p));
      }
    } else if (labels.back() == split && labels.size() >= 2) {
      out.push_back(make(u, labels.size() - 1));
    }
  }
  return out;
}

std::vector<std::size_t> InteractionDataset::ItemCounts() const {
  std::vector<std::size_t> counts(n_items_, 0);
  for (std::size_t u = 0; u < users_.size(); ++u) {
    const auto& items = users_[u].items;
    for (std::size_t p = 0; p < items.size(); ++p) {
      if (has_splits() && labels_[u][p] != SplitLabel::kTrain) continue;
      ++counts[items[p]];
    }
  }
  return counts;
}

nlohmann::json InteractionDataset::SplitsToJson() const {
  if (!has_splits()) throw ValidationError("dataset: splits not built");
  nlohmann::json users = nlohmann::json::array();
  for (std::size_t u = 0; u < users_.size(); ++u) {
    std::vector<int> l;
    l.reserve(labels_[u].size());
    for (auto x : labels_[u]) l.push_back(static_cast<int>(x));
    users.push_back({{"user_id", users_[u].user_id}, {"labels", l}});
  }
  return {{"mode", ToString(*split_mode_)},
          {"label_codes", {{"train", 0}, {"valid", 1}, {"test", 2}}},
          {"users", users}};
}

void InteractionDataset::ApplySplitsJson(const nlohmann::json& j) {
  const auto mode = ParseSplitMode(j.at("mode").get<std::string>());
  const auto& users = j.at("users");
  if (users.size() != users_.size()) {
    throw ValidationError("splits: user count mismatch");
  }
  std::vector<std::vector<SplitLabel>> labels(users_.size());
  for (std::size_t u = 0; u < users_.size(); ++u) {
    if (users[u].at("user_id").get<std::string>() != users_[u].user_id) {
      throw ValidationError("splits: user order mismatch at " +
                            std::to_string(u));
    }
    const auto codes = users[u].at("labels").get<std::vector<int>>();
    if (codes.size() > users_[u].items.size()) {
      throw ValidationError("splits: label count exceeds sequence length");
    }
    // Cold-start truncation keeps the most recent interactions.
    const std::size_t drop = users_[u].items.size() - codes.size();
    users_[u].items.erase(users_[u].items.begin(),
                          users_[u].items.begin() + static_cast<std::ptrdiff_t>(drop));
    if (!users_[u].timestamps.empty()) {
      users_[u].timestamps.erase(
          users_[u].timestamps.begin(),
          users_[u].timestamps.begin() + static_cast<std::ptrdiff_t>(drop));
    }
    for (int c : codes) {
      if (c < 0 || c > 2) throw ValidationError("splits: bad label code");
      labels[u].push_back(static_cast<SplitLabel>(c));
    }
  }
  split_mode_ = mode;
  labels_ = std::move(labels);
}

namespace {

std::int64_t ParseInt64(const std::string& s, std::size_t line_no) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ValidationError("interactions: bad timestamp '" + s + "' on line " +
                          std::to_string(line_no));
  }
  return v;
}

}  // namespace

InteractionDataset LoadInteractions(const std::filesystem::path& path,
                                    const ItemCatalog& catalog,
                                    std::size_t max_history) {
  std::ifstream in(path);
  if (!in) throw ValidationError("interactions: cannot open " + path.string());
  std::vector<UserHistory> users;
  std::unordered_map<std::string, std::size_t> user_index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string user, item, ts;
    if (!std::getline(fields, user, '\t') || !std::getline(fields, item, '\t') ||
        !std::getline(fields, ts, '\t')) {
      throw ValidationError("interactions: expected 3 tab-separated fields on "
                            "line " + std::to_string(line_no));
    }
    const auto row = catalog.Find(item);
    if (!row) {
      throw ValidationError("interactions: unknown item id '" + item +
                            "' on line " + std::to_string(line_no));
    }
    auto [it, inserted] = user_index.emplace(user, users.size());
    if (inserted) users.push_back(UserHistory{user, {}, {}});
    auto& u = users[it->second];
    u.items.push_back(*row);
    u.timestamps.push_back(ParseInt64(ts, line_no));
  }

  std::vector<UserHistory> kept;
  std::size_t dropped = 0;
  for (auto& u : users) {
    std::vector<std::size_t> order(u.items.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return u.timestamps[a] < u.timestamps[b];
    });
    UserHistory sorted{u.user_id, {}, {}};
    for (std::size_t i : order) {
      sorted.items.push_back(u.items[i]);
      sorted.timestamps.push_back(u.timestamps[i]);
    }
    if (sorted.items.size() < 2) {
      ++dropped;
      continue;
    }
    kept.push_back(std::move(sorted));
  }
  if (dropped > 0) {
    spdlog::warn("interactions: dropped {} users with a single interaction",
                 dropped);
  }
  return InteractionDataset(std::move(kept), catalog.size(), max_history);
}

void SaveInteractions(const InteractionDataset& ds, const ItemCatalog& catalog,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  for (const auto& u : ds.users()) {
    for (std::size_t p = 0; p < u.items.size(); ++p) {
      const std::int64_t ts =
          u.timestamps.empty() ? static_cast<std::int64_t>(p) : u.timestamps[p];
      out << u.user_id << '\t' << catalog.at(u.items[p]).external_id << '\t'
          << ts << '\n';
    }
  }
  if (!out) throw ValidationError("interactions: write failed");
}

InteractionDataset BuildSplits(const InteractionDataset& ds,
                               const SplitSpec& spec) {
  spec.Validate();
  InteractionDataset out = ds;
  const std::size_t n_users = ds.users().size();
  out.labels_.assign(n_users, {});

  if (spec.mode == SplitMode::kLeaveOneOut) {
    for (std::size_t u = 0; u < n_users; ++u) {
      const auto n = ds.users()[u].items.size();
      if (n < 3) {
        throw ValidationError("leave_one_out: user '" + ds.users()[u].user_id +
                              "' has " + std::to_string(n) +
                              " interactions, need >= 3");
      }
      auto& labels = out.labels_[u];
      labels.assign(n, SplitLabel::kTrain);
      labels[n - 2] = SplitLabel::kValid;
      labels[n - 1] = SplitLabel::kTest;
    }
    out.split_mode_ = spec.mode;
    return out;
  }

  if (!ds.has_timestamps()) {
    throw ValidationError("cold_start: timestamps required for every user");
  }
  std::vector<std::size_t> order(n_users);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ta = ds.users()[a].timestamps.back();
    const auto tb = ds.users()[b].timestamps.back();
    if (ta != tb) return ta < tb;
    return ds.users()[a].user_id < ds.users()[b].user_id;
  });
  const auto n_test = static_cast<std::size_t>(
      std::llround(spec.ratios[2] * static_cast<double>(n_users)));
  const auto n_valid = std::min(
      n_users - n_test, static_cast<std::size_t>(std::llround(
                            spec.ratios[1] * static_cast<double>(n_users))));
  const std::size_t n_train = n_users - n_test - n_valid;

  // History window plus the target item.
  const std::size_t keep = spec.history_window + 1;
  for (std::size_t rank = 0; rank < n_users; ++rank) {
    const std::size_t u = order[rank];
    auto& user = out.users_[u];
    if (user.items.size() > keep) {
      const auto drop = static_cast<std::ptrdiff_t>(user.items.size() - keep);
      user.items.erase(user.items.begin(), user.items.begin() + drop);
      user.timestamps.erase(user.timestamps.begin(),
                            user.timestamps.begin() + drop);
    }
    const SplitLabel label = rank < n_train             ? SplitLabel::kTrain
                             : rank < n_train + n_valid ? SplitLabel::kValid
                                                        : SplitLabel::kTest;
    out.labels_[u].assign(user.items.size(), label);
  }
  out.split_mode_ = spec.mode;
  return out;
}

// ---------------------------------------------------------------------------
// Head / tail

std::vector<bool> HeadByCount(const std::vector<std::size_t>& counts,
                              double quantile, bool* degenerate) {
  if (!(quantile > 0.0 && quantile < 1.0)) {
    throw ValidationError("segmentation: quantile must be in (0, 1)");
  }
  std::vector<bool> head(counts.size(), false);
  if (counts.empty()) return head;
  std::vector<std::size_t> sorted = counts;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const bool single = sorted.front() == sorted.back();
  if (degenerate) *degenerate = single;
  if (single) {
    spdlog::warn("segmentation: all {} entries share count {}; all labeled head",
                 counts.size(), sorted.front());
    head.assign(counts.size(), true);
    return head;
  }
  const double raw = quantile * static_cast<double>(counts.size());
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(raw - 1e-9)));
  const std::size_t boundary = sorted[std::min(k, sorted.size()) - 1];
  std::size_t n_head = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    head[i] = counts[i] >= boundary;
    n_head += head[i];
  }
  if (n_head > k) {
    spdlog::info("segmentation: ties at boundary count {} grow head from {} "
                 "to {}",
                 boundary, k, n_head);
  }
  return head;
}

Segmentation SegmentHeadTail(const InteractionDataset& ds, double quantile) {
  Segmentation s;
  s.head_items = HeadByCount(ds.ItemCounts(), quantile, &s.items_degenerate);
  std::vector<std::size_t> user_counts;
  user_counts.reserve(ds.users().size());
  for (const auto& u : ds.users()) user_counts.push_back(u.items.size());
  s.head_users = HeadByCount(user_counts, quantile, &s.users_degenerate);
  return s;
}

}  // namespace nullfuse
