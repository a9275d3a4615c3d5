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

// Ingestion of item language embeddings, catalogs and interaction logs, and
// construction of evaluation splits.

#ifndef NULLFUSE_CORPUS_H_
#define NULLFUSE_CORPUS_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "nullfuse/types.h"

namespace nullfuse {

/// N x d_l item language embeddings, one row per catalog item.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  /// Throws ValidationError on empty shape or non-finite entries.
  explicit EmbeddingMatrix(Matrix data);

  std::size_t n_items() const { return static_cast<std::size_t>(data_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(data_.cols()); }
  const Matrix& data() const { return data_; }

 private:
  Matrix data_;
};

/// Reads `<path>` (raw little-endian f32, row-major) and its sidecar
/// `<path>.json` ({"n_items", "dim", "dtype": "f32"}).
EmbeddingMatrix LoadEmbeddings(const std::filesystem::path& path);
void SaveEmbeddings(const EmbeddingMatrix& e, const std::filesystem::path& path);
std::filesystem::path SidecarPath(const std::filesystem::path& path);

struct CatalogEntry {
  std::string external_id;
  std::string metadata;
};

class ItemCatalog {
 public:
  ItemCatalog() = default;
  /// Row index of entry i is i. Throws on duplicate ids.
  explicit ItemCatalog(std::vector<CatalogEntry> entries);
  /// Ids "0".."n-1"; used when no catalog file accompanies the embeddings.
  static ItemCatalog Identity(std::size_t n_items);

  std::size_t size() const { return entries_.size(); }
  const CatalogEntry& at(ItemIndex row) const { return entries_.at(row); }
  std::optional<ItemIndex> Find(const std::string& external_id) const;

 private:
  std::vector<CatalogEntry> entries_;
  std::unordered_map<std::string, ItemIndex> index_;
};

/// One external id per line, optionally followed by TAB and metadata text.
ItemCatalog LoadCatalog(const std::filesystem::path& path);

/// Deterministic stand-in for a text embedding service: each row is a
/// Gaussian vector seeded by the hash of the entry's id and metadata.
EmbeddingMatrix MockEmbeddings(const ItemCatalog& catalog, std::size_t dim);
void SaveCatalog(const ItemCatalog& catalog, const std::filesystem::path& path);

enum class SplitLabel : std::uint8_t { kTrain = 0, kValid = 1, kTest = 2 };
enum class SplitMode { kLeaveOneOut, kColdStart };

std::string ToString(SplitMode mode);
SplitMode ParseSplitMode(const std::string& s);

struct SplitSpec {
  SplitMode mode = SplitMode::kLeaveOneOut;
  std::array<double, 3> ratios = {0.8, 0.1, 0.1};
  std::size_t history_window = 10;

  void Validate() const;
};

struct UserHistory {
  std::string user_id;
  Sequence items;
  std::vector<std::int64_t> timestamps;  // empty when unknown
};

/// A next-item prediction query: predict `target` from `history`.
struct Example {
  std::size_t user = 0;
  Sequence history;
  ItemIndex target = 0;
};

class InteractionDataset {
 public:
  InteractionDataset() = default;
  /// Validates item bounds and timestamp order. Sequences shorter than 2 are
  /// rejected.
  InteractionDataset(std::vector<UserHistory> users, std::size_t n_items,
                     std::size_t max_history);

  const std::vector<UserHistory>& users() const { return users_; }
  std::size_t n_items() const { return n_items_; }
  std::size_t max_history() const { return max_history_; }
  bool has_timestamps() const;

  bool has_splits() const { return split_mode_.has_value(); }
  SplitMode split_mode() const { return split_mode_.value(); }
  /// Per-user, per-position split labels; empty until BuildSplits.
  const std::vector<std::vector<SplitLabel>>& labels() const { return labels_; }

  /// Sequences whose next-item transitions are used for training.
  std::vector<Sequence> TrainSequences() const;
  /// Evaluation queries for the valid or test split, histories truncated to
  /// max_history.
  std::vector<Example> Examples(SplitLabel split) const;
  /// Interaction counts per item over the training portion.
  std::vector<std::size_t> ItemCounts() const;

  nlohmann::json SplitsToJson() const;
  void ApplySplitsJson(const nlohmann::json& j);

 private:
  friend InteractionDataset BuildSplits(const InteractionDataset&,
                                        const SplitSpec&);
  std::vector<UserHistory> users_;
  std::size_t n_items_ = 0;
  std::size_t max_history_ = 10;
  std::optional<SplitMode> split_mode_;
  std::vector<std::vector<SplitLabel>> labels_;
};

/// Reads `user_id<TAB>item_id<TAB>unix_timestamp` lines. Interactions are
/// grouped per user and stably ordered by timestamp. Unknown item ids throw.
InteractionDataset LoadInteractions(const std::filesystem::path& path,
                                    const ItemCatalog& catalog,
                                    std::size_t max_history);
void SaveInteractions(const InteractionDataset& ds, const ItemCatalog& catalog,
                      const std::filesystem::path& path);

/// Leave-one-out: last position test, second-to-last valid, rest train.
/// Cold-start: users ordered by last interaction time (ties by user_id),
/// most recent `ratios[2]` fraction test, next `ratios[1]` valid, each user
/// truncated to the last `history_window` interactions.
InteractionDataset BuildSplits(const InteractionDataset& ds,
                               const SplitSpec& spec);

struct Segmentation {
  std::vector<bool> head_items;
  std::vector<bool> head_users;
  bool items_degenerate = false;
  bool users_degenerate = false;
};

/// Labels the top `quantile` fraction by count as head. Entries tied with the
/// boundary count are all head. A single distinct count makes everything
/// head and logs a warning.
std::vector<bool> HeadByCount(const std::vector<std::size_t>& counts,
                              double quantile, bool* degenerate = nullptr);
Segmentation SegmentHeadTail(const InteractionDataset& ds, double quantile);

}  // namespace nullfuse

#endif  // NULLFUSE_CORPUS_H_
