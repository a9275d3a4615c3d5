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

// All-rank evaluation with a single relevant item per query.

#ifndef NULLFUSE_EVAL_H_
#define NULLFUSE_EVAL_H_

#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nullfuse/corpus.h"
#include "nullfuse/types.h"

namespace nullfuse {

double NdcgAtK(std::size_t rank, std::size_t k);
double MrrAtK(std::size_t rank, std::size_t k);
double RecallAtK(std::size_t rank, std::size_t k);

/// 1-based rank of `target` when items are ordered by descending score with
/// ties broken by lower index.
std::size_t RankOfTarget(std::span<const float> scores, ItemIndex target);

/// Full ranking, same ordering policy as RankOfTarget.
std::vector<ItemIndex> RankItems(std::span<const float> scores);

struct Metrics {
  double ndcg = 0.0;
  double mrr = 0.0;
  double recall = 0.0;
};

struct SegmentMetrics {
  std::size_t count = 0;
  std::map<std::size_t, Metrics> at_k;
};

struct EvalOptions {
  std::vector<std::size_t> ks = {10, 20};
  /// Push items already in the history (other than the target) to the
  /// bottom of the ranking.
  bool mask_history = false;
};

struct EvalReport {
  std::vector<std::size_t> ks;
  /// "overall", and when a segmentation is given "head_user", "tail_user",
  /// "head_item", "tail_item".
  std::map<std::string, SegmentMetrics> segments;
  nlohmann::json manifest = nlohmann::json::object();

  const Metrics& Overall(std::size_t k) const {
    return segments.at("overall").at_k.at(k);
  }
  nlohmann::json ToJson() const;
  void WriteCsv(std::ostream& os) const;
};

/// Fills `scores` (size N) for one query.
using Scorer = std::function<void(const Example&, std::vector<float>& scores)>;

/// Throws ValidationError on an empty example list.
EvalReport Evaluate(const Scorer& scorer, const std::vector<Example>& examples,
                    std::size_t n_items, const Segmentation* segmentation,
                    const EvalOptions& options);

}  // namespace nullfuse

#endif  // NULLFUSE_EVAL_H_
