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

#include "nullfuse/eval.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>

namespace nullfuse {

double NdcgAtK(std::size_t rank, std::size_t k) {
  if (rank < 1 || rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

double MrrAtK(std::size_t rank, std::size_t k) {
  if (rank < 1 || rank > k) return 0.0;
  return 1.0 / static_cast<double>(rank);
}

double RecallAtK(std::size_t rank, std::size_t k) {
  return rank >= 1 && rank <= k ? 1.0 : 0.0;
}

std::size_t RankOfTarget(std::span<const float> scores, ItemIndex target) {
  if (target >= scores.size()) throw ValidationError("rank: target out of range");
  const float st = scores[target];
  if (std::isnan(st)) throw NumericalError("rank: NaN target score");
  std::size_t ahead = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > st || (scores[i] == st && i < target)) ++ahead;
  }
  return ahead + 1;
}

std::vector<ItemIndex> RankItems(std::span<const float> scores) {
  std::vector<ItemIndex> order(scores.size());
  std::iota(order.begin(), order.end(), ItemIndex{0});
  std::stable_sort(order.begin(), order.end(), [&](ItemIndex a, ItemIndex b) {
    return scores[a] > scores[b];
  });
  return order;
}

nlohmann::json EvalReport::ToJson() const {
  nlohmann::json j;
  j["ks"] = ks;
  auto& segs = j["segments"];
  segs = nlohmann::json::object();
  for (const auto& [name, seg] : segments) {
    nlohmann::json s;
    s["count"] = seg.count;
    for (const auto& [k, m] : seg.at_k) {
      s["metrics"][std::to_string(k)] = {
          {"ndcg", m.ndcg}, {"mrr", m.mrr}, {"recall", m.recall}};
    }
    segs[name] = std::move(s);
  }
  j["manifest"] = manifest;
  return j;
}

void EvalReport::WriteCsv(std::ostream& os) const {
  os << "segment,count,k,ndcg,mrr,recall\n" << std::fixed
     << std::setprecision(8);
  for (const auto& [name, seg] : segments) {
    for (const auto& [k, m] : seg.at_k) {
      os << name << ',' << seg.count << ',' << k << ',' << m.ndcg << ','
         << m.mrr << ',' << m.recall << '\n';
    }
  }
}

EvalReport Evaluate(const Scorer& scorer, const std::vector<Example>& examples,
                    std::size_t n_items, const Segmentation* segmentation,
                    const EvalOptions& options) {
  if (examples.empty()) throw ValidationError("evaluate: empty split");
  if (options.ks.empty()) throw ValidationError("evaluate: no cutoffs given");

  EvalReport report;
  report.ks = options.ks;
  std::vector<std::string> names = {"overall"};
  if (segmentation) {
    names.insert(names.end(),
                 {"head_user", "tail_user", "head_item", "tail_item"});
  }
  for (const auto& name : names) {
    auto& seg = report.segments[name];
    for (std::size_t k : options.ks) seg.at_k[k] = Metrics{};
  }

  std::vector<float> scores;
  for (const auto& ex : examples) {
    scores.assign(n_items, 0.0f);
    scorer(ex, scores);
    if (scores.size() != n_items) {
      throw ValidationError("evaluate: scorer returned " +
                            std::to_string(scores.size()) + " scores, expected " +
                            std::to_string(n_items));
    }
    if (options.mask_history) {
      for (ItemIndex item : ex.history) {
        if (item != ex.target && item < n_items) {
          scores[item] = -std::numeric_limits<float>::infinity();
        }
      }
    }
    const std::size_t rank = RankOfTarget(scores, ex.target);

    std::vector<SegmentMetrics*> hit = {&report.segments["overall"]};
    if (segmentation) {
      const bool head_user = ex.user < segmentation->head_users.size() &&
                             segmentation->head_users[ex.user];
      const bool head_item = ex.target < segmentation->head_items.size() &&
                             segmentation->head_items[ex.target];
      hit.push_back(&report.segments[head_user ? "head_user" : "tail_user"]);
      hit.push_back(&report.segments[head_item ? "head_item" : "tail_item"]);
    }
    for (auto* seg : hit) {
      ++seg->count;
      for (auto& [k, m] : seg->at_k) {
        m.ndcg += NdcgAtK(rank, k);
        m.mrr += MrrAtK(rank, k);
        m.recall += RecallAtK(rank, k);
      }
    }
  }
  for (auto& [name, seg] : report.segments) {
    if (seg.count == 0) continue;
    const double inv = 1.0 / static_cast<double>(seg.count);
    for (auto& [k, m] : seg.at_k) {
      m.ndcg *= inv;
      m.mrr *= inv;
      m.recall *= inv;
    }
  }
  return report;
}

}  // namespace nullfuse
