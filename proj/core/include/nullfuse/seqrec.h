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

// Discriminative next-item model: a pre-norm causal self-attention encoder
// over item embeddings, trained with sampled-negative InfoNCE and scored
// against every item at inference.
//
// Histories of length n <= L occupy the last n of L positions, so the
// prediction for the next item always reads position L-1. No padding tokens
// are materialized.

#ifndef NULLFUSE_SEQREC_H_
#define NULLFUSE_SEQREC_H_

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nullfuse/corpus.h"
#include "nullfuse/item_encoder.h"
#include "nullfuse/nn.h"
#include "nullfuse/tensor_archive.h"
#include "nullfuse/types.h"

namespace nullfuse {

struct SeqModelConfig {
  std::size_t dim = 32;
  std::size_t layers = 2;
  std::size_t heads = 1;
  std::size_t max_history = 10;
  std::size_t ff_multiplier = 4;
};

template <typename T>
struct AttentionBlock {
  Mat<T> ln1_gain, ln1_bias;
  Mat<T> wq, wk, wv, wo;
  Mat<T> ln2_gain, ln2_bias;
  Mat<T> ff_w1, ff_b1, ff_w2, ff_b2;
};

template <typename T>
struct SeqModelParams {
  SeqModelConfig config;
  Mat<T> position;  // L x d
  std::vector<AttentionBlock<T>> blocks;
  Mat<T> final_gain, final_bias;

  static SeqModelParams Init(const SeqModelConfig& config, std::uint64_t seed);
  SeqModelParams ZerosLike() const;
  std::vector<NamedBlock<T>> Blocks();
  std::size_t ParameterCount() const;

  template <typename U>
  SeqModelParams<U> Cast() const {
    SeqModelParams<U> out;
    out.config = config;
    out.position = position.template cast<U>();
    for (const auto& b : blocks) {
      AttentionBlock<U> c;
      c.ln1_gain = b.ln1_gain.template cast<U>();
      c.ln1_bias = b.ln1_bias.template cast<U>();
      c.wq = b.wq.template cast<U>();
      c.wk = b.wk.template cast<U>();
      c.wv = b.wv.template cast<U>();
      c.wo = b.wo.template cast<U>();
      c.ln2_gain = b.ln2_gain.template cast<U>();
      c.ln2_bias = b.ln2_bias.template cast<U>();
      c.ff_w1 = b.ff_w1.template cast<U>();
      c.ff_b1 = b.ff_b1.template cast<U>();
      c.ff_w2 = b.ff_w2.template cast<U>();
      c.ff_b2 = b.ff_b2.template cast<U>();
      out.blocks.push_back(std::move(c));
    }
    out.final_gain = final_gain.template cast<U>();
    out.final_bias = final_bias.template cast<U>();
    return out;
  }
};

template <typename T>
struct EncodeCache {
  struct Layer {
    Mat<T> input;  // residual stream entering the block
    LayerNormCache<T> ln1;
    Mat<T> normed1, q, k, v;
    std::vector<Mat<T>> attention;  // per head, n x n, causal
    Mat<T> context;                 // concatenated heads, n x d
    Mat<T> mid;                     // stream after the attention residual
    LayerNormCache<T> ln2;
    Mat<T> normed2, ff_pre, ff_act;
  };
  std::vector<Layer> layers;
  Mat<T> stream;  // input to the final layer norm
  LayerNormCache<T> final_ln;
  std::size_t offset = 0;  // first position row used
};

/// Runs the encoder over n <= L token embeddings (n x d). Returns the n x d
/// output rows; row t only depends on tokens 0..t.
template <typename T>
Mat<T> EncodeTokens(const SeqModelParams<T>& params, const Mat<T>& tokens,
                    EncodeCache<T>* cache);

/// Backpropagates `d_outputs` through a cached EncodeTokens call.
/// Accumulates parameter gradients into `grad` and returns d(tokens).
template <typename T>
Mat<T> EncodeTokensBackward(const SeqModelParams<T>& params,
                            const EncodeCache<T>& cache,
                            const Mat<T>& d_outputs, SeqModelParams<T>& grad);

/// Preference vector (1 x d) for a history, truncated to its last L items.
/// Throws ValidationError on an empty history.
template <typename T>
Mat<T> Encode(const SeqModelParams<T>& params, const Mat<T>& item_embeddings,
              const Sequence& history);

enum class LossKind { kInfoNce, kBinary };

std::string ToString(LossKind kind);
LossKind ParseLossKind(const std::string& s);

/// -log(exp(s+) / (exp(s+) + sum_k exp(s-_k))) with s = preference . row.
/// `candidates` row 0 is the positive, rows 1..K the negatives. Optional
/// gradients are overwritten.
template <typename T>
T InfoNceLoss(const Mat<T>& preference, const Mat<T>& candidates,
              Mat<T>* d_preference, Mat<T>* d_candidates);

/// -log sigma(s+) - mean_k log(1 - sigma(s-_k)).
template <typename T>
T BinaryLoss(const Mat<T>& preference, const Mat<T>& candidates,
             Mat<T>* d_preference, Mat<T>* d_candidates);

/// A training window: inputs items[0..n-2] predict items[1..n-1].
/// negatives[t] holds the K sampled negatives for target t+1.
struct TrainWindow {
  Sequence items;
  std::vector<Sequence> negatives;
};

using TrainBatch = std::vector<TrainWindow>;

/// Summed loss over every target position of a window. Accumulates
/// parameter and item-embedding gradients when the pointers are non-null.
template <typename T>
T WindowLoss(const SeqModelParams<T>& params, const Mat<T>& item_embeddings,
             const TrainWindow& window, LossKind kind,
             SeqModelParams<T>* grad, Mat<T>* grad_embeddings);

/// Splits a sequence into windows of at most L+1 items, stepping back from
/// the end so every transition is covered exactly once.
std::vector<Sequence> MakeWindows(const Sequence& seq, std::size_t max_history);

/// Uniform over all items except `positive`.
Sequence SampleNegatives(std::size_t n_items, ItemIndex positive,
                         std::size_t k, std::mt19937_64& rng);

/// Scores of every item for a history: embeddings * preference.
std::vector<float> ScoreAll(const SeqModelParams<float>& params,
                            const Matrix& item_embeddings,
                            const Sequence& history);

struct TrainConfig {
  double lr = 1e-3;
  double id_lr = 0.0;  // 0 uses lr for item-encoder slots too
  std::size_t batch_size = 256;
  std::size_t patience = 5;
  /// Early stopping never ends a run before this epoch.
  std::size_t warmup = 0;
  std::size_t max_epochs = 50;
  std::size_t negatives = 64;
  std::uint64_t seed = 22;
  LossKind loss = LossKind::kInfoNce;
  bool mask_history = false;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double val_ndcg10 = 0.0;
};

/// Writes `epoch,loss,val_ndcg10` rows with fixed precision.
std::string FormatTrainLog(const std::vector<EpochLog>& log);

struct SeqTrainResult {
  SeqModelParams<float> params;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_ndcg10 = 0.0;
};

/// Adam training with early stopping on validation NDCG@10. On return the
/// encoder holds its best-epoch state. Throws NumericalError on a NaN loss
/// and ValidationError on an empty training split.
SeqTrainResult TrainSeqRec(SeqModelParams<float> params, ItemEncoder& encoder,
                           const InteractionDataset& dataset,
                           const TrainConfig& config);

void SaveSeqModel(const SeqModelParams<float>& params, TensorArchive& archive);
SeqModelParams<float> LoadSeqModel(const TensorArchive& archive);

}  // namespace nullfuse

#endif  // NULLFUSE_SEQREC_H_
