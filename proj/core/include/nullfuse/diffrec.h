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

// Generative next-item model: a history-conditioned denoiser over item
// embeddings with a variance-preserving forward process, sampled with DDIM
// (or ancestral DDPM) and grounded to the nearest real item.

#ifndef NULLFUSE_DIFFREC_H_
#define NULLFUSE_DIFFREC_H_

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nullfuse/corpus.h"
#include "nullfuse/item_encoder.h"
#include "nullfuse/nn.h"
#include "nullfuse/seqrec.h"
#include "nullfuse/tensor_archive.h"
#include "nullfuse/types.h"

namespace nullfuse {

/// alpha_bar[0] = 1 and alpha_bar strictly decreasing over t = 1..T.
class DiffusionSchedule {
 public:
  static DiffusionSchedule Linear(std::size_t steps, double beta_start,
                                  double beta_end);

  std::size_t steps() const { return betas_.size() - 1; }
  double AlphaBar(std::size_t t) const { return alpha_bar_.at(t); }
  double Beta(std::size_t t) const { return betas_.at(t); }

 private:
  std::vector<double> betas_;      // betas_[0] = 0
  std::vector<double> alpha_bar_;  // size T+1
};

/// sqrt(alpha_bar) x0 + sqrt(1 - alpha_bar) eps, row-wise.
template <typename T>
Mat<T> ForwardNoiseWith(const Mat<T>& x0, double alpha_bar, const Mat<T>& eps);

/// Throws ValidationError unless 1 <= t <= T.
template <typename T>
Mat<T> ForwardNoise(const Mat<T>& x0, const DiffusionSchedule& schedule,
                    std::size_t t, const Mat<T>& eps);

enum class Prediction { kX0, kEpsilon };
enum class Sampler { kDdim, kDdpm };

std::string ToString(Prediction p);
Prediction ParsePrediction(const std::string& s);
std::string ToString(Sampler s);
Sampler ParseSampler(const std::string& s);

struct DenoiserConfig {
  std::size_t dim = 32;
  std::size_t hidden = 128;
  std::size_t steps = 100;  // T
  std::size_t max_history = 10;
  Prediction prediction = Prediction::kX0;
};

/// c = mean(history) Wc + bc; z = [x_t, c, time_embedding[t]];
/// out = gelu(z W1 + b1) W2 + b2.
template <typename T>
struct DenoiserParams {
  DenoiserConfig config;
  Mat<T> time_embedding;  // (T+1) x d
  Mat<T> cond_w, cond_b;  // d x d, 1 x d
  Mlp2<T> trunk;          // 3d -> hidden -> d

  static DenoiserParams Init(const DenoiserConfig& config, std::uint64_t seed);
  DenoiserParams ZerosLike() const;
  std::vector<NamedBlock<T>> Blocks();
  std::size_t ParameterCount() const;

  template <typename U>
  DenoiserParams<U> Cast() const {
    DenoiserParams<U> out;
    out.config = config;
    out.time_embedding = time_embedding.template cast<U>();
    out.cond_w = cond_w.template cast<U>();
    out.cond_b = cond_b.template cast<U>();
    out.trunk.w1 = trunk.w1.template cast<U>();
    out.trunk.b1 = trunk.b1.template cast<U>();
    out.trunk.w2 = trunk.w2.template cast<U>();
    out.trunk.b2 = trunk.b2.template cast<U>();
    return out;
  }
};

/// Network output (x0 or epsilon estimate, per config) for a batch of noisy
/// inputs (B x d) given per-row history conditions (B x d) and timesteps.
template <typename T>
Mat<T> DenoiserForward(const DenoiserParams<T>& params, const Mat<T>& x_t,
                       const Mat<T>& condition,
                       const std::vector<std::size_t>& timesteps);

/// Mean of the last L history rows of `item_embeddings`.
template <typename T>
Mat<T> HistoryCondition(const Mat<T>& item_embeddings, const Sequence& history,
                        std::size_t max_history);

/// One training query with its diffusion draw fixed, so the loss is a
/// deterministic function of the parameters.
template <typename T>
struct DiffusionDraw {
  Sequence history;
  ItemIndex target = 0;
  std::size_t t = 1;
  Mat<T> noise;  // 1 x d
};

/// Mean squared error over a batch of draws (averaged over rows and
/// coordinates). Gradients flow into the parameters and into the item rows
/// used as history, noisy input and regression target.
template <typename T>
T DenoiserLoss(const DenoiserParams<T>& params, const Mat<T>& item_embeddings,
               const DiffusionSchedule& schedule,
               const std::vector<DiffusionDraw<T>>& draws,
               DenoiserParams<T>* grad, Mat<T>* grad_embeddings);

/// x0 estimate for x_t at step t.
using X0Predictor = std::function<Matrix(const Matrix& x_t, std::size_t t)>;

/// Reverse process from `initial_noise` (1 x d) using `sample_steps` evenly
/// spaced timesteps from T down to 0. DDIM is deterministic; DDPM draws
/// fresh noise from `rng`.
Matrix SampleWith(const X0Predictor& predict, const DiffusionSchedule& schedule,
                  std::size_t sample_steps, const Matrix& initial_noise,
                  Sampler sampler, std::mt19937_64* rng);

/// Draws the initial noise from `seed` and samples conditioned on `history`.
Matrix Sample(const DenoiserParams<float>& params, const Matrix& item_embeddings,
              const Sequence& history, const DiffusionSchedule& schedule,
              std::size_t sample_steps, Sampler sampler, std::uint64_t seed);

/// Arg max of inner product (or cosine) over items; ties go to the lower
/// index.
ItemIndex Ground(const Matrix& x, const Matrix& item_embeddings,
                 bool cosine = false);

struct DiffusionTrainConfig {
  TrainConfig base;  // lr, batch size, patience, epochs, seed
  std::size_t sample_steps = 10;
  Sampler sampler = Sampler::kDdim;
};

struct DiffTrainResult {
  DenoiserParams<float> params;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_ndcg10 = 0.0;
};

/// Trains with one uniformly drawn timestep per query; validation ranks all
/// items by inner product with the sampled embedding.
DiffTrainResult TrainDenoiser(DenoiserParams<float> params,
                              ItemEncoder& encoder,
                              const InteractionDataset& dataset,
                              const DiffusionSchedule& schedule,
                              const DiffusionTrainConfig& config);

/// Per-item scores for a history: embeddings * sampled embedding.
std::vector<float> ScoreAllGenerative(const DenoiserParams<float>& params,
                                      const Matrix& item_embeddings,
                                      const Sequence& history,
                                      const DiffusionSchedule& schedule,
                                      std::size_t sample_steps, Sampler sampler,
                                      std::uint64_t seed);

void SaveDenoiser(const DenoiserParams<float>& params, TensorArchive& archive);
DenoiserParams<float> LoadDenoiser(const TensorArchive& archive);

}  // namespace nullfuse

#endif  // NULLFUSE_DIFFREC_H_
