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

#include "nullfuse/diffrec.h"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "nullfuse/eval.h"

namespace nullfuse {

DiffusionSchedule DiffusionSchedule::Linear(std::size_t steps,
                                            double beta_start,
                                            double beta_end) {
  if (steps < 1) throw ValidationError("schedule: steps must be >= 1");
  if (!(beta_start > 0.0) || !(beta_end >= beta_start) || !(beta_end < 1.0)) {
    throw ValidationError("schedule: need 0 < beta_start <= beta_end < 1");
  }
  DiffusionSchedule s;
  s.betas_.assign(steps + 1, 0.0);
  s.alpha_bar_.assign(steps + 1, 1.0);
  for (std::size_t t = 1; t <= steps; ++t) {
    const double frac =
        steps == 1 ? 0.0
                   : static_cast<double>(t - 1) / static_cast<double>(steps - 1);
    s.betas_[t] = beta_start + (beta_end - beta_start) * frac;
    s.alpha_bar_[t] = s.alpha_bar_[t - 1] * (1.0 - s.betas_[t]);
  }
  return s;
}

template <typename T>
Mat<T> ForwardNoiseWith(const Mat<T>& x0, double alpha_bar, const Mat<T>& eps) {
  if (x0.rows() != eps.rows() || x0.cols() != eps.cols()) {
    throw ValidationError("forward_noise: noise shape mismatch");
  }
  if (!(alpha_bar >= 0.0 && alpha_bar <= 1.0)) {
    throw ValidationError("forward_noise: alpha_bar outside [0, 1]");
  }
  return T(std::sqrt(alpha_bar)) * x0 + T(std::sqrt(1.0 - alpha_bar)) * eps;
}

template <typename T>
Mat<T> ForwardNoise(const Mat<T>& x0, const DiffusionSchedule& schedule,
                    std::size_t t, const Mat<T>& eps) {
  if (t < 1 || t > schedule.steps()) {
    throw ValidationError("forward_noise: t=" + std::to_string(t) +
                          " outside [1, " + std::to_string(schedule.steps()) +
                          "]");
  }
  return ForwardNoiseWith(x0, schedule.AlphaBar(t), eps);
}

std::string ToString(Prediction p) {
  return p == Prediction::kX0 ? "x0" : "epsilon";
}

Prediction ParsePrediction(const std::string& s) {
  if (s == "x0") return Prediction::kX0;
  if (s == "epsilon") return Prediction::kEpsilon;
  throw ValidationError("unknown prediction target '" + s + "'");
}

std::string ToString(Sampler s) { return s == Sampler::kDdim ? "ddim" : "ddpm"; }

Sampler ParseSampler(const std::string& s) {
  if (s == "ddim") return Sampler::kDdim;
  if (s == "ddpm") return Sampler::kDdpm;
  throw ValidationError("unknown sampler '" + s + "'");
}

template <typename T>
DenoiserParams<T> DenoiserParams<T>::Init(const DenoiserConfig& config,
                                          std::uint64_t seed) {
  if (config.dim < 1 || config.hidden < 1 || config.steps < 1 ||
      config.max_history < 1) {
    throw ValidationError("denoiser: dim, hidden, steps and window must be >= 1");
  }
  std::mt19937_64 rng(seed);
  const auto d = static_cast<Eigen::Index>(config.dim);
  DenoiserParams p;
  p.config = config;
  std::normal_distribution<double> unit(0.0, 1.0);
  p.time_embedding.resize(static_cast<Eigen::Index>(config.steps) + 1, d);
  for (Eigen::Index i = 0; i < p.time_embedding.size(); ++i) {
    p.time_embedding.data()[i] = T(unit(rng));
  }
  std::normal_distribution<double> proj(0.0, 1.0 / std::sqrt(double(d)));
  p.cond_w.resize(d, d);
  for (Eigen::Index i = 0; i < p.cond_w.size(); ++i) {
    p.cond_w.data()[i] = T(proj(rng));
  }
  p.cond_b = Mat<T>::Zero(1, d);
  p.trunk = Mlp2<T>::Init(3 * config.dim, config.hidden, config.dim, rng);
  return p;
}

template <typename T>
DenoiserParams<T> DenoiserParams<T>::ZerosLike() const {
  DenoiserParams z;
  z.config = config;
  z.time_embedding = Mat<T>::Zero(time_embedding.rows(), time_embedding.cols());
  z.cond_w = Mat<T>::Zero(cond_w.rows(), cond_w.cols());
  z.cond_b = Mat<T>::Zero(cond_b.rows(), cond_b.cols());
  z.trunk = trunk.ZerosLike();
  return z;
}

template <typename T>
std::vector<NamedBlock<T>> DenoiserParams<T>::Blocks() {
  std::vector<NamedBlock<T>> out = {{"time_embedding", &time_embedding},
                                    {"cond_w", &cond_w},
                                    {"cond_b", &cond_b}};
  for (auto& b : trunk.Blocks("trunk")) out.push_back(b);
  return out;
}

template <typename T>
std::size_t DenoiserParams<T>::ParameterCount() const {
  return static_cast<std::size_t>(time_embedding.size() + cond_w.size() +
                                  cond_b.size()) +
         trunk.ParameterCount();
}

namespace {

template <typename T>
Mat<T> TrunkInput(const DenoiserParams<T>& params, const Mat<T>& x_t,
                  const Mat<T>& cond_proj,
                  const std::vector<std::size_t>& timesteps) {
  const auto b = x_t.rows();
  const auto d = x_t.cols();
  Mat<T> z(b, 3 * d);
  z.leftCols(d) = x_t;
  z.middleCols(d, d) = cond_proj;
  for (Eigen::Index i = 0; i < b; ++i) {
    const std::size_t t = timesteps[static_cast<std::size_t>(i)];
    if (t >= static_cast<std::size_t>(params.time_embedding.rows())) {
      throw ValidationError("denoiser: timestep out of range");
    }
    z.row(i).tail(d) = params.time_embedding.row(static_cast<Eigen::Index>(t));
  }
  return z;
}

template <typename T>
Mat<T> ProjectCondition(const DenoiserParams<T>& params, const Mat<T>& condition) {
  Mat<T> c = condition * params.cond_w;
  c.rowwise() += params.cond_b.row(0);
  return c;
}

}  // namespace

template <typename T>
Mat<T> DenoiserForward(const DenoiserParams<T>& params, const Mat<T>& x_t,
                       const Mat<T>& condition,
                       const std::vector<std::size_t>& timesteps) {
  const auto d = static_cast<Eigen::Index>(params.config.dim);
  if (x_t.cols() != d || condition.cols() != d ||
      condition.rows() != x_t.rows() ||
      static_cast<std::size_t>(x_t.rows()) != timesteps.size()) {
    throw ValidationError("denoiser: input shape mismatch");
  }
  const Mat<T> z =
      TrunkInput(params, x_t, ProjectCondition(params, condition), timesteps);
  return params.trunk.Forward(z, nullptr);
}

template <typename T>
Mat<T> HistoryCondition(const Mat<T>& item_embeddings, const Sequence& history,
                        std::size_t max_history) {
  if (history.empty()) throw ValidationError("condition: empty history");
  const std::size_t start =
      history.size() > max_history ? history.size() - max_history : 0;
  Mat<T> c = Mat<T>::Zero(1, item_embeddings.cols());
  for (std::size_t i = start; i < history.size(); ++i) {
    if (history[i] >= item_embeddings.rows()) {
      throw ValidationError("condition: item index out of range");
    }
    c += item_embeddings.row(history[i]);
  }
  return c / T(history.size() - start);
}

template <typename T>
T DenoiserLoss(const DenoiserParams<T>& params, const Mat<T>& item_embeddings,
               const DiffusionSchedule& schedule,
               const std::vector<DiffusionDraw<T>>& draws,
               DenoiserParams<T>* grad, Mat<T>* grad_embeddings) {
  if (draws.empty()) throw ValidationError("denoiser loss: empty batch");
  const auto d = static_cast<Eigen::Index>(params.config.dim);
  if (item_embeddings.cols() != d) {
    throw ValidationError("denoiser loss: embedding dim mismatch");
  }
  if (schedule.steps() != params.config.steps) {
    throw ValidationError("denoiser loss: schedule length != model steps");
  }
  const auto b = static_cast<Eigen::Index>(draws.size());
  const std::size_t l = params.config.max_history;

  Mat<T> x0(b, d), x_t(b, d), cond(b, d), target(b, d);
  std::vector<std::size_t> ts(draws.size());
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& dr = draws[static_cast<std::size_t>(i)];
    if (dr.t < 1 || dr.t > schedule.steps()) {
      throw ValidationError("denoiser loss: t outside [1, T]");
    }
    if (dr.target >= item_embeddings.rows()) {
      throw ValidationError("denoiser loss: target out of range");
    }
    ts[static_cast<std::size_t>(i)] = dr.t;
    x0.row(i) = item_embeddings.row(dr.target);
    x_t.row(i) = ForwardNoiseWith<T>(x0.row(i), schedule.AlphaBar(dr.t), dr.noise);
    cond.row(i) = HistoryCondition(item_embeddings, dr.history, l);
  }
  target = params.config.prediction == Prediction::kX0
               ? x0
               : [&] {
                   Mat<T> eps(b, d);
                   for (Eigen::Index i = 0; i < b; ++i) {
                     eps.row(i) = draws[static_cast<std::size_t>(i)].noise;
                   }
                   return eps;
                 }();

  const Mat<T> cproj = ProjectCondition(params, cond);
  const Mat<T> z = TrunkInput(params, x_t, cproj, ts);
  typename Mlp2<T>::Cache cache;
  const Mat<T> out = params.trunk.Forward(z, &cache);
  const Mat<T> diff = out - target;
  const T norm = T(1) / T(b * d);
  const T loss = diff.squaredNorm() * norm;
  if (!grad && !grad_embeddings) return loss;

  DenoiserParams<T> scratch;
  DenoiserParams<T>& g = grad ? *grad : (scratch = params.ZerosLike());
  const Mat<T> dout = diff * (T(2) * norm);
  const Mat<T> dz = params.trunk.Backward(cache, dout, g.trunk, true);
  const Mat<T> dxt = dz.leftCols(d);
  const Mat<T> dc = dz.middleCols(d, d);
  for (Eigen::Index i = 0; i < b; ++i) {
    g.time_embedding.row(static_cast<Eigen::Index>(ts[static_cast<std::size_t>(i)])) +=
        dz.row(i).tail(d);
  }
  g.cond_w.noalias() += cond.transpose() * dc;
  g.cond_b += dc.colwise().sum();
  if (grad_embeddings) {
    const Mat<T> dcond = dc * params.cond_w.transpose();
    for (Eigen::Index i = 0; i < b; ++i) {
      const auto& dr = draws[static_cast<std::size_t>(i)];
      const T sa = T(std::sqrt(schedule.AlphaBar(dr.t)));
      Mat<T> dx0 = sa * dxt.row(i);
      if (params.config.prediction == Prediction::kX0) dx0 -= dout.row(i);
      grad_embeddings->row(dr.target) += dx0;
      const std::size_t start = dr.history.size() > l ? dr.history.size() - l : 0;
      const T share = T(1) / T(dr.history.size() - start);
      for (std::size_t j = start; j < dr.history.size(); ++j) {
        grad_embeddings->row(dr.history[j]) += share * dcond.row(i);
      }
    }
  }
  return loss;
}

Matrix SampleWith(const X0Predictor& predict, const DiffusionSchedule& schedule,
                  std::size_t sample_steps, const Matrix& initial_noise,
                  Sampler sampler, std::mt19937_64* rng) {
  const std::size_t big_t = schedule.steps();
  if (sample_steps < 1 || sample_steps > big_t) {
    throw ValidationError("sample: steps must be in [1, T]");
  }
  if (sampler == Sampler::kDdpm && !rng) {
    throw ValidationError("sample: ancestral sampling needs an rng");
  }
  std::vector<std::size_t> grid(sample_steps + 1);
  for (std::size_t k = 0; k <= sample_steps; ++k) {
    grid[k] = k * big_t / sample_steps;
  }
  std::normal_distribution<float> unit(0.0f, 1.0f);
  Matrix x = initial_noise;
  for (std::size_t k = sample_steps; k >= 1; --k) {
    const std::size_t t = grid[k], prev = grid[k - 1];
    const double ab = schedule.AlphaBar(t);
    const double ab_prev = schedule.AlphaBar(prev);
    const Matrix x0 = predict(x, t);
    if (sampler == Sampler::kDdim) {
      const Matrix eps = (x - static_cast<float>(std::sqrt(ab)) * x0) /
                         static_cast<float>(std::sqrt(1.0 - ab));
      x = static_cast<float>(std::sqrt(ab_prev)) * x0 +
          static_cast<float>(std::sqrt(1.0 - ab_prev)) * eps;
    } else {
      const double step_beta = 1.0 - ab / ab_prev;
      const double c0 = std::sqrt(ab_prev) * step_beta / (1.0 - ab);
      const double ct = std::sqrt(ab / ab_prev) * (1.0 - ab_prev) / (1.0 - ab);
      x = static_cast<float>(c0) * x0 + static_cast<float>(ct) * x;
      if (prev > 0) {
        const double var = (1.0 - ab_prev) / (1.0 - ab) * step_beta;
        const auto sd = static_cast<float>(std::sqrt(var));
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += sd * unit(*rng);
      }
    }
  }
  return x;
}

namespace {

X0Predictor MakePredictor(const DenoiserParams<float>& params,
                          const Matrix& condition,
                          const DiffusionSchedule& schedule) {
  return [&params, condition, &schedule](const Matrix& x_t, std::size_t t) {
    const Matrix out = DenoiserForward(params, x_t, condition, {t});
    if (params.config.prediction == Prediction::kX0) return out;
    const double ab = schedule.AlphaBar(t);
    return Matrix((x_t - static_cast<float>(std::sqrt(1.0 - ab)) * out) /
                  static_cast<float>(std::sqrt(ab)));
  };
}

}  // namespace

Matrix Sample(const DenoiserParams<float>& params, const Matrix& item_embeddings,
              const Sequence& history, const DiffusionSchedule& schedule,
              std::size_t sample_steps, Sampler sampler, std::uint64_t seed) {
  const Matrix cond =
      HistoryCondition(item_embeddings, history, params.config.max_history);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> unit(0.0f, 1.0f);
  Matrix noise(1, static_cast<Eigen::Index>(params.config.dim));
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = unit(rng);
  return SampleWith(MakePredictor(params, cond, schedule), schedule,
                    sample_steps, noise, sampler, &rng);
}

ItemIndex Ground(const Matrix& x, const Matrix& item_embeddings, bool cosine) {
  if (item_embeddings.rows() < 1) throw ValidationError("ground: empty table");
  if (x.size() != item_embeddings.cols()) {
    throw ValidationError("ground: dim mismatch");
  }
  const Eigen::VectorXf xv = Eigen::Map<const Eigen::VectorXf>(x.data(), x.size());
  Eigen::VectorXf s = item_embeddings * xv;
  if (cosine) {
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      const float n = item_embeddings.row(i).norm();
      s[i] = n > 0.0f ? s[i] / n : 0.0f;
    }
  }
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < s.size(); ++i) {
    if (s[i] > s[best]) best = i;
  }
  return static_cast<ItemIndex>(best);
}

std::vector<float> ScoreAllGenerative(const DenoiserParams<float>& params,
                                      const Matrix& item_embeddings,
                                      const Sequence& history,
                                      const DiffusionSchedule& schedule,
                                      std::size_t sample_steps, Sampler sampler,
                                      std::uint64_t seed) {
  const Matrix x = Sample(params, item_embeddings, history, schedule,
                          sample_steps, sampler, seed);
  const Eigen::VectorXf s = item_embeddings * x.transpose();
  return std::vector<float>(s.data(), s.data() + s.size());
}

DiffTrainResult TrainDenoiser(DenoiserParams<float> params,
                              ItemEncoder& encoder,
                              const InteractionDataset& dataset,
                              const DiffusionSchedule& schedule,
                              const DiffusionTrainConfig& config) {
  const TrainConfig& base = config.base;
  if (encoder.dim() != params.config.dim) {
    throw ValidationError("train: encoder dim " + std::to_string(encoder.dim()) +
                          " != denoiser dim " + std::to_string(params.config.dim));
  }
  if (schedule.steps() != params.config.steps) {
    throw ValidationError("train: schedule length != denoiser steps");
  }
  if (base.batch_size < 1 || base.max_epochs < 1) {
    throw ValidationError("train: batch size and epochs must be >= 1");
  }
  const std::size_t l = params.config.max_history;
  struct Query {
    Sequence history;
    ItemIndex target;
  };
  std::vector<Query> queries;
  for (const auto& seq : dataset.TrainSequences()) {
    for (std::size_t j = 1; j < seq.size(); ++j) {
      const std::size_t start = j > l ? j - l : 0;
      queries.push_back({Sequence(seq.begin() + static_cast<std::ptrdiff_t>(start),
                                  seq.begin() + static_cast<std::ptrdiff_t>(j)),
                         seq[j]});
    }
  }
  if (queries.empty()) throw ValidationError("train: empty training split");
  const auto valid = dataset.Examples(SplitLabel::kValid);
  const std::size_t n_items = encoder.n_items();

  Adam opt(base.lr);
  if (base.id_lr > 0.0) opt.SetLearningRate("item.", base.id_lr);
  std::mt19937_64 rng(base.seed);
  std::uniform_int_distribution<std::size_t> pick_t(1, schedule.steps());
  std::normal_distribution<float> unit(0.0f, 1.0f);

  DiffTrainResult result;
  result.best_val_ndcg10 = -1.0;
  DenoiserParams<float> best_params = params;
  TensorArchive best_items;
  encoder.Save(best_items);
  std::size_t stale = 0;

  std::vector<std::size_t> order(queries.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto d = static_cast<Eigen::Index>(params.config.dim);

  for (std::size_t epoch = 1; epoch <= base.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t begin = 0, batch = 0; begin < order.size();
         begin += base.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), begin + base.batch_size);
      std::vector<DiffusionDraw<float>> draws;
      for (std::size_t i = begin; i < end; ++i) {
        DiffusionDraw<float> dr;
        dr.history = queries[order[i]].history;
        dr.target = queries[order[i]].target;
        dr.t = pick_t(rng);
        dr.noise.resize(1, d);
        for (Eigen::Index j = 0; j < d; ++j) dr.noise(0, j) = unit(rng);
        draws.push_back(std::move(dr));
      }
      const Matrix& emb = encoder.Embeddings();
      DenoiserParams<float> grad = params.ZerosLike();
      Matrix grad_emb = Matrix::Zero(emb.rows(), emb.cols());
      double loss =
          DenoiserLoss(params, emb, schedule, draws, &grad, &grad_emb);
      loss += encoder.AuxiliaryLoss(grad_emb);
      if (!std::isfinite(loss)) {
        throw NumericalError("train: non-finite loss at epoch " +
                             std::to_string(epoch) + ", batch " +
                             std::to_string(batch));
      }
      auto pblocks = params.Blocks();
      auto gblocks = grad.Blocks();
      for (std::size_t j = 0; j < pblocks.size(); ++j) {
        opt.Update("diff." + pblocks[j].name, *pblocks[j].value,
                   *gblocks[j].value);
      }
      encoder.ApplyGradient(grad_emb, opt);
      epoch_loss += loss * static_cast<double>(draws.size());
      seen += draws.size();
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = epoch_loss / static_cast<double>(seen);
    if (!valid.empty()) {
      const Matrix& emb = encoder.Embeddings();
      EvalOptions opts;
      opts.ks = {10};
      opts.mask_history = base.mask_history;
      const auto report = Evaluate(
          [&](const Example& ex, std::vector<float>& scores) {
            scores = ScoreAllGenerative(params, emb, ex.history, schedule,
                                        config.sample_steps, config.sampler,
                                        base.seed + ex.user);
          },
          valid, n_items, nullptr, opts);
      entry.val_ndcg10 = report.Overall(10).ndcg;
    }
    result.log.push_back(entry);
    spdlog::info("epoch {} loss {:.6f} val_ndcg10 {:.6f}", epoch, entry.loss,
                 entry.val_ndcg10);

    if (entry.val_ndcg10 > result.best_val_ndcg10) {
      result.best_val_ndcg10 = entry.val_ndcg10;
      result.best_epoch = epoch;
      best_params = params;
      best_items = TensorArchive();
      encoder.Save(best_items);
      stale = 0;
    } else if (++stale >= base.patience && epoch >= base.warmup) {
      break;
    }
  }
  encoder.Load(best_items);
  result.params = std::move(best_params);
  return result;
}

void SaveDenoiser(const DenoiserParams<float>& params, TensorArchive& archive) {
  auto& p = const_cast<DenoiserParams<float>&>(params);
  for (const auto& b : p.Blocks()) archive.Put("diff." + b.name, *b.value);
  auto& m = archive.meta()["diff"];
  m["dim"] = params.config.dim;
  m["hidden"] = params.config.hidden;
  m["steps"] = params.config.steps;
  m["max_history"] = params.config.max_history;
  m["prediction"] = ToString(params.config.prediction);
}

DenoiserParams<float> LoadDenoiser(const TensorArchive& archive) {
  const auto& m = archive.meta().at("diff");
  DenoiserConfig c;
  c.dim = m.at("dim").get<std::size_t>();
  c.hidden = m.at("hidden").get<std::size_t>();
  c.steps = m.at("steps").get<std::size_t>();
  c.max_history = m.at("max_history").get<std::size_t>();
  c.prediction = ParsePrediction(m.at("prediction").get<std::string>());
  auto params = DenoiserParams<float>::Init(c, 0);
  for (auto& b : params.Blocks()) {
    const Matrix& src = archive.GetFloat("diff." + b.name);
    if (src.rows() != b.value->rows() || src.cols() != b.value->cols()) {
      throw ValidationError("denoiser checkpoint: shape mismatch for " + b.name);
    }
    *b.value = src;
  }
  return params;
}

#define NULLFUSE_INSTANTIATE(T)                                                \
  template Mat<T> ForwardNoiseWith<T>(const Mat<T>&, double, const Mat<T>&);   \
  template Mat<T> ForwardNoise<T>(const Mat<T>&, const DiffusionSchedule&,     \
                                  std::size_t, const Mat<T>&);                 \
  template struct DenoiserParams<T>;                                           \
  template Mat<T> DenoiserForward<T>(const DenoiserParams<T>&, const Mat<T>&,  \
                                     const Mat<T>&,                            \
                                     const std::vector<std::size_t>&);         \
  template Mat<T> HistoryCondition<T>(const Mat<T>&, const Sequence&,          \
                                      std::size_t);                            \
  template T DenoiserLoss<T>(const DenoiserParams<T>&, const Mat<T>&,          \
                             const DiffusionSchedule&,                         \
                             const std::vector<DiffusionDraw<T>>&,             \
                             DenoiserParams<T>*, Mat<T>*);

NULLFUSE_INSTANTIATE(float)
NULLFUSE_INSTANTIATE(double)

#undef NULLFUSE_INSTANTIATE

}  // namespace nullfuse
