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

#include "nullfuse/seqrec.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <spdlog/spdlog.h>

#include "nullfuse/eval.h"

namespace nullfuse {

namespace {

template <typename T>
void FillNormal(Mat<T>& m, Eigen::Index rows, Eigen::Index cols, double stddev,
                std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, stddev);
  m.resize(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = T(g(rng));
}

template <typename T>
Mat<T> ZerosOf(const Mat<T>& m) {
  return Mat<T>::Zero(m.rows(), m.cols());
}

void CheckConfig(const SeqModelConfig& c) {
  if (c.dim < 1 || c.layers < 1 || c.heads < 1 || c.max_history < 1 ||
      c.ff_multiplier < 1) {
    throw ValidationError("seqrec: dims, layers, heads and window must be >= 1");
  }
  if (c.dim % c.heads != 0) {
    throw ValidationError("seqrec: dim must be divisible by heads");
  }
}

}  // namespace

template <typename T>
SeqModelParams<T> SeqModelParams<T>::Init(const SeqModelConfig& config,
                                          std::uint64_t seed) {
  CheckConfig(config);
  std::mt19937_64 rng(seed);
  const auto d = static_cast<Eigen::Index>(config.dim);
  const auto f = static_cast<Eigen::Index>(config.dim * config.ff_multiplier);
  const auto l = static_cast<Eigen::Index>(config.max_history);
  const double wd = 1.0 / std::sqrt(static_cast<double>(d));
  const double wf = 1.0 / std::sqrt(static_cast<double>(f));

  SeqModelParams p;
  p.config = config;
  FillNormal(p.position, l, d, 0.1, rng);
  for (std::size_t i = 0; i < config.layers; ++i) {
    AttentionBlock<T> b;
    b.ln1_gain = Mat<T>::Ones(1, d);
    b.ln1_bias = Mat<T>::Zero(1, d);
    FillNormal(b.wq, d, d, wd, rng);
    FillNormal(b.wk, d, d, wd, rng);
    FillNormal(b.wv, d, d, wd, rng);
    FillNormal(b.wo, d, d, wd, rng);
    b.ln2_gain = Mat<T>::Ones(1, d);
    b.ln2_bias = Mat<T>::Zero(1, d);
    FillNormal(b.ff_w1, d, f, wd, rng);
    b.ff_b1 = Mat<T>::Zero(1, f);
    FillNormal(b.ff_w2, f, d, wf, rng);
    b.ff_b2 = Mat<T>::Zero(1, d);
    p.blocks.push_back(std::move(b));
  }
  p.final_gain = Mat<T>::Ones(1, d);
  p.final_bias = Mat<T>::Zero(1, d);
  return p;
}

template <typename T>
SeqModelParams<T> SeqModelParams<T>::ZerosLike() const {
  SeqModelParams z;
  z.config = config;
  z.position = ZerosOf(position);
  for (const auto& b : blocks) {
    AttentionBlock<T> g;
    g.ln1_gain = ZerosOf(b.ln1_gain);
    g.ln1_bias = ZerosOf(b.ln1_bias);
    g.wq = ZerosOf(b.wq);
    g.wk = ZerosOf(b.wk);
    g.wv = ZerosOf(b.wv);
    g.wo = ZerosOf(b.wo);
    g.ln2_gain = ZerosOf(b.ln2_gain);
    g.ln2_bias = ZerosOf(b.ln2_bias);
    g.ff_w1 = ZerosOf(b.ff_w1);
    g.ff_b1 = ZerosOf(b.ff_b1);
    g.ff_w2 = ZerosOf(b.ff_w2);
    g.ff_b2 = ZerosOf(b.ff_b2);
    z.blocks.push_back(std::move(g));
  }
  z.final_gain = ZerosOf(final_gain);
  z.final_bias = ZerosOf(final_bias);
  return z;
}

template <typename T>
std::vector<NamedBlock<T>> SeqModelParams<T>::Blocks() {
  std::vector<NamedBlock<T>> out;
  out.push_back({"position", &position});
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto& b = blocks[i];
    const std::string p = "block" + std::to_string(i) + ".";
    out.push_back({p + "ln1_gain", &b.ln1_gain});
    out.push_back({p + "ln1_bias", &b.ln1_bias});
    out.push_back({p + "wq", &b.wq});
    out.push_back({p + "wk", &b.wk});
    out.push_back({p + "wv", &b.wv});
    out.push_back({p + "wo", &b.wo});
    out.push_back({p + "ln2_gain", &b.ln2_gain});
    out.push_back({p + "ln2_bias", &b.ln2_bias});
    out.push_back({p + "ff_w1", &b.ff_w1});
    out.push_back({p + "ff_b1", &b.ff_b1});
    out.push_back({p + "ff_w2", &b.ff_w2});
    out.push_back({p + "ff_b2", &b.ff_b2});
  }
  out.push_back({"final_gain", &final_gain});
  out.push_back({"final_bias", &final_bias});
  return out;
}

template <typename T>
std::size_t SeqModelParams<T>::ParameterCount() const {
  std::size_t n = 0;
  for (const auto& b : const_cast<SeqModelParams*>(this)->Blocks()) {
    n += static_cast<std::size_t>(b.value->size());
  }
  return n;
}

template <typename T>
Mat<T> EncodeTokens(const SeqModelParams<T>& params, const Mat<T>& tokens,
                    EncodeCache<T>* cache) {
  const auto n = tokens.rows();
  const auto d = static_cast<Eigen::Index>(params.config.dim);
  const auto l = static_cast<Eigen::Index>(params.config.max_history);
  if (n < 1 || n > l) {
    throw ValidationError("encode: history length must be in [1, L]");
  }
  if (tokens.cols() != d) throw ValidationError("encode: token dim mismatch");
  const auto heads = static_cast<Eigen::Index>(params.config.heads);
  const Eigen::Index hd = d / heads;
  const T scale = T(1) / std::sqrt(T(hd));

  Mat<T> h = tokens + params.position.bottomRows(n);
  if (cache) {
    cache->layers.assign(params.blocks.size(), {});
    cache->offset = static_cast<std::size_t>(l - n);
  }
  for (std::size_t li = 0; li < params.blocks.size(); ++li) {
    const auto& b = params.blocks[li];
    typename EncodeCache<T>::Layer local;
    auto& c = cache ? cache->layers[li] : local;
    c.input = h;
    c.normed1 = LayerNormForward(h, b.ln1_gain, b.ln1_bias, &c.ln1);
    c.q = c.normed1 * b.wq;
    c.k = c.normed1 * b.wk;
    c.v = c.normed1 * b.wv;
    c.context.resize(n, d);
    c.attention.assign(static_cast<std::size_t>(heads), Mat<T>());
    for (Eigen::Index hh = 0; hh < heads; ++hh) {
      const auto cols = Eigen::seqN(hh * hd, hd);
      Mat<T> s = (c.q(Eigen::all, cols) * c.k(Eigen::all, cols).transpose()) * scale;
      Mat<T> a = Mat<T>::Zero(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const T m = s.row(i).head(i + 1).maxCoeff();
        T z = T(0);
        for (Eigen::Index j = 0; j <= i; ++j) {
          a(i, j) = std::exp(s(i, j) - m);
          z += a(i, j);
        }
        a.row(i).head(i + 1) /= z;
      }
      c.context(Eigen::all, cols) = a * c.v(Eigen::all, cols);
      c.attention[static_cast<std::size_t>(hh)] = std::move(a);
    }
    c.mid = h + c.context * b.wo;
    c.normed2 = LayerNormForward(c.mid, b.ln2_gain, b.ln2_bias, &c.ln2);
    c.ff_pre = c.normed2 * b.ff_w1;
    c.ff_pre.rowwise() += b.ff_b1.row(0);
    c.ff_act = c.ff_pre.unaryExpr([](T v) { return GeluForward(v); });
    h = c.mid + c.ff_act * b.ff_w2;
    h.rowwise() += b.ff_b2.row(0);
  }
  if (cache) {
    cache->stream = h;
    return LayerNormForward(h, params.final_gain, params.final_bias,
                            &cache->final_ln);
  }
  return LayerNormForward<T>(h, params.final_gain, params.final_bias, nullptr);
}

template <typename T>
Mat<T> EncodeTokensBackward(const SeqModelParams<T>& params,
                            const EncodeCache<T>& cache,
                            const Mat<T>& d_outputs, SeqModelParams<T>& grad) {
  const auto d = static_cast<Eigen::Index>(params.config.dim);
  const auto heads = static_cast<Eigen::Index>(params.config.heads);
  const Eigen::Index hd = d / heads;
  const T scale = T(1) / std::sqrt(T(hd));
  const auto n = d_outputs.rows();

  Mat<T> dh = LayerNormBackward(d_outputs, params.final_gain, cache.final_ln,
                                grad.final_gain, grad.final_bias);
  for (std::size_t li = params.blocks.size(); li-- > 0;) {
    const auto& b = params.blocks[li];
    auto& g = grad.blocks[li];
    const auto& c = cache.layers[li];

    // Feed-forward residual branch.
    g.ff_w2.noalias() += c.ff_act.transpose() * dh;
    g.ff_b2 += dh.colwise().sum();
    Mat<T> dpre = (dh * b.ff_w2.transpose())
                      .cwiseProduct(c.ff_pre.unaryExpr(
                          [](T v) { return GeluDerivative(v); }));
    g.ff_w1.noalias() += c.normed2.transpose() * dpre;
    g.ff_b1 += dpre.colwise().sum();
    dh += LayerNormBackward(Mat<T>(dpre * b.ff_w1.transpose()), b.ln2_gain,
                            c.ln2, g.ln2_gain, g.ln2_bias);

    // Attention residual branch.
    g.wo.noalias() += c.context.transpose() * dh;
    const Mat<T> dcontext = dh * b.wo.transpose();
    Mat<T> dq(n, d), dk(n, d), dv(n, d);
    for (Eigen::Index hh = 0; hh < heads; ++hh) {
      const auto cols = Eigen::seqN(hh * hd, hd);
      const Mat<T>& a = c.attention[static_cast<std::size_t>(hh)];
      const Mat<T> dctx = dcontext(Eigen::all, cols);
      const Mat<T> da = dctx * c.v(Eigen::all, cols).transpose();
      dv(Eigen::all, cols) = a.transpose() * dctx;
      Mat<T> ds = a.cwiseProduct(da);
      const Eigen::Matrix<T, Eigen::Dynamic, 1> row_dot = ds.rowwise().sum();
      ds -= a.cwiseProduct(row_dot.replicate(1, n));
      ds *= scale;
      dq(Eigen::all, cols) = ds * c.k(Eigen::all, cols);
      dk(Eigen::all, cols) = ds.transpose() * c.q(Eigen::all, cols);
    }
    g.wq.noalias() += c.normed1.transpose() * dq;
    g.wk.noalias() += c.normed1.transpose() * dk;
    g.wv.noalias() += c.normed1.transpose() * dv;
    const Mat<T> dnormed =
        dq * b.wq.transpose() + dk * b.wk.transpose() + dv * b.wv.transpose();
    dh += LayerNormBackward(dnormed, b.ln1_gain, c.ln1, g.ln1_gain, g.ln1_bias);
  }
  grad.position.bottomRows(n) += dh;
  return dh;
}

template <typename T>
Mat<T> Encode(const SeqModelParams<T>& params, const Mat<T>& item_embeddings,
              const Sequence& history) {
  if (history.empty()) throw ValidationError("encode: empty history");
  const std::size_t l = params.config.max_history;
  const std::size_t start = history.size() > l ? history.size() - l : 0;
  const auto n = static_cast<Eigen::Index>(history.size() - start);
  Mat<T> tokens(n, item_embeddings.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const ItemIndex item = history[start + static_cast<std::size_t>(i)];
    if (item >= item_embeddings.rows()) {
      throw ValidationError("encode: item index out of range");
    }
    tokens.row(i) = item_embeddings.row(item);
  }
  const Mat<T> out = EncodeTokens<T>(params, tokens, nullptr);
  return out.bottomRows(1);
}

std::string ToString(LossKind kind) {
  return kind == LossKind::kInfoNce ? "infonce" : "binary";
}

LossKind ParseLossKind(const std::string& s) {
  if (s == "infonce") return LossKind::kInfoNce;
  if (s == "binary") return LossKind::kBinary;
  throw ValidationError("unknown loss '" + s + "'");
}

template <typename T>
T InfoNceLoss(const Mat<T>& preference, const Mat<T>& candidates,
              Mat<T>* d_preference, Mat<T>* d_candidates) {
  if (candidates.rows() < 2) {
    throw ValidationError("infonce: need a positive and at least 1 negative");
  }
  const Eigen::Matrix<T, Eigen::Dynamic, 1> s =
      candidates * preference.transpose();
  const T m = s.maxCoeff();
  const Eigen::Matrix<T, Eigen::Dynamic, 1> e = (s.array() - m).exp();
  const T z = e.sum();
  const T loss = m + std::log(z) - s[0];
  if (d_preference || d_candidates) {
    Eigen::Matrix<T, Eigen::Dynamic, 1> ds = e / z;
    ds[0] -= T(1);
    if (d_preference) *d_preference = ds.transpose() * candidates;
    if (d_candidates) *d_candidates = ds * preference;
  }
  return loss;
}

namespace {

template <typename T>
T Softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename T>
T Sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
T BinaryLoss(const Mat<T>& preference, const Mat<T>& candidates,
             Mat<T>* d_preference, Mat<T>* d_candidates) {
  if (candidates.rows() < 2) {
    throw ValidationError("binary loss: need a positive and at least 1 negative");
  }
  const auto k = candidates.rows() - 1;
  const Eigen::Matrix<T, Eigen::Dynamic, 1> s =
      candidates * preference.transpose();
  T loss = Softplus(-s[0]);
  Eigen::Matrix<T, Eigen::Dynamic, 1> ds(s.size());
  ds[0] = Sigmoid(s[0]) - T(1);
  for (Eigen::Index i = 1; i <= k; ++i) {
    loss += Softplus(s[i]) / T(k);
    ds[i] = Sigmoid(s[i]) / T(k);
  }
  if (d_preference) *d_preference = ds.transpose() * candidates;
  if (d_candidates) *d_candidates = ds * preference;
  return loss;
}

template <typename T>
T WindowLoss(const SeqModelParams<T>& params, const Mat<T>& item_embeddings,
             const TrainWindow& window, LossKind kind,
             SeqModelParams<T>* grad, Mat<T>* grad_embeddings) {
  const std::size_t m = window.items.size();
  if (m < 2) throw ValidationError("window: need at least 2 items");
  if (window.negatives.size() != m - 1) {
    throw ValidationError("window: one negative list per target required");
  }
  const auto n = static_cast<Eigen::Index>(m - 1);
  const auto d = item_embeddings.cols();
  Mat<T> tokens(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    tokens.row(i) = item_embeddings.row(window.items[static_cast<std::size_t>(i)]);
  }
  const bool want_grad = grad || grad_embeddings;
  EncodeCache<T> cache;
  const Mat<T> out = EncodeTokens(params, tokens, want_grad ? &cache : nullptr);

  T total = T(0);
  Mat<T> d_out = Mat<T>::Zero(n, d);
  Mat<T> d_pref, d_cand;
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& negs = window.negatives[static_cast<std::size_t>(t)];
    Mat<T> cand(static_cast<Eigen::Index>(negs.size()) + 1, d);
    cand.row(0) = item_embeddings.row(window.items[static_cast<std::size_t>(t) + 1]);
    for (std::size_t k = 0; k < negs.size(); ++k) {
      cand.row(static_cast<Eigen::Index>(k) + 1) = item_embeddings.row(negs[k]);
    }
    const Mat<T> pref = out.row(t);
    total += kind == LossKind::kInfoNce
                 ? InfoNceLoss(pref, cand, want_grad ? &d_pref : nullptr,
                               want_grad ? &d_cand : nullptr)
                 : BinaryLoss(pref, cand, want_grad ? &d_pref : nullptr,
                              want_grad ? &d_cand : nullptr);
    if (!want_grad) continue;
    d_out.row(t) = d_pref;
    if (grad_embeddings) {
      grad_embeddings->row(window.items[static_cast<std::size_t>(t) + 1]) +=
          d_cand.row(0);
      for (std::size_t k = 0; k < negs.size(); ++k) {
        grad_embeddings->row(negs[k]) +=
            d_cand.row(static_cast<Eigen::Index>(k) + 1);
      }
    }
  }
  if (want_grad) {
    SeqModelParams<T> scratch;
    SeqModelParams<T>& g = grad ? *grad : (scratch = params.ZerosLike());
    const Mat<T> d_tokens = EncodeTokensBackward(params, cache, d_out, g);
    if (grad_embeddings) {
      for (Eigen::Index i = 0; i < n; ++i) {
        grad_embeddings->row(window.items[static_cast<std::size_t>(i)]) +=
            d_tokens.row(i);
      }
    }
  }
  return total;
}

std::vector<Sequence> MakeWindows(const Sequence& seq, std::size_t max_history) {
  std::vector<Sequence> windows;
  if (seq.size() < 2 || max_history < 1) return windows;
  std::size_t end = seq.size();
  while (true) {
    const std::size_t start = end > max_history + 1 ? end - max_history - 1 : 0;
    windows.emplace_back(seq.begin() + static_cast<std::ptrdiff_t>(start),
                         seq.begin() + static_cast<std::ptrdiff_t>(end));
    if (start == 0) break;
    end = start + 1;
  }
  return windows;
}

Sequence SampleNegatives(std::size_t n_items, ItemIndex positive, std::size_t k,
                         std::mt19937_64& rng) {
  if (n_items < 2) throw ValidationError("negatives: need at least 2 items");
  std::uniform_int_distribution<std::size_t> pick(0, n_items - 2);
  Sequence out(k);
  for (auto& v : out) {
    std::size_t x = pick(rng);
    if (x >= positive) ++x;
    v = static_cast<ItemIndex>(x);
  }
  return out;
}

std::vector<float> ScoreAll(const SeqModelParams<float>& params,
                            const Matrix& item_embeddings,
                            const Sequence& history) {
  const Matrix pref = Encode(params, item_embeddings, history);
  const Eigen::VectorXf s = item_embeddings * pref.transpose();
  return std::vector<float>(s.data(), s.data() + s.size());
}

std::string FormatTrainLog(const std::vector<EpochLog>& log) {
  std::ostringstream os;
  os << "epoch,loss,val_ndcg10\n" << std::fixed << std::setprecision(8);
  for (const auto& e : log) {
    os << e.epoch << ',' << e.loss << ',' << e.val_ndcg10 << '\n';
  }
  return os.str();
}

SeqTrainResult TrainSeqRec(SeqModelParams<float> params, ItemEncoder& encoder,
                           const InteractionDataset& dataset,
                           const TrainConfig& config) {
  if (encoder.dim() != params.config.dim) {
    throw ValidationError("train: encoder dim " + std::to_string(encoder.dim()) +
                          " != model dim " + std::to_string(params.config.dim));
  }
  if (config.batch_size < 1 || config.negatives < 1 || config.max_epochs < 1) {
    throw ValidationError("train: batch size, negatives and epochs must be >= 1");
  }
  const std::size_t l = params.config.max_history;
  std::vector<Sequence> windows;
  for (const auto& seq : dataset.TrainSequences()) {
    for (auto& w : MakeWindows(seq, l)) windows.push_back(std::move(w));
  }
  if (windows.empty()) throw ValidationError("train: empty training split");
  const auto valid = dataset.Examples(SplitLabel::kValid);
  const std::size_t n_items = encoder.n_items();

  Adam opt(config.lr);
  if (config.id_lr > 0.0) opt.SetLearningRate("item.", config.id_lr);
  std::mt19937_64 rng(config.seed);

  SeqTrainResult result;
  result.best_val_ndcg10 = -1.0;
  SeqModelParams<float> best_params = params;
  TensorArchive best_items;
  encoder.Save(best_items);
  std::size_t stale = 0;

  std::vector<std::size_t> order(windows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t epoch_targets = 0;
    for (std::size_t begin = 0, batch = 0; begin < order.size();
         begin += config.batch_size, ++batch) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const Matrix& emb = encoder.Embeddings();
      SeqModelParams<float> grad = params.ZerosLike();
      Matrix grad_emb = Matrix::Zero(emb.rows(), emb.cols());
      double batch_loss = 0.0;
      std::size_t targets = 0;
      for (std::size_t i = begin; i < end; ++i) {
        TrainWindow w;
        w.items = windows[order[i]];
        for (std::size_t t = 1; t < w.items.size(); ++t) {
          w.negatives.push_back(
              SampleNegatives(n_items, w.items[t], config.negatives, rng));
        }
        batch_loss += WindowLoss(params, emb, w, config.loss, &grad, &grad_emb);
        targets += w.items.size() - 1;
      }
      const float inv = 1.0f / static_cast<float>(targets);
      for (auto& b : grad.Blocks()) *b.value *= inv;
      grad_emb *= inv;
      double loss = batch_loss / static_cast<double>(targets);
      loss += encoder.AuxiliaryLoss(grad_emb);
      if (!std::isfinite(loss)) {
        throw NumericalError("train: non-finite loss at epoch " +
                             std::to_string(epoch) + ", batch " +
                             std::to_string(batch));
      }
      auto pblocks = params.Blocks();
      auto gblocks = grad.Blocks();
      for (std::size_t j = 0; j < pblocks.size(); ++j) {
        opt.Update("seq." + pblocks[j].name, *pblocks[j].value, *gblocks[j].value);
      }
      encoder.ApplyGradient(grad_emb, opt);
      epoch_loss += loss * static_cast<double>(targets);
      epoch_targets += targets;
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = epoch_loss / static_cast<double>(epoch_targets);
    if (!valid.empty()) {
      const Matrix& emb = encoder.Embeddings();
      EvalOptions opts;
      opts.ks = {10};
      opts.mask_history = config.mask_history;
      const auto report = Evaluate(
          [&](const Example& ex, std::vector<float>& scores) {
            scores = ScoreAll(params, emb, ex.history);
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
    } else if (++stale >= config.patience && epoch >= config.warmup) {
      break;
    }
  }
  encoder.Load(best_items);
  result.params = std::move(best_params);
  return result;
}

void SaveSeqModel(const SeqModelParams<float>& params, TensorArchive& archive) {
  auto& p = const_cast<SeqModelParams<float>&>(params);
  for (const auto& b : p.Blocks()) archive.Put("seq." + b.name, *b.value);
  auto& m = archive.meta()["seq"];
  m["dim"] = params.config.dim;
  m["layers"] = params.config.layers;
  m["heads"] = params.config.heads;
  m["max_history"] = params.config.max_history;
  m["ff_multiplier"] = params.config.ff_multiplier;
}

SeqModelParams<float> LoadSeqModel(const TensorArchive& archive) {
  const auto& m = archive.meta().at("seq");
  SeqModelConfig c;
  c.dim = m.at("dim").get<std::size_t>();
  c.layers = m.at("layers").get<std::size_t>();
  c.heads = m.at("heads").get<std::size_t>();
  c.max_history = m.at("max_history").get<std::size_t>();
  c.ff_multiplier = m.at("ff_multiplier").get<std::size_t>();
  auto params = SeqModelParams<float>::Init(c, 0);
  for (auto& b : params.Blocks()) {
    const Matrix& src = archive.GetFloat("seq." + b.name);
    if (src.rows() != b.value->rows() || src.cols() != b.value->cols()) {
      throw ValidationError("seq checkpoint: shape mismatch for " + b.name);
    }
    *b.value = src;
  }
  return params;
}

#define NULLFUSE_INSTANTIATE(T)                                               \
  template struct SeqModelParams<T>;                                          \
  template Mat<T> EncodeTokens<T>(const SeqModelParams<T>&, const Mat<T>&,    \
                                  EncodeCache<T>*);                           \
  template Mat<T> EncodeTokensBackward<T>(const SeqModelParams<T>&,           \
                                          const EncodeCache<T>&,              \
                                          const Mat<T>&, SeqModelParams<T>&); \
  template Mat<T> Encode<T>(const SeqModelParams<T>&, const Mat<T>&,          \
                            const Sequence&);                                 \
  template T InfoNceLoss<T>(const Mat<T>&, const Mat<T>&, Mat<T>*, Mat<T>*);  \
  template T BinaryLoss<T>(const Mat<T>&, const Mat<T>&, Mat<T>*, Mat<T>*);   \
  template T WindowLoss<T>(const SeqModelParams<T>&, const Mat<T>&,           \
                           const TrainWindow&, LossKind, SeqModelParams<T>*,  \
                           Mat<T>*);

NULLFUSE_INSTANTIATE(float)
NULLFUSE_INSTANTIATE(double)

#undef NULLFUSE_INSTANTIATE

}  // namespace nullfuse
