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

// Row-wise building blocks with hand-written backward passes. All activations
// are stored row-per-token; weights multiply from the right (y = x W + b).

#ifndef NULLFUSE_NN_H_
#define NULLFUSE_NN_H_

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "nullfuse/types.h"

namespace nullfuse {

/// A named view of one trainable block, used for optimizer slots,
/// serialization and gradient checks.
template <typename T>
struct NamedBlock {
  std::string name;
  Mat<T>* value;
};

template <typename T>
inline T GeluForward(T x) {
  constexpr T kC = T(0.7978845608028654);  // sqrt(2/pi)
  const T u = kC * (x + T(0.044715) * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(u));
}

template <typename T>
inline T GeluDerivative(T x) {
  constexpr T kC = T(0.7978845608028654);
  const T u = kC * (x + T(0.044715) * x * x * x);
  const T th = std::tanh(u);
  const T du = kC * (T(1) + T(3) * T(0.044715) * x * x);
  return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * du;
}

template <typename T>
struct LayerNormCache {
  Mat<T> normalized;  // x_hat
  std::vector<T> inv_std;
};

inline constexpr double kLayerNormEps = 1e-5;

/// y = gain * (x - mean) / sqrt(var + eps) + bias, per row.
template <typename T>
Mat<T> LayerNormForward(const Mat<T>& x, const Mat<T>& gain,
                        const Mat<T>& bias, LayerNormCache<T>* cache) {
  const Eigen::Index n = x.rows(), d = x.cols();
  Mat<T> y(n, d);
  if (cache) {
    cache->normalized.resize(n, d);
    cache->inv_std.assign(static_cast<std::size_t>(n), T(0));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mean = x.row(i).mean();
    const T var = (x.row(i).array() - mean).square().mean();
    const T inv = T(1) / std::sqrt(var + T(kLayerNormEps));
    const auto xhat = ((x.row(i).array() - mean) * inv).matrix();
    y.row(i) = xhat.cwiseProduct(gain) + bias;
    if (cache) {
      cache->normalized.row(i) = xhat;
      cache->inv_std[static_cast<std::size_t>(i)] = inv;
    }
  }
  return y;
}

/// Returns dx; accumulates dgain/dbias.
template <typename T>
Mat<T> LayerNormBackward(const Mat<T>& dy, const Mat<T>& gain,
                         const LayerNormCache<T>& cache, Mat<T>& dgain,
                         Mat<T>& dbias) {
  const Eigen::Index n = dy.rows(), d = dy.cols();
  Mat<T> dx(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto xhat = cache.normalized.row(i);
    dgain += dy.row(i).cwiseProduct(xhat);
    dbias += dy.row(i);
    const Mat<T> dxhat = dy.row(i).cwiseProduct(gain);
    const T mean_dxhat = dxhat.mean();
    const T mean_dxhat_xhat = dxhat.cwiseProduct(xhat).mean();
    dx.row(i) = (dxhat.array() - mean_dxhat - xhat.array() * mean_dxhat_xhat) *
                cache.inv_std[static_cast<std::size_t>(i)];
  }
  return dx;
}

/// Two-layer perceptron in -> hidden -> out with GELU between.
template <typename T>
struct Mlp2 {
  Mat<T> w1, b1, w2, b2;

  struct Cache {
    Mat<T> input;
    Mat<T> pre;  // x W1 + b1
    Mat<T> act;  // gelu(pre)
  };

  static Mlp2 Init(std::size_t in, std::size_t hidden, std::size_t out,
                   std::mt19937_64& rng) {
    Mlp2 m;
    auto fill = [&rng](Mat<T>& w, std::size_t rows, std::size_t cols) {
      std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(double(rows)));
      w.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = T(g(rng));
    };
    fill(m.w1, in, hidden);
    fill(m.w2, hidden, out);
    m.b1 = Mat<T>::Zero(1, static_cast<Eigen::Index>(hidden));
    m.b2 = Mat<T>::Zero(1, static_cast<Eigen::Index>(out));
    return m;
  }

  std::size_t ParameterCount() const {
    return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() +
                                    b2.size());
  }

  Mat<T> Forward(const Mat<T>& x, Cache* cache) const {
    Mat<T> pre = x * w1;
    pre.rowwise() += b1.row(0);
    Mat<T> act = pre.unaryExpr([](T v) { return GeluForward(v); });
    Mat<T> y = act * w2;
    y.rowwise() += b2.row(0);
    if (cache) {
      cache->input = x;
      cache->pre = std::move(pre);
      cache->act = std::move(act);
    }
    return y;
  }

  /// Accumulates into `grad` (same shapes as *this). Returns dx when
  /// `want_input_grad`, else an empty matrix.
  Mat<T> Backward(const Cache& cache, const Mat<T>& dy, Mlp2& grad,
                  bool want_input_grad) const {
    grad.w2.noalias() += cache.act.transpose() * dy;
    grad.b2 += dy.colwise().sum();
    Mat<T> dact = dy * w2.transpose();
    Mat<T> dpre = dact.cwiseProduct(
        cache.pre.unaryExpr([](T v) { return GeluDerivative(v); }));
    grad.w1.noalias() += cache.input.transpose() * dpre;
    grad.b1 += dpre.colwise().sum();
    if (!want_input_grad) return Mat<T>();
    return dpre * w1.transpose();
  }

  Mlp2 ZerosLike() const {
    Mlp2 z;
    z.w1 = Mat<T>::Zero(w1.rows(), w1.cols());
    z.b1 = Mat<T>::Zero(b1.rows(), b1.cols());
    z.w2 = Mat<T>::Zero(w2.rows(), w2.cols());
    z.b2 = Mat<T>::Zero(b2.rows(), b2.cols());
    return z;
  }

  std::vector<NamedBlock<T>> Blocks(const std::string& prefix) {
    return {{prefix + ".w1", &w1},
            {prefix + ".b1", &b1},
            {prefix + ".w2", &w2},
            {prefix + ".b2", &b2}};
  }
};

}  // namespace nullfuse

#endif  // NULLFUSE_NN_H_
