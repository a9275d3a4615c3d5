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


// Helpers shared by the unit tests and the acceptance binary.

#ifndef NULLFUSE_TESTS_SUPPORT_TEST_UTIL_H_
#define NULLFUSE_TESTS_SUPPORT_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "nullfuse/types.h"

namespace nullfuse::testing {

template <typename T>
Mat<T> Gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                double stddev = 1.0) {
  std::normal_distribution<double> g(0.0, stddev);
  Mat<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = T(g(rng));
  return m;
}

/// Random orthonormal d x r basis from the QR of a Gaussian matrix.
inline MatrixD RandomOrthonormal(Eigen::Index d, Eigen::Index r,
                                 std::mt19937_64& rng) {
  const MatrixD g = Gaussian<double>(d, r, rng);
  Eigen::HouseholderQR<MatrixD> qr(g);
  return qr.householderQ() * MatrixD::Identity(d, r);
}

/// ||a - n|| / max(||a||, ||n||) over one block; 0 when both vanish.
inline double BlockRelativeError(const MatrixD& analytic,
                                 const MatrixD& numeric) {
  const double scale = std::max(analytic.norm(), numeric.norm());
  if (scale == 0.0) return 0.0;
  return (analytic - numeric).norm() / scale;
}

/// Central differences of `loss` with respect to every entry of `param`.
/// `param` is restored on return.
inline MatrixD NumericGradient(MatrixD& param,
                               const std::function<double()>& loss,
                               double step = 1e-5) {
  MatrixD g(param.rows(), param.cols());
  for (Eigen::Index i = 0; i < param.size(); ++i) {
    const double saved = param.data()[i];
    param.data()[i] = saved + step;
    const double up = loss();
    param.data()[i] = saved - step;
    const double down = loss();
    param.data()[i] = saved;
    g.data()[i] = (up - down) / (2.0 * step);
  }
  return g;
}

struct BlockResult {
  std::string name;
  double relative_error = 0.0;
};

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path ScratchDir(const std::string& tag) {
  static std::uint64_t counter = 0;
  auto dir = std::filesystem::temp_directory_path() /
             ("nullfuse_" + tag + "_" + std::to_string(::getpid()) + "_" +
              std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string ReadBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace nullfuse::testing

#endif  // NULLFUSE_TESTS_SUPPORT_TEST_UTIL_H_
