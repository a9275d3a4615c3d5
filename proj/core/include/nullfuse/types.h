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

#ifndef NULLFUSE_TYPES_H_
#define NULLFUSE_TYPES_H_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace nullfuse {

/// Row-major dense matrix; every 2-D tensor in the library uses this layout
/// so raw buffers map directly onto the on-disk format.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Matrix = Mat<float>;
using MatrixD = Mat<double>;
using VectorD = Eigen::VectorXd;

using ItemIndex = std::uint32_t;
using Sequence = std::vector<ItemIndex>;

/// Malformed input, violated precondition, or bad configuration.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or a solver that failed to converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 64-bit FNV-1a over raw bytes. Stable across runs and platforms with the
/// same endianness; used for frozen-block checksums and config hashes.
std::uint64_t Fnv1a64(const void* data, std::size_t size,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);

template <typename T>
std::uint64_t HashMatrix(const Mat<T>& m) {
  return Fnv1a64(m.data(), static_cast<std::size_t>(m.size()) * sizeof(T));
}

std::string HexDigest(std::uint64_t h);

}  // namespace nullfuse

#endif  // NULLFUSE_TYPES_H_
