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

#ifndef NULLFUSE_TENSOR_ARCHIVE_H_
#define NULLFUSE_TENSOR_ARCHIVE_H_

#include <filesystem>
#include <map>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "nullfuse/types.h"

namespace nullfuse {

/// A named set of 2-D tensors persisted as one raw little-endian payload
/// (`<stem>.bin`) plus a JSON manifest (`<stem>.json`) listing name, dtype,
/// shape and byte offset of every tensor. Tensors are written in name order,
/// so equal archives produce byte-identical files.
class TensorArchive {
 public:
  using Tensor = std::variant<Matrix, MatrixD>;

  void Put(const std::string& name, const Matrix& m) { tensors_[name] = m; }
  void Put(const std::string& name, const MatrixD& m) { tensors_[name] = m; }

  bool Contains(const std::string& name) const {
    return tensors_.count(name) != 0;
  }
  const Matrix& GetFloat(const std::string& name) const;
  const MatrixD& GetDouble(const std::string& name) const;

  /// Free-form metadata stored in the manifest under "meta".
  nlohmann::json& meta() { return meta_; }
  const nlohmann::json& meta() const { return meta_; }

  std::size_t size() const { return tensors_.size(); }

  void Save(const std::filesystem::path& stem) const;
  static TensorArchive Load(const std::filesystem::path& stem);

 private:
  std::map<std::string, Tensor> tensors_;
  nlohmann::json meta_ = nlohmann::json::object();
};

}  // namespace nullfuse

#endif  // NULLFUSE_TENSOR_ARCHIVE_H_
