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

#include "nullfuse/tensor_archive.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace nullfuse {

static_assert(std::endian::native == std::endian::little,
              "tensor files are little-endian; big-endian hosts unsupported");

namespace {

std::filesystem::path WithSuffix(const std::filesystem::path& stem,
                                 const char* suffix) {
  return std::filesystem::path(stem.string() + suffix);
}

}  // namespace

const Matrix& TensorArchive::GetFloat(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw ValidationError("tensor archive: missing tensor '" + name + "'");
  }
  const auto* m = std::get_if<Matrix>(&it->second);
  if (!m) throw ValidationError("tensor archive: '" + name + "' is not f32");
  return *m;
}

const MatrixD& TensorArchive::GetDouble(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw ValidationError("tensor archive: missing tensor '" + name + "'");
  }
  const auto* m = std::get_if<MatrixD>(&it->second);
  if (!m) throw ValidationError("tensor archive: '" + name + "' is not f64");
  return *m;
}

void TensorArchive::Save(const std::filesystem::path& stem) const {
  if (stem.has_parent_path()) {
    std::filesystem::create_directories(stem.parent_path());
  }
  std::ofstream bin(WithSuffix(stem, ".bin"), std::ios::binary);
  if (!bin) throw ValidationError("cannot write " + stem.string() + ".bin");

  nlohmann::json manifest;
  manifest["format"] = "nullfuse-tensors";
  manifest["version"] = 1;
  manifest["meta"] = meta_;
  nlohmann::json entries = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, tensor] : tensors_) {
    std::visit(
        [&](const auto& m) {
          using Scalar = typename std::decay_t<decltype(m)>::Scalar;
          const std::size_t bytes =
              static_cast<std::size_t>(m.size()) * sizeof(Scalar);
          bin.write(reinterpret_cast<const char*>(m.data()),
                    static_cast<std::streamsize>(bytes));
          entries.push_back({{"name", name},
                             {"dtype", sizeof(Scalar) == 4 ? "f32" : "f64"},
                             {"shape", {m.rows(), m.cols()}},
                             {"offset", offset},
                             {"bytes", bytes}});
          offset += bytes;
        },
        tensor);
  }
  manifest["tensors"] = std::move(entries);
  manifest["payload_bytes"] = offset;
  std::ofstream js(WithSuffix(stem, ".json"));
  js << manifest.dump(2) << "\n";
  if (!bin || !js) throw ValidationError("write failed for " + stem.string());
}

TensorArchive TensorArchive::Load(const std::filesystem::path& stem) {
  std::ifstream js(WithSuffix(stem, ".json"));
  if (!js) throw ValidationError("missing manifest " + stem.string() + ".json");
  nlohmann::json manifest;
  try {
    js >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad manifest " + stem.string() + ".json: " + e.what());
  }
  std::ifstream bin(WithSuffix(stem, ".bin"), std::ios::binary);
  if (!bin) throw ValidationError("missing payload " + stem.string() + ".bin");
  std::string payload((std::istreambuf_iterator<char>(bin)),
                      std::istreambuf_iterator<char>());
  if (payload.size() != manifest.at("payload_bytes").get<std::size_t>()) {
    throw ValidationError("payload size mismatch for " + stem.string());
  }

  TensorArchive ar;
  ar.meta_ = manifest.value("meta", nlohmann::json::object());
  for (const auto& t : manifest.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    const auto rows = t.at("shape").at(0).get<Eigen::Index>();
    const auto cols = t.at("shape").at(1).get<Eigen::Index>();
    const auto offset = t.at("offset").get<std::size_t>();
    const auto bytes = t.at("bytes").get<std::size_t>();
    const auto dtype = t.at("dtype").get<std::string>();
    const std::size_t scalar = dtype == "f32" ? 4 : 8;
    if (bytes != static_cast<std::size_t>(rows * cols) * scalar ||
        offset + bytes > payload.size()) {
      throw ValidationError("corrupt tensor entry '" + name + "'");
    }
    if (dtype == "f32") {
      Matrix m(rows, cols);
      std::memcpy(m.data(), payload.data() + offset, bytes);
      ar.Put(name, m);
    } else if (dtype == "f64") {
      MatrixD m(rows, cols);
      std::memcpy(m.data(), payload.data() + offset, bytes);
      ar.Put(name, m);
    } else {
      throw ValidationError("unsupported dtype '" + dtype + "'");
    }
  }
  return ar;
}

}  // namespace nullfuse
