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

#include "nullfuse/optim.h"

#include <cmath>

#include "nullfuse/item_encoder.h"

namespace nullfuse {

double Optimizer::LearningRate(const std::string& slot) const {
  double lr = lr_;
  std::size_t best = 0;
  bool matched = false;
  for (const auto& [prefix, value] : lr_overrides_) {
    if (slot.compare(0, prefix.size(), prefix) == 0 &&
        (!matched || prefix.size() > best)) {
      lr = value;
      best = prefix.size();
      matched = true;
    }
  }
  return lr;
}

void Sgd::Update(const std::string& slot, Matrix& param, const Matrix& grad) {
  if (!grad.allFinite()) {
    throw NumericalError("non-finite gradient for '" + slot + "'");
  }
  param -= static_cast<float>(LearningRate(slot)) * grad;
}

void Adam::Update(const std::string& slot, Matrix& param, const Matrix& grad) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols()) {
    throw ValidationError("adam: gradient shape mismatch for '" + slot + "'");
  }
  if (!grad.allFinite()) {
    throw NumericalError("non-finite gradient for '" + slot + "'");
  }
  const double lr = LearningRate(slot);
  if (lr == 0.0) return;
  State& s = state_[slot];
  if (s.m.rows() != param.rows() || s.m.cols() != param.cols()) {
    s.m = Matrix::Zero(param.rows(), param.cols());
    s.v = Matrix::Zero(param.rows(), param.cols());
    s.step = 0;
  }
  ++s.step;
  const auto b1 = static_cast<float>(beta1_);
  const auto b2 = static_cast<float>(beta2_);
  s.m = b1 * s.m + (1.0f - b1) * grad;
  s.v = b2 * s.v + (1.0f - b2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(s.step));
  const auto step = static_cast<float>(lr / c1);
  const auto root_c2 = static_cast<float>(std::sqrt(c2));
  const auto eps = static_cast<float>(eps_);
  param.array() -=
      step * s.m.array() / (s.v.array().sqrt() / root_c2 + eps);
}

std::size_t ParameterCount::Of(const std::string& name) const {
  std::size_t n = 0;
  for (const auto& [block, count] : blocks) {
    if (block == name) n += count;
  }
  return n;
}

std::size_t ParameterCount::total() const {
  std::size_t n = 0;
  for (const auto& [block, count] : blocks) n += count;
  return n;
}

}  // namespace nullfuse
