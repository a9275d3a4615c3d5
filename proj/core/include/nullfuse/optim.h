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

#ifndef NULLFUSE_OPTIM_H_
#define NULLFUSE_OPTIM_H_

#include <map>
#include <string>

#include "nullfuse/types.h"

namespace nullfuse {

/// Parameter update rule. Slots are named parameter blocks; optimizers keep
/// per-slot state keyed by that name.
class Optimizer {
 public:
  virtual ~Optimizer() = default;

  virtual void Update(const std::string& slot, Matrix& param,
                      const Matrix& grad) = 0;

  /// Overrides the learning rate for every slot whose name starts with
  /// `prefix`. The longest matching prefix wins.
  void SetLearningRate(const std::string& prefix, double lr) {
    lr_overrides_[prefix] = lr;
  }
  double LearningRate(const std::string& slot) const;
  double base_lr() const { return lr_; }

 protected:
  explicit Optimizer(double lr) : lr_(lr) {}

 private:
  double lr_;
  std::map<std::string, double> lr_overrides_;
};

class Sgd final : public Optimizer {
 public:
  explicit Sgd(double lr) : Optimizer(lr) {}
  void Update(const std::string& slot, Matrix& param,
              const Matrix& grad) override;
};

class Adam final : public Optimizer {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : Optimizer(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void Update(const std::string& slot, Matrix& param,
              const Matrix& grad) override;

 private:
  struct State {
    Matrix m;
    Matrix v;
    long step = 0;
  };
  double beta1_, beta2_, eps_;
  std::map<std::string, State> state_;
};

}  // namespace nullfuse

#endif  // NULLFUSE_OPTIM_H_
