// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mref {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// One parameter tensor registered with the optimizer. `decay` selects
/// whether decoupled weight decay applies (weights yes, biases no).
struct ParamView {
  double* values = nullptr;
  const double* grads = nullptr;
  std::size_t size = 0;
  bool decay = true;
};

/// AdamW with decoupled weight decay and bias-corrected moments. The step
/// counter is shared across every registered tensor.
class AdamW {
 public:
  AdamW(AdamWConfig config, std::vector<ParamView> params);

  /// Applies one update using the gradients currently visible through the
  /// registered views.
  void step();

  std::int64_t steps_taken() const { return t_; }
  const AdamWConfig& config() const { return config_; }

 private:
  AdamWConfig config_;
  std::vector<ParamView> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::int64_t t_ = 0;
};

}  // namespace mref
