// SPDX-License-Identifier: Apache-2.0
#include "mref/optim.hpp"

#include <cmath>

#include "mref/common.hpp"

namespace mref {

AdamW::AdamW(AdamWConfig config, std::vector<ParamView> params)
    : config_(config), params_(std::move(params)) {
  require(config_.lr > 0.0, "AdamW: lr must be positive");
  require(config_.beta1 >= 0.0 && config_.beta1 < 1.0, "AdamW: beta1 out of range");
  require(config_.beta2 >= 0.0 && config_.beta2 < 1.0, "AdamW: beta2 out of range");
  require(config_.eps > 0.0, "AdamW: eps must be positive");
  require(config_.weight_decay >= 0.0, "AdamW: weight_decay must be non-negative");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const ParamView& p : params_) {
    require(p.values != nullptr && p.grads != nullptr, "AdamW: null parameter view");
    m_.emplace_back(p.size, 0.0);
    v_.emplace_back(p.size, 0.0);
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    ParamView& p = params_[k];
    std::vector<double>& m = m_[k];
    std::vector<double>& v = v_[k];
    const double decay = p.decay ? config_.weight_decay : 0.0;
    for (std::size_t i = 0; i < p.size; ++i) {
      const double g = p.grads[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p.values[i] -= config_.lr * (mhat / (std::sqrt(vhat) + config_.eps) +
                                   decay * p.values[i]);
    }
  }
}

}  // namespace mref
