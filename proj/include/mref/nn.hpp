// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace mref {

/// Row-major dense matrix of doubles.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  double* row(int r) { return data.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<std::size_t>(r) * cols; }
};

enum class Activation { kRelu, kIdentity };

struct DenseLayer {
  Matrix weights;             // out_dim x in_dim
  std::vector<double> bias;   // out_dim
  Activation activation = Activation::kIdentity;

  int in_dim() const { return weights.cols; }
  int out_dim() const { return weights.rows; }
};

/// Fully-connected network. The default builds are three layers
/// (two hidden ReLU layers plus an identity output layer); a single identity
/// layer doubles as a multinomial logistic regression.
struct MlpParams {
  std::vector<DenseLayer> layers;

  int in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  int out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }
  bool empty() const { return layers.empty(); }

  /// Checks dimension chaining, bias lengths, identity output activation
  /// and finiteness of every entry. Throws Error on violation.
  void validate() const;
};

/// Per-layer gradients, shapes mirroring an MlpParams.
struct GradientBundle {
  struct LayerGrad {
    Matrix weights;
    std::vector<double> bias;
  };
  std::vector<LayerGrad> layers;

  static GradientBundle zeros_like(const MlpParams& params);
  void set_zero();
};

/// Activation trace of one forward pass, consumed by mlp_backward.
struct MlpCache {
  std::vector<std::vector<double>> inputs;    // input vector of each layer
  std::vector<std::vector<double>> preacts;   // pre-activation of each layer
};

/// Runs the network on x. If cache is non-null it is filled for backward.
std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> x,
                                MlpCache* cache = nullptr);

/// Reverse-mode pass. Adds parameter gradients into `grads` (which must have
/// shapes matching `params`); if grad_input is non-null it receives d(loss)/dx.
/// The ReLU subgradient at exactly zero is zero.
void mlp_backward(const MlpParams& params, const MlpCache& cache,
                  std::span<const double> grad_output, GradientBundle& grads,
                  std::vector<double>* grad_input = nullptr);

/// Max-subtracted softmax; entries stay finite for inputs up to +-1e3 and sum
/// to one. Throws on empty or non-finite input.
std::vector<double> stable_softmax(std::span<const double> v);

/// Pulls an upstream gradient through a softmax output g:
/// returns g .* (u - <u, g>).
std::vector<double> softmax_backward(std::span<const double> g,
                                     std::span<const double> upstream);

/// Glorot-uniform weights (a = sqrt(6/(fan_in+fan_out))), zero biases,
/// ReLU on hidden layers and identity on the output layer. Deterministic in
/// the seed.
MlpParams init_params(int in_dim, const std::vector<int>& hidden_dims, int out_dim,
                      std::uint64_t seed);

/// Versioned JSON form:
/// {"schema_version":1,"layers":[{"w":[[...]],"b":[...],"act":"relu"|"id"}]}.
/// Doubles round-trip value-exact.
nlohmann::ordered_json mlp_to_json(const MlpParams& params);
MlpParams mlp_from_json(const nlohmann::json& j);

}  // namespace mref
