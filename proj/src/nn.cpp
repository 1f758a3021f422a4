// SPDX-License-Identifier: Apache-2.0
#include "mref/nn.hpp"

#include <algorithm>
#include <cmath>

#include "mref/common.hpp"
#include "mref/rng.hpp"

namespace mref {

void MlpParams::validate() const {
  require(!layers.empty(), "MlpParams: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const DenseLayer& l = layers[i];
    require(l.weights.rows > 0 && l.weights.cols > 0,
            "MlpParams: layer " + std::to_string(i) + " has empty weights");
    require(static_cast<int>(l.bias.size()) == l.weights.rows,
            "MlpParams: layer " + std::to_string(i) + " bias length " +
                std::to_string(l.bias.size()) + " != weight rows " +
                std::to_string(l.weights.rows));
    if (i + 1 < layers.size()) {
      require(l.out_dim() == layers[i + 1].in_dim(),
              "MlpParams: layer " + std::to_string(i) + " out_dim " +
                  std::to_string(l.out_dim()) + " != layer " +
                  std::to_string(i + 1) + " in_dim " +
                  std::to_string(layers[i + 1].in_dim()));
    }
    for (double w : l.weights.data)
      require(std::isfinite(w), "MlpParams: non-finite weight");
    for (double b : l.bias) require(std::isfinite(b), "MlpParams: non-finite bias");
  }
  require(layers.back().activation == Activation::kIdentity,
          "MlpParams: output layer must have identity activation");
}

GradientBundle GradientBundle::zeros_like(const MlpParams& params) {
  GradientBundle g;
  g.layers.reserve(params.layers.size());
  for (const DenseLayer& l : params.layers) {
    LayerGrad lg;
    lg.weights = Matrix(l.weights.rows, l.weights.cols);
    lg.bias.assign(l.bias.size(), 0.0);
    g.layers.push_back(std::move(lg));
  }
  return g;
}

void GradientBundle::set_zero() {
  for (auto& l : layers) {
    std::fill(l.weights.data.begin(), l.weights.data.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> x,
                                MlpCache* cache) {
  require(!params.layers.empty(), "mlp_forward: no layers");
  require(static_cast<int>(x.size()) == params.in_dim(),
          "mlp_forward: input dim mismatch: expected " +
              std::to_string(params.in_dim()) + ", got " + std::to_string(x.size()));
  if (cache) {
    cache->inputs.assign(params.layers.size(), {});
    cache->preacts.assign(params.layers.size(), {});
  }

  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    const DenseLayer& l = params.layers[li];
    if (cache) cache->inputs[li] = cur;

    std::vector<double> z(l.out_dim());
    for (int r = 0; r < l.out_dim(); ++r) {
      const double* w = l.weights.row(r);
      double acc = l.bias[r];
      for (int c = 0; c < l.in_dim(); ++c) acc += w[c] * cur[c];
      z[r] = acc;
    }
    if (cache) cache->preacts[li] = z;

    if (l.activation == Activation::kRelu)
      for (double& v : z) v = v > 0.0 ? v : 0.0;
    cur = std::move(z);
  }
  return cur;
}

void mlp_backward(const MlpParams& params, const MlpCache& cache,
                  std::span<const double> grad_output, GradientBundle& grads,
                  std::vector<double>* grad_input) {
  const std::size_t L = params.layers.size();
  require(cache.inputs.size() == L && cache.preacts.size() == L,
          "mlp_backward: cache does not match the network");
  require(grads.layers.size() == L, "mlp_backward: gradient bundle shape mismatch");
  require(static_cast<int>(grad_output.size()) == params.out_dim(),
          "mlp_backward: grad dim mismatch: expected " +
              std::to_string(params.out_dim()) + ", got " +
              std::to_string(grad_output.size()));

  std::vector<double> delta(grad_output.begin(), grad_output.end());
  for (std::size_t li = L; li-- > 0;) {
    const DenseLayer& l = params.layers[li];
    const std::vector<double>& in = cache.inputs[li];
    const std::vector<double>& z = cache.preacts[li];
    require(static_cast<int>(in.size()) == l.in_dim() &&
                static_cast<int>(z.size()) == l.out_dim(),
            "mlp_backward: stale cache at layer " + std::to_string(li));

    if (l.activation == Activation::kRelu)
      for (int r = 0; r < l.out_dim(); ++r)
        if (z[r] <= 0.0) delta[r] = 0.0;

    GradientBundle::LayerGrad& lg = grads.layers[li];
    for (int r = 0; r < l.out_dim(); ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      lg.bias[r] += d;
      double* wg = lg.weights.row(r);
      for (int c = 0; c < l.in_dim(); ++c) wg[c] += d * in[c];
    }

    if (li > 0 || grad_input) {
      std::vector<double> prev(l.in_dim(), 0.0);
      for (int r = 0; r < l.out_dim(); ++r) {
        const double d = delta[r];
        if (d == 0.0) continue;
        const double* w = params.layers[li].weights.row(r);
        for (int c = 0; c < l.in_dim(); ++c) prev[c] += d * w[c];
      }
      delta = std::move(prev);
    }
  }
  if (grad_input) *grad_input = std::move(delta);
}

std::vector<double> stable_softmax(std::span<const double> v) {
  require(!v.empty(), "stable_softmax: empty input");
  double mx = v[0];
  for (double x : v) {
    require(std::isfinite(x), "stable_softmax: non-finite input");
    mx = std::max(mx, x);
  }
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - mx);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

std::vector<double> softmax_backward(std::span<const double> g,
                                     std::span<const double> upstream) {
  double dot = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) dot += upstream[i] * g[i];
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] * (upstream[i] - dot);
  return out;
}

MlpParams init_params(int in_dim, const std::vector<int>& hidden_dims, int out_dim,
                      std::uint64_t seed) {
  require(in_dim > 0, "init_params: in_dim must be positive");
  require(out_dim > 0, "init_params: out_dim must be positive");
  for (int h : hidden_dims) require(h > 0, "init_params: hidden dim must be positive");

  std::vector<int> dims;
  dims.push_back(in_dim);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(out_dim);

  Rng rng(seed);
  MlpParams p;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    DenseLayer l;
    l.weights = Matrix(dims[i + 1], dims[i]);
    l.bias.assign(dims[i + 1], 0.0);
    const double a = std::sqrt(6.0 / (dims[i] + dims[i + 1]));
    for (double& w : l.weights.data) w = rng.uniform(-a, a);
    const bool last = (i + 2 == dims.size());
    l.activation = last ? Activation::kIdentity : Activation::kRelu;
    p.layers.push_back(std::move(l));
  }
  return p;
}

nlohmann::ordered_json mlp_to_json(const MlpParams& params) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["layers"] = nlohmann::ordered_json::array();
  for (const DenseLayer& l : params.layers) {
    nlohmann::ordered_json lj;
    auto rows = nlohmann::ordered_json::array();
    for (int r = 0; r < l.weights.rows; ++r) {
      auto row = nlohmann::ordered_json::array();
      for (int c = 0; c < l.weights.cols; ++c) row.push_back(l.weights.at(r, c));
      rows.push_back(std::move(row));
    }
    lj["w"] = std::move(rows);
    lj["b"] = l.bias;
    lj["act"] = l.activation == Activation::kRelu ? "relu" : "id";
    j["layers"].push_back(std::move(lj));
  }
  return j;
}

MlpParams mlp_from_json(const nlohmann::json& j) {
  require(j.contains("schema_version") && j["schema_version"].get<int>() == 1,
          "mlp_from_json: unsupported schema_version");
  MlpParams p;
  for (const auto& lj : j.at("layers")) {
    DenseLayer l;
    const auto& rows = lj.at("w");
    require(!rows.empty(), "mlp_from_json: empty weight matrix");
    l.weights = Matrix(static_cast<int>(rows.size()),
                       static_cast<int>(rows.at(0).size()));
    for (int r = 0; r < l.weights.rows; ++r) {
      const auto& row = rows.at(r);
      require(static_cast<int>(row.size()) == l.weights.cols,
              "mlp_from_json: ragged weight matrix");
      for (int c = 0; c < l.weights.cols; ++c)
        l.weights.at(r, c) = row.at(c).get<double>();
    }
    l.bias = lj.at("b").get<std::vector<double>>();
    const std::string act = lj.at("act").get<std::string>();
    if (act == "relu")
      l.activation = Activation::kRelu;
    else if (act == "id")
      l.activation = Activation::kIdentity;
    else
      fail("mlp_from_json: unknown activation '" + act + "'");
    p.layers.push_back(std::move(l));
  }
  p.validate();
  return p;
}

}  // namespace mref
