// SPDX-License-Identifier: Apache-2.0
#include "mref/loss.hpp"

#include <cmath>

#include "mref/common.hpp"

namespace mref {

namespace {
constexpr double kProbFloor = 1e-12;
constexpr double kNormFloor = 1e-12;
}  // namespace

std::vector<double> class_weights_from_counts(const std::vector<int>& counts) {
  require(!counts.empty(), "class_weights_from_counts: empty counts");
  long total = 0;
  for (int c : counts) {
    require(c > 0, "class_weights_from_counts: every class needs at least one sample");
    total += c;
  }
  std::vector<double> w(counts.size());
  const double C = static_cast<double>(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    w[i] = static_cast<double>(total) / (C * static_cast<double>(counts[i]));
  return w;
}

double weighted_ce(std::span<const double> probs, int label,
                   std::span<const double> class_weights) {
  require(label >= 0 && label < static_cast<int>(probs.size()),
          "weighted_ce: label out of range");
  require(class_weights.size() == probs.size(),
          "weighted_ce: class_weights length mismatch");
  const double p = std::max(probs[label], kProbFloor);
  return -class_weights[label] * std::log(p);
}

std::vector<double> ce_fused_gradient(std::span<const double> probs, int label,
                                      std::span<const double> class_weights) {
  require(label >= 0 && label < static_cast<int>(probs.size()),
          "ce_fused_gradient: label out of range");
  require(class_weights.size() == probs.size(),
          "ce_fused_gradient: class_weights length mismatch");
  const double w = class_weights[label];
  std::vector<double> g(probs.begin(), probs.end());
  for (double& x : g) x *= w;
  g[label] -= w;
  return g;
}

double gate_entropy(std::span<const double> weights) {
  double h = 0.0;
  for (double g : weights) {
    require(g >= 0.0, "gate_entropy: negative weight");
    if (g > 0.0) h -= g * std::log(g);
  }
  return h;
}

std::vector<double> gate_entropy_grad(std::span<const double> weights) {
  std::vector<double> out(weights.size(), 0.0);
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (weights[i] > 0.0) out[i] = -(std::log(weights[i]) + 1.0);
  return out;
}

namespace {

struct CenteredRows {
  Matrix centered;
  std::vector<double> norms;
  std::vector<int> active;
};

CenteredRows center_rows(const Matrix& h, const std::vector<std::uint8_t>& mask) {
  require(static_cast<int>(mask.size()) == h.rows,
          "diversity: active_mask length mismatch");
  CenteredRows out;
  out.centered = Matrix(h.rows, h.cols);
  out.norms.assign(h.rows, 0.0);
  for (int m = 0; m < h.rows; ++m) {
    if (!mask[m]) continue;
    out.active.push_back(m);
    const double* src = h.row(m);
    double mean = 0.0;
    for (int j = 0; j < h.cols; ++j) mean += src[j];
    mean /= h.cols;
    double sq = 0.0;
    double* dst = out.centered.row(m);
    for (int j = 0; j < h.cols; ++j) {
      dst[j] = src[j] - mean;
      sq += dst[j] * dst[j];
    }
    out.norms[m] = std::sqrt(sq);
  }
  return out;
}

}  // namespace

double diversity_penalty(const Matrix& expert_logits,
                         const std::vector<std::uint8_t>& active_mask) {
  CenteredRows cr = center_rows(expert_logits, active_mask);
  const std::size_t n = cr.active.size();
  if (n < 2) return 0.0;
  double acc = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const int i = cr.active[a], j = cr.active[b];
      if (cr.norms[i] < kNormFloor || cr.norms[j] < kNormFloor) continue;
      double dot = 0.0;
      const double* ri = cr.centered.row(i);
      const double* rj = cr.centered.row(j);
      for (int c = 0; c < expert_logits.cols; ++c) dot += ri[c] * rj[c];
      const double cos = dot / (cr.norms[i] * cr.norms[j]);
      acc += cos * cos;
    }
  }
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  return acc / pairs;
}

Matrix diversity_grad(const Matrix& expert_logits,
                      const std::vector<std::uint8_t>& active_mask) {
  CenteredRows cr = center_rows(expert_logits, active_mask);
  Matrix grad(expert_logits.rows, expert_logits.cols);
  const std::size_t n = cr.active.size();
  if (n < 2) return grad;
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  // d/d centered rows first.
  Matrix gc(expert_logits.rows, expert_logits.cols);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const int i = cr.active[a], j = cr.active[b];
      if (cr.norms[i] < kNormFloor || cr.norms[j] < kNormFloor) continue;
      double dot = 0.0;
      const double* ri = cr.centered.row(i);
      const double* rj = cr.centered.row(j);
      for (int c = 0; c < expert_logits.cols; ++c) dot += ri[c] * rj[c];
      const double ninj = cr.norms[i] * cr.norms[j];
      const double cos = dot / ninj;
      const double scale = 2.0 * cos / pairs;
      double* gi = gc.row(i);
      double* gj = gc.row(j);
      for (int c = 0; c < expert_logits.cols; ++c) {
        gi[c] += scale * (rj[c] / ninj - cos * ri[c] / (cr.norms[i] * cr.norms[i]));
        gj[c] += scale * (ri[c] / ninj - cos * rj[c] / (cr.norms[j] * cr.norms[j]));
      }
    }
  }
  // Centering backward: subtract the per-row mean of the centered gradient.
  for (int idx : cr.active) {
    const double* src = gc.row(idx);
    double mean = 0.0;
    for (int c = 0; c < expert_logits.cols; ++c) mean += src[c];
    mean /= expert_logits.cols;
    double* dst = grad.row(idx);
    for (int c = 0; c < expert_logits.cols; ++c) dst[c] = src[c] - mean;
  }
  return grad;
}

}  // namespace mref
