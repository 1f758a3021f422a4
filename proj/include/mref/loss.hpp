// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "mref/nn.hpp"

namespace mref {

/// Hyper-parameters of the training objective. class_weights has one entry
/// per class; fill with 1.0 for unweighted training.
struct LossConfig {
  double lambda_sparsity = 0.01;
  double lambda_diversity = 0.01;
  std::vector<double> class_weights;
};

struct LossBreakdown {
  double cross_entropy = 0.0;
  double sparsity = 0.0;
  double diversity = 0.0;
  double total = 0.0;
};

/// Inverse-frequency class weights: w_c = n_total / (C * n_c).
std::vector<double> class_weights_from_counts(const std::vector<int>& counts);

/// -w_y * ln p_y. Probabilities are floored at 1e-12 before the log.
double weighted_ce(std::span<const double> probs, int label,
                   std::span<const double> class_weights);

/// Gradient of weighted_ce with respect to the logits that produced `probs`
/// through a softmax: w_y * (p - onehot_y).
std::vector<double> ce_fused_gradient(std::span<const double> probs, int label,
                                      std::span<const double> class_weights);

/// Shannon entropy of a gate distribution; zero entries contribute zero.
double gate_entropy(std::span<const double> weights);

/// dH/dg_m = -(ln g_m + 1) on positive entries, zero elsewhere.
std::vector<double> gate_entropy_grad(std::span<const double> weights);

/// Mean squared cosine similarity of mean-centered logit rows over all
/// unordered pairs of active experts. Rows with centered norm < 1e-12 are
/// treated as orthogonal to everything. Fewer than two active rows: 0.
double diversity_penalty(const Matrix& expert_logits,
                         const std::vector<std::uint8_t>& active_mask);

/// Gradient of diversity_penalty with respect to the (uncentered) rows.
/// Inactive rows receive zero gradient.
Matrix diversity_grad(const Matrix& expert_logits,
                      const std::vector<std::uint8_t>& active_mask);

}  // namespace mref
