// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "mref/model.hpp"
#include "mref/optim.hpp"

namespace mref {

struct TrainConfig {
  int max_epochs = 40;
  int patience = 10;
  int batch_size = 64;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  AdamWConfig optim;
};

/// Early stopping on validation loss: stop once `patience` consecutive
/// epochs fail to strictly improve on the best value seen.
struct EarlyStopper {
  explicit EarlyStopper(int patience) : patience_(patience) {}

  /// Feed one epoch's validation loss (epoch is 1-based).
  /// Returns true when training should stop after this epoch.
  bool update(double val_loss, int epoch) {
    if (val_loss < best) {
      best = val_loss;
      best_epoch = epoch;
      streak_ = 0;
      return false;
    }
    ++streak_;
    return streak_ >= patience_;
  }

  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;

 private:
  int patience_;
  int streak_ = 0;
};

struct TrainTrace {
  std::vector<double> train_loss;  // running mean per epoch
  std::vector<double> val_loss;    // empty when no validation split exists
  int best_epoch = 0;              // 1-based; epoch whose weights were kept
  int stopped_epoch = 0;           // 1-based; last epoch actually run
  std::int64_t steps = 0;
};

/// Deterministic in-place shuffle used for epoch ordering.
void seeded_shuffle(std::vector<int>& indices, std::uint64_t seed,
                    std::uint64_t stream);

/// Per-class validation indices: floor(n_c * val_fraction), capped at
/// n_c - 1 so every class stays represented in the training part.
void stratified_val_split(const std::vector<SubjectRecord>& data,
                          const std::vector<int>& indices, double val_fraction,
                          std::uint64_t seed, std::vector<int>& train_out,
                          std::vector<int>& val_out);

/// Mini-batch AdamW with early stopping and best-weight restore.
TrainTrace train_model(TrainableModel& model,
                       const std::vector<SubjectRecord>& data,
                       const std::vector<int>& train_indices,
                       const LossConfig& loss, const TrainConfig& config);

}  // namespace mref
