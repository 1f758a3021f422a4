// SPDX-License-Identifier: Apache-2.0
#include "mref/train.hpp"

#include <cmath>
#include <map>

#include "mref/common.hpp"
#include "mref/rng.hpp"

namespace mref {

void seeded_shuffle(std::vector<int>& indices, std::uint64_t seed,
                    std::uint64_t stream) {
  Rng rng(derive_seed(seed, stream));
  rng.shuffle(indices);
}

void stratified_val_split(const std::vector<SubjectRecord>& data,
                          const std::vector<int>& indices, double val_fraction,
                          std::uint64_t seed, std::vector<int>& train_out,
                          std::vector<int>& val_out) {
  require(val_fraction >= 0.0 && val_fraction < 1.0,
          "stratified_val_split: val_fraction must be in [0, 1)");
  std::map<int, std::vector<int>> by_class;
  for (int i : indices) {
    require(data[i].label >= 0, "stratified_val_split: unlabeled record");
    by_class[data[i].label].push_back(i);
  }
  train_out.clear();
  val_out.clear();
  std::uint64_t stream = 0x2000;  // distinct from init/epoch/fold streams
  for (auto& [label, members] : by_class) {
    seeded_shuffle(members, seed, stream++);
    const int n = static_cast<int>(members.size());
    int n_val = static_cast<int>(std::floor(n * val_fraction));
    if (n_val > n - 1) n_val = n - 1;
    for (int j = 0; j < n; ++j)
      (j < n_val ? val_out : train_out).push_back(members[j]);
  }
}

TrainTrace train_model(TrainableModel& model,
                       const std::vector<SubjectRecord>& data,
                       const std::vector<int>& train_indices,
                       const LossConfig& loss, const TrainConfig& config) {
  require(!train_indices.empty(), "train_model: empty training set");
  require(config.max_epochs >= 0, "train_model: max_epochs must be >= 0");
  if (config.max_epochs == 0) return {};  // no-op: keep the initial model
  require(config.patience >= 1 && config.patience <= config.max_epochs,
          "train_model: patience must be in [1, max_epochs]");
  require(config.batch_size >= 1, "train_model: batch_size must be >= 1");
  require(config.val_fraction > 0.0 && config.val_fraction < 1.0,
          "train_model: val_fraction must be in (0, 1)");

  std::vector<int> class_seen(model.num_classes(), 0);
  for (int i : train_indices) {
    require(data[i].label >= 0 && data[i].label < model.num_classes(),
            "train_model: label out of range");
    class_seen[data[i].label] = 1;
  }
  for (int c = 0; c < model.num_classes(); ++c)
    require(class_seen[c] != 0,
            "train_model: class " + std::to_string(c) +
                " absent from the training subset; use larger folds or a "
                "smaller val_fraction");

  std::vector<int> fit, val;
  stratified_val_split(data, train_indices, config.val_fraction, config.seed,
                       fit, val);
  require(!fit.empty(), "train_model: empty fitting set after validation split");
  const bool has_val = !val.empty();

  AdamW opt(config.optim, optimizer_views(model.param_blocks()));
  EarlyStopper stopper(config.patience);
  std::vector<std::vector<double>> best;

  TrainTrace trace;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    seeded_shuffle(fit, config.seed, 0x1000 + static_cast<std::uint64_t>(epoch));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < fit.size(); start += config.batch_size) {
      const std::size_t stop = std::min(fit.size(), start + config.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      model.zero_grads();
      for (std::size_t k = start; k < stop; ++k)
        epoch_loss += model.sample_grad(data[fit[k]], loss, scale).total;
      opt.step();
      ++trace.steps;
    }
    trace.train_loss.push_back(epoch_loss / static_cast<double>(fit.size()));
    trace.stopped_epoch = epoch;

    if (!has_val) continue;
    const double v = mean_loss(model, data, val, loss);
    trace.val_loss.push_back(v);
    const bool improved = v < stopper.best;
    const bool stop = stopper.update(v, epoch);
    if (improved) best = snapshot_params(model);
    if (stop) break;
  }

  if (has_val && !best.empty()) {
    restore_params(model, best);
    trace.best_epoch = stopper.best_epoch;
  } else {
    trace.best_epoch = trace.stopped_epoch;
  }
  return trace;
}

}  // namespace mref
