// SPDX-License-Identifier: Apache-2.0
#include "mref/model.hpp"

#include <algorithm>

#include "mref/common.hpp"

namespace mref {

std::vector<ParamView> optimizer_views(const std::vector<ParamBlock>& blocks) {
  std::vector<ParamView> views;
  views.reserve(blocks.size());
  for (const ParamBlock& b : blocks)
    views.push_back({b.values, b.grads, b.size, b.decay});
  return views;
}

std::vector<std::vector<double>> snapshot_params(TrainableModel& model) {
  std::vector<std::vector<double>> snap;
  for (const ParamBlock& b : model.param_blocks())
    snap.emplace_back(b.values, b.values + b.size);
  return snap;
}

void restore_params(TrainableModel& model,
                    const std::vector<std::vector<double>>& snapshot) {
  std::vector<ParamBlock> blocks = model.param_blocks();
  require(blocks.size() == snapshot.size(), "restore_params: block count mismatch");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    require(blocks[i].size == snapshot[i].size(),
            "restore_params: block size mismatch for '" + blocks[i].name + "'");
    std::copy(snapshot[i].begin(), snapshot[i].end(), blocks[i].values);
  }
}

double mean_loss(const TrainableModel& model,
                 const std::vector<SubjectRecord>& data,
                 const std::vector<int>& indices, const LossConfig& loss) {
  require(!indices.empty(), "mean_loss: empty index set");
  double acc = 0.0;
  for (int i : indices) acc += model.sample_loss(data[i], loss).total;
  return acc / static_cast<double>(indices.size());
}

}  // namespace mref
