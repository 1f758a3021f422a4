// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "mref/loss.hpp"
#include "mref/optim.hpp"
#include "mref/record.hpp"

namespace mref {

/// A named view of one parameter tensor and its gradient accumulator.
struct ParamBlock {
  std::string name;
  double* values = nullptr;
  double* grads = nullptr;
  std::size_t size = 0;
  bool decay = true;  // weights yes, biases no
};

/// Anything the trainer can optimize: the mixture model and each baseline.
class TrainableModel {
 public:
  virtual ~TrainableModel() = default;

  virtual std::string kind() const = 0;
  virtual int num_classes() const = 0;

  /// Views stay valid for the life of the model.
  virtual std::vector<ParamBlock> param_blocks() = 0;
  virtual void zero_grads() = 0;

  /// Forward pass only.
  virtual LossBreakdown sample_loss(const SubjectRecord& record,
                                    const LossConfig& loss) const = 0;

  /// Forward + backward; accumulates `scale` times the sample gradient into
  /// the gradient views. Returns the unscaled loss.
  virtual LossBreakdown sample_grad(const SubjectRecord& record,
                                    const LossConfig& loss, double scale) = 0;

  virtual std::vector<double> predict_probs(const SubjectRecord& record) const = 0;

  virtual nlohmann::ordered_json to_json() const = 0;
};

std::vector<ParamView> optimizer_views(const std::vector<ParamBlock>& blocks);

std::vector<std::vector<double>> snapshot_params(TrainableModel& model);
void restore_params(TrainableModel& model,
                    const std::vector<std::vector<double>>& snapshot);

/// Mean total loss over the indexed subset.
double mean_loss(const TrainableModel& model,
                 const std::vector<SubjectRecord>& data,
                 const std::vector<int>& indices, const LossConfig& loss);

}  // namespace mref
