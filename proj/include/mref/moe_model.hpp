// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>

#include "mref/data.hpp"
#include "mref/model.hpp"
#include "mref/moe.hpp"

namespace mref {

struct MoeModelOptions {
  int num_classes = 3;
  GateMode gate_mode = GateMode::kHierarchical;
  std::optional<int> top_k;
  std::vector<int> hidden_dims = {64, 32};
};

/// Mixture model over one expert per (modality, region) block, trained end
/// to end with the weighted cross-entropy plus gate-entropy and expert
/// diversity penalties.
class MoeModel : public TrainableModel {
 public:
  MoeModel(const FeatureSchema& schema, const MoeModelOptions& options,
           std::uint64_t seed);

  std::string kind() const override { return "mref"; }
  int num_classes() const override { return config_.num_classes; }

  std::vector<ParamBlock> param_blocks() override;
  void zero_grads() override { grads_.set_zero(); }

  LossBreakdown sample_loss(const SubjectRecord& record,
                            const LossConfig& loss) const override;
  LossBreakdown sample_grad(const SubjectRecord& record, const LossConfig& loss,
                            double scale) override;
  std::vector<double> predict_probs(const SubjectRecord& record) const override;

  Prediction predict(const SubjectRecord& record) const;

  nlohmann::ordered_json to_json() const override;
  static std::unique_ptr<MoeModel> from_json(const FeatureSchema& schema,
                                             const nlohmann::json& j);

  const MoeConfig& config() const { return config_; }
  const GateTree& tree() const { return tree_; }

 private:
  MoeModel() = default;
  void allocate_grads();

  MoeConfig config_;
  GateTree tree_;
  MoeGrads grads_;
};

/// Builds the expert slots (without nets) implied by a schema.
MoeConfig moe_config_from_schema(const FeatureSchema& schema,
                                 const MoeModelOptions& options);

}  // namespace mref
