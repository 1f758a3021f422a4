// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>

#include "mref/data.hpp"
#include "mref/model.hpp"
#include "mref/nn.hpp"

namespace mref {

/// One classifier over the concatenation of every feature block plus one
/// availability flag per modality (missing blocks arrive zero-imputed).
class ConcatModel : public TrainableModel {
 public:
  ConcatModel(const FeatureSchema& schema, int num_classes,
              const std::vector<int>& hidden_dims, std::uint64_t seed);

  std::string kind() const override { return "concat"; }
  int num_classes() const override { return num_classes_; }
  std::vector<ParamBlock> param_blocks() override;
  void zero_grads() override { grads_.set_zero(); }
  LossBreakdown sample_loss(const SubjectRecord& record,
                            const LossConfig& loss) const override;
  LossBreakdown sample_grad(const SubjectRecord& record, const LossConfig& loss,
                            double scale) override;
  std::vector<double> predict_probs(const SubjectRecord& record) const override;
  nlohmann::ordered_json to_json() const override;
  static std::unique_ptr<ConcatModel> from_json(const FeatureSchema& schema,
                                                const nlohmann::json& j);

  const MlpParams& net() const { return net_; }
  MlpParams& net() { return net_; }

 protected:
  ConcatModel(const FeatureSchema& schema, int num_classes);
  std::vector<double> assemble(const SubjectRecord& record) const;

  int num_classes_ = 0;
  int num_modalities_ = 0;
  int feature_dim_ = 0;
  MlpParams net_;
  GradientBundle grads_;
};

/// Multinomial logistic regression: same concatenated input as the concat
/// baseline, a single zero-initialized identity layer plus softmax.
class LogisticRegressionModel : public ConcatModel {
 public:
  LogisticRegressionModel(const FeatureSchema& schema, int num_classes);
  std::string kind() const override { return "logreg"; }
  static std::unique_ptr<LogisticRegressionModel> from_json(
      const FeatureSchema& schema, const nlohmann::json& j);
};

/// One net per modality; prediction averages the softmax probabilities of
/// the available modalities. Training sums each available net's weighted
/// cross-entropy (parameters are disjoint, so each net trains on exactly the
/// samples where its modality is present).
class LateFusionModel : public TrainableModel {
 public:
  LateFusionModel(const FeatureSchema& schema, int num_classes,
                  const std::vector<int>& hidden_dims, std::uint64_t seed);

  std::string kind() const override { return "late"; }
  int num_classes() const override { return num_classes_; }
  std::vector<ParamBlock> param_blocks() override;
  void zero_grads() override;
  LossBreakdown sample_loss(const SubjectRecord& record,
                            const LossConfig& loss) const override;
  LossBreakdown sample_grad(const SubjectRecord& record, const LossConfig& loss,
                            double scale) override;
  std::vector<double> predict_probs(const SubjectRecord& record) const override;
  nlohmann::ordered_json to_json() const override;
  static std::unique_ptr<LateFusionModel> from_json(const FeatureSchema& schema,
                                                    const nlohmann::json& j);

  const std::vector<MlpParams>& nets() const { return nets_; }
  std::vector<MlpParams>& nets() { return nets_; }

 private:
  LateFusionModel() = default;
  int num_classes_ = 0;
  std::vector<std::string> modality_names_;
  std::vector<std::vector<int>> modality_blocks_;
  std::vector<MlpParams> nets_;
  std::vector<GradientBundle> grads_;
};

}  // namespace mref
