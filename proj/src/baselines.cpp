// SPDX-License-Identifier: Apache-2.0
#include "mref/baselines.hpp"

#include "mref/common.hpp"
#include "mref/rng.hpp"

namespace mref {

using nlohmann::ordered_json;

ConcatModel::ConcatModel(const FeatureSchema& schema, int num_classes)
    : num_classes_(num_classes) {
  schema.validate();
  require(num_classes >= 2, "concat: num_classes must be >= 2");
  const BlockLayout layout = build_layout(schema);
  num_modalities_ = layout.num_modalities();
  feature_dim_ = layout.total_columns;
}

ConcatModel::ConcatModel(const FeatureSchema& schema, int num_classes,
                         const std::vector<int>& hidden_dims, std::uint64_t seed)
    : ConcatModel(schema, num_classes) {
  net_ = init_params(feature_dim_ + num_modalities_, hidden_dims, num_classes_,
                     seed);
  grads_ = GradientBundle::zeros_like(net_);
}

std::vector<double> ConcatModel::assemble(const SubjectRecord& record) const {
  require(static_cast<int>(record.available.size()) == num_modalities_,
          "concat: record modality count mismatch");
  std::vector<double> x;
  x.reserve(feature_dim_ + num_modalities_);
  for (const std::vector<double>& block : record.blocks)
    x.insert(x.end(), block.begin(), block.end());
  require(static_cast<int>(x.size()) == feature_dim_,
          "concat: record feature dim mismatch");
  for (int m = 0; m < num_modalities_; ++m)
    x.push_back(record.available[m] ? 1.0 : 0.0);
  return x;
}

std::vector<ParamBlock> ConcatModel::param_blocks() {
  std::vector<ParamBlock> out;
  for (std::size_t l = 0; l < net_.layers.size(); ++l) {
    out.push_back({"net.layer" + std::to_string(l) + ".weight",
                   net_.layers[l].weights.data.data(),
                   grads_.layers[l].weights.data.data(),
                   net_.layers[l].weights.data.size(), true});
    out.push_back({"net.layer" + std::to_string(l) + ".bias",
                   net_.layers[l].bias.data(), grads_.layers[l].bias.data(),
                   net_.layers[l].bias.size(), false});
  }
  return out;
}

std::vector<double> ConcatModel::predict_probs(const SubjectRecord& record) const {
  return stable_softmax(mlp_forward(net_, assemble(record)));
}

LossBreakdown ConcatModel::sample_loss(const SubjectRecord& record,
                                       const LossConfig& loss) const {
  LossBreakdown b;
  b.cross_entropy =
      weighted_ce(predict_probs(record), record.label, loss.class_weights);
  b.total = b.cross_entropy;
  return b;
}

LossBreakdown ConcatModel::sample_grad(const SubjectRecord& record,
                                       const LossConfig& loss, double scale) {
  MlpCache cache;
  const std::vector<double> x = assemble(record);
  const std::vector<double> probs = stable_softmax(mlp_forward(net_, x, &cache));
  LossBreakdown b;
  b.cross_entropy = weighted_ce(probs, record.label, loss.class_weights);
  b.total = b.cross_entropy;
  std::vector<double> delta =
      ce_fused_gradient(probs, record.label, loss.class_weights);
  for (double& g : delta) g *= scale;
  mlp_backward(net_, cache, delta, grads_);
  return b;
}

ordered_json ConcatModel::to_json() const {
  ordered_json j;
  j["num_classes"] = num_classes_;
  j["net"] = mlp_to_json(net_);
  return j;
}

std::unique_ptr<ConcatModel> ConcatModel::from_json(const FeatureSchema& schema,
                                                    const nlohmann::json& j) {
  std::unique_ptr<ConcatModel> model(
      new ConcatModel(schema, j.at("num_classes").get<int>()));
  model->net_ = mlp_from_json(j.at("net"));
  require(model->net_.in_dim() == model->feature_dim_ + model->num_modalities_,
          "model bundle: concat net input dim does not match schema");
  require(model->net_.out_dim() == model->num_classes_,
          "model bundle: concat net output dim mismatch");
  model->grads_ = GradientBundle::zeros_like(model->net_);
  return model;
}

LogisticRegressionModel::LogisticRegressionModel(const FeatureSchema& schema,
                                                 int num_classes)
    : ConcatModel(schema, num_classes) {
  DenseLayer layer;
  layer.weights = Matrix(num_classes_, feature_dim_ + num_modalities_);
  layer.bias.assign(num_classes_, 0.0);
  layer.activation = Activation::kIdentity;
  net_.layers = {std::move(layer)};
  net_.validate();
  grads_ = GradientBundle::zeros_like(net_);
}

std::unique_ptr<LogisticRegressionModel> LogisticRegressionModel::from_json(
    const FeatureSchema& schema, const nlohmann::json& j) {
  std::unique_ptr<LogisticRegressionModel> model(
      new LogisticRegressionModel(schema, j.at("num_classes").get<int>()));
  model->net_ = mlp_from_json(j.at("net"));
  require(model->net_.layers.size() == 1,
          "model bundle: logistic regression must have a single layer");
  require(model->net_.in_dim() == model->feature_dim_ + model->num_modalities_,
          "model bundle: logistic regression input dim does not match schema");
  model->grads_ = GradientBundle::zeros_like(model->net_);
  return model;
}

LateFusionModel::LateFusionModel(const FeatureSchema& schema, int num_classes,
                                 const std::vector<int>& hidden_dims,
                                 std::uint64_t seed)
    : num_classes_(num_classes) {
  schema.validate();
  require(num_classes >= 2, "late fusion: num_classes must be >= 2");
  const BlockLayout layout = build_layout(schema);
  modality_names_ = layout.modality_names;
  modality_blocks_ = layout.modality_blocks;
  nets_.resize(layout.num_modalities());
  grads_.resize(layout.num_modalities());
  for (int i = 0; i < layout.num_modalities(); ++i) {
    int dim = 0;
    for (int b : layout.modality_blocks[i]) dim += layout.block_len[b];
    nets_[i] = init_params(dim, hidden_dims, num_classes_,
                           derive_seed(seed, static_cast<std::uint64_t>(i)));
    grads_[i] = GradientBundle::zeros_like(nets_[i]);
  }
}

std::vector<ParamBlock> LateFusionModel::param_blocks() {
  std::vector<ParamBlock> out;
  for (std::size_t i = 0; i < nets_.size(); ++i) {
    for (std::size_t l = 0; l < nets_[i].layers.size(); ++l) {
      const std::string prefix =
          "net." + modality_names_[i] + ".layer" + std::to_string(l);
      out.push_back({prefix + ".weight", nets_[i].layers[l].weights.data.data(),
                     grads_[i].layers[l].weights.data.data(),
                     nets_[i].layers[l].weights.data.size(), true});
      out.push_back({prefix + ".bias", nets_[i].layers[l].bias.data(),
                     grads_[i].layers[l].bias.data(),
                     nets_[i].layers[l].bias.size(), false});
    }
  }
  return out;
}

void LateFusionModel::zero_grads() {
  for (GradientBundle& g : grads_) g.set_zero();
}

namespace {

std::vector<double> modality_input(const std::vector<std::vector<int>>& blocks,
                                   const SubjectRecord& record, int modality) {
  std::vector<double> x;
  for (int b : blocks[modality])
    x.insert(x.end(), record.blocks[b].begin(), record.blocks[b].end());
  return x;
}

}  // namespace

std::vector<double> LateFusionModel::predict_probs(
    const SubjectRecord& record) const {
  require(record.available.size() == nets_.size(),
          "late fusion: record modality count mismatch");
  std::vector<double> mean(num_classes_, 0.0);
  int available = 0;
  for (std::size_t i = 0; i < nets_.size(); ++i) {
    if (!record.available[i]) continue;
    const std::vector<double> probs = stable_softmax(
        mlp_forward(nets_[i], modality_input(modality_blocks_, record,
                                             static_cast<int>(i))));
    for (int c = 0; c < num_classes_; ++c) mean[c] += probs[c];
    ++available;
  }
  require(available > 0, "late fusion: no available modalities");
  for (double& p : mean) p /= static_cast<double>(available);
  return mean;
}

LossBreakdown LateFusionModel::sample_loss(const SubjectRecord& record,
                                           const LossConfig& loss) const {
  LossBreakdown b;
  int available = 0;
  for (std::size_t i = 0; i < nets_.size(); ++i) {
    if (!record.available[i]) continue;
    const std::vector<double> probs = stable_softmax(
        mlp_forward(nets_[i], modality_input(modality_blocks_, record,
                                             static_cast<int>(i))));
    b.cross_entropy += weighted_ce(probs, record.label, loss.class_weights);
    ++available;
  }
  require(available > 0, "late fusion: no available modalities");
  b.total = b.cross_entropy;
  return b;
}

LossBreakdown LateFusionModel::sample_grad(const SubjectRecord& record,
                                           const LossConfig& loss, double scale) {
  LossBreakdown b;
  int available = 0;
  for (std::size_t i = 0; i < nets_.size(); ++i) {
    if (!record.available[i]) continue;
    MlpCache cache;
    const std::vector<double> x =
        modality_input(modality_blocks_, record, static_cast<int>(i));
    const std::vector<double> probs =
        stable_softmax(mlp_forward(nets_[i], x, &cache));
    b.cross_entropy += weighted_ce(probs, record.label, loss.class_weights);
    std::vector<double> delta =
        ce_fused_gradient(probs, record.label, loss.class_weights);
    for (double& g : delta) g *= scale;
    mlp_backward(nets_[i], cache, delta, grads_[i]);
    ++available;
  }
  require(available > 0, "late fusion: no available modalities");
  b.total = b.cross_entropy;
  return b;
}

ordered_json LateFusionModel::to_json() const {
  ordered_json j;
  j["num_classes"] = num_classes_;
  j["nets"] = ordered_json::array();
  for (std::size_t i = 0; i < nets_.size(); ++i) {
    ordered_json jn;
    jn["modality"] = modality_names_[i];
    jn["net"] = mlp_to_json(nets_[i]);
    j["nets"].push_back(std::move(jn));
  }
  return j;
}

std::unique_ptr<LateFusionModel> LateFusionModel::from_json(
    const FeatureSchema& schema, const nlohmann::json& j) {
  std::unique_ptr<LateFusionModel> model(new LateFusionModel());
  model->num_classes_ = j.at("num_classes").get<int>();
  const BlockLayout layout = build_layout(schema);
  model->modality_names_ = layout.modality_names;
  model->modality_blocks_ = layout.modality_blocks;
  const auto& nets = j.at("nets");
  require(static_cast<int>(nets.size()) == layout.num_modalities(),
          "model bundle: late fusion net count does not match schema");
  model->nets_.resize(nets.size());
  model->grads_.resize(nets.size());
  for (std::size_t i = 0; i < nets.size(); ++i) {
    require(nets[i].at("modality").get<std::string>() == model->modality_names_[i],
            "model bundle: late fusion modality order mismatch");
    model->nets_[i] = mlp_from_json(nets[i].at("net"));
    model->grads_[i] = GradientBundle::zeros_like(model->nets_[i]);
  }
  return model;
}

}  // namespace mref
