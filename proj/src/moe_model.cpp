// SPDX-License-Identifier: Apache-2.0
#include "mref/moe_model.hpp"

#include "mref/common.hpp"
#include "mref/rng.hpp"

namespace mref {

using nlohmann::ordered_json;

MoeConfig moe_config_from_schema(const FeatureSchema& schema,
                                 const MoeModelOptions& options) {
  schema.validate();
  const BlockLayout layout = build_layout(schema);
  MoeConfig config;
  config.num_classes = options.num_classes;
  config.gate_mode = options.gate_mode;
  config.top_k = options.top_k;
  for (int b = 0; b < layout.num_blocks(); ++b) {
    ExpertSlot slot;
    slot.modality = layout.modality_names[layout.block_modality[b]];
    slot.region =
        schema.modalities[layout.block_modality[b]].regions[layout.block_region[b]].name;
    slot.in_dim = layout.block_len[b];
    config.blocks.push_back(std::move(slot));
  }
  config.finalize();
  return config;
}

namespace {

// Seed streams for parameter init, one per network.
constexpr std::uint64_t kExpertStream = 0;       // + expert index
constexpr std::uint64_t kFlatGateStream = 1000;
constexpr std::uint64_t kModalityGateStream = 1001;
constexpr std::uint64_t kRegionGateStream = 1100;  // + modality index

void collect_net_blocks(const std::string& prefix, MlpParams& net,
                        GradientBundle& grads, std::vector<ParamBlock>& out) {
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    DenseLayer& layer = net.layers[l];
    GradientBundle::LayerGrad& g = grads.layers[l];
    out.push_back({prefix + ".layer" + std::to_string(l) + ".weight",
                   layer.weights.data.data(), g.weights.data.data(),
                   layer.weights.data.size(), true});
    out.push_back({prefix + ".layer" + std::to_string(l) + ".bias",
                   layer.bias.data(), g.bias.data(), layer.bias.size(), false});
  }
}

}  // namespace

MoeModel::MoeModel(const FeatureSchema& schema, const MoeModelOptions& options,
                   std::uint64_t seed) {
  config_ = moe_config_from_schema(schema, options);
  const int C = config_.num_classes;
  const int M = config_.num_modalities();
  for (int m = 0; m < config_.num_experts(); ++m)
    config_.blocks[m].net =
        init_params(config_.blocks[m].in_dim, options.hidden_dims, C,
                    derive_seed(seed, kExpertStream + static_cast<std::uint64_t>(m)));
  config_.finalize();  // re-check net dims

  const int gate_in = config_.feature_dim() + M;
  switch (config_.gate_mode) {
    case GateMode::kFlat:
      tree_.flat_gate = init_params(gate_in, options.hidden_dims,
                                    config_.num_experts(),
                                    derive_seed(seed, kFlatGateStream));
      break;
    case GateMode::kHierarchical:
    case GateMode::kModalityOnly:
    case GateMode::kRegionOnly: {
      if (config_.gate_mode != GateMode::kRegionOnly)
        tree_.modality_gate = init_params(gate_in, options.hidden_dims, M,
                                          derive_seed(seed, kModalityGateStream));
      if (config_.gate_mode != GateMode::kModalityOnly) {
        tree_.region_gates.resize(M);
        for (int i = 0; i < M; ++i) {
          int dim = 0;
          for (int b : config_.modality_blocks[i]) dim += config_.blocks[b].in_dim;
          tree_.region_gates[i] = init_params(
              dim, options.hidden_dims,
              static_cast<int>(config_.modality_blocks[i].size()),
              derive_seed(seed, kRegionGateStream + static_cast<std::uint64_t>(i)));
        }
      }
      break;
    }
  }
  if (config_.gate_mode == GateMode::kModalityOnly) tree_.region_gates.resize(M);
  allocate_grads();
}

void MoeModel::allocate_grads() { grads_ = MoeGrads::zeros_like(config_, tree_); }

std::vector<ParamBlock> MoeModel::param_blocks() {
  std::vector<ParamBlock> out;
  for (int m = 0; m < config_.num_experts(); ++m)
    collect_net_blocks("expert" + std::to_string(m), config_.blocks[m].net,
                       grads_.experts[m], out);
  if (!tree_.modality_gate.empty())
    collect_net_blocks("gate.modality", tree_.modality_gate, grads_.modality_gate,
                       out);
  for (std::size_t i = 0; i < tree_.region_gates.size(); ++i)
    if (!tree_.region_gates[i].empty())
      collect_net_blocks("gate.region" + std::to_string(i), tree_.region_gates[i],
                         grads_.region_gates[i], out);
  if (!tree_.flat_gate.empty())
    collect_net_blocks("gate.flat", tree_.flat_gate, grads_.flat_gate, out);
  return out;
}

Prediction MoeModel::predict(const SubjectRecord& record) const {
  return fuse_predict(config_, tree_, record, nullptr);
}

std::vector<double> MoeModel::predict_probs(const SubjectRecord& record) const {
  return predict(record).class_probs;
}

namespace {

LossBreakdown moe_breakdown(const LossConfig& loss, const SubjectRecord& record,
                            const Prediction& pred) {
  LossBreakdown b;
  b.cross_entropy = weighted_ce(pred.class_probs, record.label, loss.class_weights);
  b.sparsity = gate_entropy(pred.gate.weights);
  b.diversity = diversity_penalty(pred.expert_logits, pred.gate.active_mask);
  b.total = b.cross_entropy + loss.lambda_sparsity * b.sparsity +
            loss.lambda_diversity * b.diversity;
  return b;
}

}  // namespace

LossBreakdown MoeModel::sample_loss(const SubjectRecord& record,
                                    const LossConfig& loss) const {
  return moe_breakdown(loss, record, predict(record));
}

LossBreakdown MoeModel::sample_grad(const SubjectRecord& record,
                                    const LossConfig& loss, double scale) {
  MoeCache cache;
  fuse_predict(config_, tree_, record, &cache);
  Prediction pred;
  pred.class_probs = cache.class_probs;
  pred.gate = cache.final_gate;
  pred.expert_logits = cache.expert_logits;
  const LossBreakdown breakdown = moe_breakdown(loss, record, pred);

  std::vector<double> grad_fused =
      ce_fused_gradient(cache.class_probs, record.label, loss.class_weights);
  for (double& g : grad_fused) g *= scale;

  std::vector<double> grad_gate;
  if (loss.lambda_sparsity != 0.0) {
    grad_gate = gate_entropy_grad(cache.final_gate.weights);
    for (double& g : grad_gate) g *= scale * loss.lambda_sparsity;
  }

  Matrix grad_logits;
  const Matrix* grad_logits_ptr = nullptr;
  if (loss.lambda_diversity != 0.0) {
    grad_logits = diversity_grad(cache.expert_logits, cache.final_gate.active_mask);
    for (double& g : grad_logits.data) g *= scale * loss.lambda_diversity;
    grad_logits_ptr = &grad_logits;
  }

  moe_backward(config_, tree_, cache, grad_fused, grad_gate, grad_logits_ptr,
               grads_);
  return breakdown;
}

ordered_json MoeModel::to_json() const {
  ordered_json j;
  j["gate_mode"] = gate_mode_name(config_.gate_mode);
  if (config_.top_k)
    j["top_k"] = *config_.top_k;
  else
    j["top_k"] = nullptr;
  j["num_classes"] = config_.num_classes;
  j["experts"] = ordered_json::array();
  for (const ExpertSlot& slot : config_.blocks) {
    ordered_json je;
    je["modality"] = slot.modality;
    je["region"] = slot.region;
    je["net"] = mlp_to_json(slot.net);
    j["experts"].push_back(std::move(je));
  }
  j["modality_gate"] =
      tree_.modality_gate.empty() ? ordered_json() : mlp_to_json(tree_.modality_gate);
  j["region_gates"] = ordered_json::array();
  for (const MlpParams& net : tree_.region_gates)
    j["region_gates"].push_back(net.empty() ? ordered_json() : mlp_to_json(net));
  j["flat_gate"] =
      tree_.flat_gate.empty() ? ordered_json() : mlp_to_json(tree_.flat_gate);
  return j;
}

std::unique_ptr<MoeModel> MoeModel::from_json(const FeatureSchema& schema,
                                              const nlohmann::json& j) {
  MoeModelOptions options;
  try {
    options.gate_mode = gate_mode_from_name(j.at("gate_mode").get<std::string>());
    if (j.contains("top_k") && !j["top_k"].is_null())
      options.top_k = j["top_k"].get<int>();
    options.num_classes = j.at("num_classes").get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("model bundle: malformed mixture document: ") + e.what());
  }

  std::unique_ptr<MoeModel> model(new MoeModel());
  model->config_ = moe_config_from_schema(schema, options);
  const auto& experts = j.at("experts");
  require(experts.size() == model->config_.blocks.size(),
          "model bundle: expert count does not match schema");
  for (std::size_t m = 0; m < model->config_.blocks.size(); ++m) {
    ExpertSlot& slot = model->config_.blocks[m];
    require(experts[m].at("modality").get<std::string>() == slot.modality &&
                experts[m].at("region").get<std::string>() == slot.region,
            "model bundle: expert order does not match schema");
    slot.net = mlp_from_json(experts[m].at("net"));
  }
  model->config_.finalize();

  const int M = model->config_.num_modalities();
  if (!j.at("modality_gate").is_null())
    model->tree_.modality_gate = mlp_from_json(j["modality_gate"]);
  model->tree_.region_gates.resize(M);
  const auto& region_gates = j.at("region_gates");
  if (!region_gates.empty()) {
    require(static_cast<int>(region_gates.size()) == M,
            "model bundle: region gate count does not match schema");
    for (int i = 0; i < M; ++i)
      if (!region_gates[i].is_null())
        model->tree_.region_gates[i] = mlp_from_json(region_gates[i]);
  }
  if (!j.at("flat_gate").is_null())
    model->tree_.flat_gate = mlp_from_json(j["flat_gate"]);

  // Mode-specific wiring must be complete.
  switch (model->config_.gate_mode) {
    case GateMode::kFlat:
      require(!model->tree_.flat_gate.empty(), "model bundle: missing flat gate");
      break;
    case GateMode::kModalityOnly:
      require(!model->tree_.modality_gate.empty(),
              "model bundle: missing modality gate");
      break;
    case GateMode::kRegionOnly:
      for (int i = 0; i < M; ++i)
        require(!model->tree_.region_gates[i].empty(),
                "model bundle: missing region gate");
      break;
    case GateMode::kHierarchical:
      require(!model->tree_.modality_gate.empty(),
              "model bundle: missing modality gate");
      for (int i = 0; i < M; ++i)
        require(!model->tree_.region_gates[i].empty(),
                "model bundle: missing region gate");
      break;
  }
  model->allocate_grads();
  return model;
}

}  // namespace mref
