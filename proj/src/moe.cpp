// SPDX-License-Identifier: Apache-2.0
#include "mref/moe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mref/common.hpp"

namespace mref {

std::string gate_mode_name(GateMode mode) {
  switch (mode) {
    case GateMode::kFlat: return "flat";
    case GateMode::kModalityOnly: return "modality";
    case GateMode::kRegionOnly: return "region";
    case GateMode::kHierarchical: return "hier";
  }
  fail("gate_mode_name: invalid mode");
}

GateMode gate_mode_from_name(const std::string& name) {
  if (name == "flat") return GateMode::kFlat;
  if (name == "modality") return GateMode::kModalityOnly;
  if (name == "region") return GateMode::kRegionOnly;
  if (name == "hier") return GateMode::kHierarchical;
  fail("unknown gate mode '" + name + "' (expected flat|hier|modality|region)");
}

int MoeConfig::feature_dim() const {
  int d = 0;
  for (const ExpertSlot& b : blocks) d += b.in_dim;
  return d;
}

void MoeConfig::finalize() {
  require(!blocks.empty(), "MoeConfig: at least one expert block required");
  require(num_classes >= 2, "MoeConfig: num_classes must be >= 2");

  modality_names.clear();
  block_modality.assign(blocks.size(), -1);
  block_region.assign(blocks.size(), -1);
  modality_blocks.clear();

  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const ExpertSlot& slot = blocks[b];
    require(slot.in_dim > 0, "MoeConfig: block " + std::to_string(b) +
                                 " has non-positive in_dim");
    auto it = std::find(modality_names.begin(), modality_names.end(), slot.modality);
    int mi;
    if (it == modality_names.end()) {
      mi = static_cast<int>(modality_names.size());
      modality_names.push_back(slot.modality);
      modality_blocks.emplace_back();
    } else {
      mi = static_cast<int>(it - modality_names.begin());
    }
    block_modality[b] = mi;
    block_region[b] = static_cast<int>(modality_blocks[mi].size());
    modality_blocks[mi].push_back(static_cast<int>(b));
  }

  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const ExpertSlot& slot = blocks[b];
    if (!slot.net.empty()) {
      require(slot.net.in_dim() == slot.in_dim,
              "MoeConfig: expert net in_dim mismatch in block '" + slot.modality +
                  "/" + slot.region + "'");
      require(slot.net.out_dim() == num_classes,
              "MoeConfig: expert net out_dim mismatch in block '" + slot.modality +
                  "/" + slot.region + "'");
    }
  }
  if (top_k) {
    require(*top_k >= 1 && *top_k <= num_experts(),
            "MoeConfig: top_k must be in [1, N]");
  }
}

GateOutput make_gate_output(std::vector<double> weights,
                            const std::vector<int>& regions_per_modality) {
  GateOutput g;
  g.weights = std::move(weights);
  g.active_mask.assign(g.weights.size(), 1);
  g.modality_weights.assign(regions_per_modality.size(), 0.0);
  g.region_weights.resize(regions_per_modality.size());
  std::size_t b = 0;
  for (std::size_t i = 0; i < regions_per_modality.size(); ++i) {
    double sum = 0.0;
    for (int r = 0; r < regions_per_modality[i]; ++r) sum += g.weights[b + r];
    g.modality_weights[i] = sum;
    g.region_weights[i].assign(regions_per_modality[i], 0.0);
    for (int r = 0; r < regions_per_modality[i]; ++r)
      g.region_weights[i][r] = sum > 0.0 ? g.weights[b + r] / sum : 0.0;
    b += regions_per_modality[i];
  }
  require(b == g.weights.size(),
          "make_gate_output: grouping does not cover all weights");
  return g;
}

namespace {

void rederive_summaries(GateOutput& g) {
  std::size_t b = 0;
  for (std::size_t i = 0; i < g.region_weights.size(); ++i) {
    const std::size_t R = g.region_weights[i].size();
    double sum = 0.0;
    for (std::size_t r = 0; r < R; ++r) sum += g.weights[b + r];
    g.modality_weights[i] = sum;
    for (std::size_t r = 0; r < R; ++r)
      g.region_weights[i][r] = sum > 0.0 ? g.weights[b + r] / sum : 0.0;
    b += R;
  }
}

}  // namespace

std::vector<double> gate_input_features(const MoeConfig& config,
                                        const SubjectRecord& record) {
  require(record.blocks.size() == config.blocks.size(),
          "gate_input_features: record block count mismatch");
  std::vector<double> out;
  out.reserve(config.feature_dim() + config.num_modalities());
  for (std::size_t b = 0; b < record.blocks.size(); ++b) {
    require(static_cast<int>(record.blocks[b].size()) == config.blocks[b].in_dim,
            "gate_input_features: block '" + config.blocks[b].modality + "/" +
                config.blocks[b].region + "' dim mismatch");
    out.insert(out.end(), record.blocks[b].begin(), record.blocks[b].end());
  }
  for (int m = 0; m < config.num_modalities(); ++m)
    out.push_back(record.available[m] ? 1.0 : 0.0);
  return out;
}

std::vector<double> modality_features(const MoeConfig& config,
                                      const SubjectRecord& record, int modality) {
  std::vector<double> out;
  for (int b : config.modality_blocks[modality])
    out.insert(out.end(), record.blocks[b].begin(), record.blocks[b].end());
  return out;
}

std::vector<std::uint8_t> expert_availability(const MoeConfig& config,
                                              const SubjectRecord& record) {
  require(static_cast<int>(record.available.size()) == config.num_modalities(),
          "expert_availability: record modality count mismatch");
  std::vector<std::uint8_t> out(config.num_experts());
  for (int b = 0; b < config.num_experts(); ++b)
    out[b] = record.available[config.block_modality[b]];
  return out;
}

Matrix expert_logits(const MoeConfig& config, const SubjectRecord& record,
                     std::vector<MlpCache>* caches) {
  const int N = config.num_experts();
  require(static_cast<int>(record.blocks.size()) == N,
          "expert_logits: record block count mismatch");
  Matrix h(N, config.num_classes);
  if (caches) caches->assign(N, {});
  for (int m = 0; m < N; ++m) {
    const ExpertSlot& slot = config.blocks[m];
    require(static_cast<int>(record.blocks[m].size()) == slot.in_dim,
            "expert_logits: block '" + slot.modality + "/" + slot.region +
                "' expected dim " + std::to_string(slot.in_dim) + ", got " +
                std::to_string(record.blocks[m].size()));
    std::vector<double> row =
        mlp_forward(slot.net, record.blocks[m], caches ? &(*caches)[m] : nullptr);
    std::copy(row.begin(), row.end(), h.row(m));
  }
  return h;
}

GateOutput gate_flat(const MoeConfig& config, const GateTree& tree,
                     const SubjectRecord& record, MoeCache* cache) {
  require(config.gate_mode == GateMode::kFlat, "gate_flat: gate_mode is not Flat");
  std::vector<double> input = gate_input_features(config, record);
  std::vector<double> z =
      mlp_forward(tree.flat_gate, input, cache ? &cache->flat_cache : nullptr);
  require(static_cast<int>(z.size()) == config.num_experts(),
          "gate_flat: flat gate out_dim != number of experts");
  std::vector<int> rpm(config.num_modalities());
  for (int i = 0; i < config.num_modalities(); ++i)
    rpm[i] = static_cast<int>(config.modality_blocks[i].size());
  GateOutput g = make_gate_output(stable_softmax(z), rpm);
  if (cache) cache->gate_input = std::move(input);
  return g;
}

GateOutput gate_hierarchical(const MoeConfig& config, const GateTree& tree,
                             const SubjectRecord& record, MoeCache* cache) {
  const GateMode mode = config.gate_mode;
  require(mode == GateMode::kHierarchical || mode == GateMode::kModalityOnly ||
              mode == GateMode::kRegionOnly,
          "gate_hierarchical: invalid gate_mode");
  const int M = config.num_modalities();
  const bool use_modality = mode != GateMode::kRegionOnly;
  const bool use_region = mode != GateMode::kModalityOnly;

  std::vector<double> p(M, 1.0 / M);
  if (use_modality) {
    std::vector<double> input = gate_input_features(config, record);
    std::vector<double> z = mlp_forward(tree.modality_gate, input,
                                        cache ? &cache->modality_cache : nullptr);
    require(static_cast<int>(z.size()) == M,
            "gate_hierarchical: modality gate out_dim != number of modalities");
    p = stable_softmax(z);
    if (cache) cache->gate_input = std::move(input);
  }

  std::vector<std::vector<double>> q(M);
  if (cache) cache->region_caches.assign(M, {});
  for (int i = 0; i < M; ++i) {
    const int R = static_cast<int>(config.modality_blocks[i].size());
    if (use_region) {
      std::vector<double> feats = modality_features(config, record, i);
      std::vector<double> z = mlp_forward(tree.region_gates[i], feats,
                                          cache ? &cache->region_caches[i] : nullptr);
      require(static_cast<int>(z.size()) == R,
              "gate_hierarchical: region gate out_dim mismatch for modality '" +
                  config.modality_names[i] + "'");
      q[i] = stable_softmax(z);
    } else {
      q[i].assign(R, 1.0 / R);
    }
  }

  GateOutput g;
  g.weights.assign(config.num_experts(), 0.0);
  g.active_mask.assign(config.num_experts(), 1);
  g.modality_weights = p;
  g.region_weights = q;
  for (int b = 0; b < config.num_experts(); ++b) {
    const int i = config.block_modality[b];
    const int r = config.block_region[b];
    g.weights[b] = p[i] * q[i][r];
  }
  return g;
}

GateOutput mask_renormalize(const GateOutput& gate,
                            const std::vector<std::uint8_t>& availability) {
  const int N = gate.num_experts();
  require(static_cast<int>(availability.size()) == N,
          "mask_renormalize: availability length mismatch");
  std::vector<std::uint8_t> mask(N);
  int n_active = 0;
  for (int m = 0; m < N; ++m) {
    mask[m] = availability[m] && gate.active_mask[m];
    n_active += mask[m];
  }
  require(n_active > 0, "no available experts");

  // Nothing to remove: already-masked entries all carry zero weight.
  bool removes_mass = false;
  for (int m = 0; m < N; ++m)
    if (!mask[m] && gate.weights[m] != 0.0) removes_mass = true;
  if (!removes_mass) {
    GateOutput out = gate;
    out.active_mask = std::move(mask);
    return out;
  }

  double denom = 0.0;
  for (int m = 0; m < N; ++m)
    if (mask[m]) denom += gate.weights[m];
  require(denom > 0.0, "mask_renormalize: surviving weights sum to zero");

  GateOutput out = gate;
  out.active_mask = std::move(mask);
  for (int m = 0; m < N; ++m)
    out.weights[m] = out.active_mask[m] ? gate.weights[m] / denom : 0.0;
  rederive_summaries(out);
  return out;
}

GateOutput topk_sparsify(const GateOutput& gate, int k) {
  const int N = gate.num_experts();
  require(k >= 1, "topk_sparsify: k must be >= 1");
  std::vector<int> active;
  for (int m = 0; m < N; ++m)
    if (gate.active_mask[m]) active.push_back(m);
  if (k >= static_cast<int>(active.size())) return gate;  // documented clamp

  // Largest weights first; stable sort keeps the lowest index on ties.
  std::stable_sort(active.begin(), active.end(), [&](int a, int b) {
    return gate.weights[a] > gate.weights[b];
  });
  std::vector<std::uint8_t> keep(N, 0);
  double denom = 0.0;
  for (int j = 0; j < k; ++j) {
    keep[active[j]] = 1;
    denom += gate.weights[active[j]];
  }
  require(denom > 0.0, "topk_sparsify: surviving weights sum to zero");

  GateOutput out = gate;
  for (int m = 0; m < N; ++m)
    out.weights[m] = keep[m] ? gate.weights[m] / denom : 0.0;
  rederive_summaries(out);
  return out;
}

Prediction fuse_predict(const MoeConfig& config, const GateTree& tree,
                        const SubjectRecord& record, MoeCache* cache) {
  MoeCache local;
  MoeCache& c = cache ? *cache : local;

  c.expert_logits = expert_logits(config, record, &c.expert_caches);
  c.pre_mask = config.gate_mode == GateMode::kFlat
                   ? gate_flat(config, tree, record, &c)
                   : gate_hierarchical(config, tree, record, &c);
  c.availability = expert_availability(config, record);

  c.post_mask = mask_renormalize(c.pre_mask, c.availability);
  c.mask_applied = false;
  for (int m = 0; m < config.num_experts(); ++m)
    if (!c.post_mask.active_mask[m] && c.pre_mask.weights[m] != 0.0)
      c.mask_applied = true;

  if (config.top_k) {
    c.final_gate = topk_sparsify(c.post_mask, *config.top_k);
    c.selection.assign(config.num_experts(), 0);
    c.topk_applied = false;
    for (int m = 0; m < config.num_experts(); ++m) {
      c.selection[m] = c.final_gate.weights[m] != 0.0;
      if (c.post_mask.weights[m] != 0.0 && c.final_gate.weights[m] == 0.0)
        c.topk_applied = true;
    }
  } else {
    c.final_gate = c.post_mask;
    c.selection.clear();
    c.topk_applied = false;
  }

  const int C = config.num_classes;
  c.fused_logits.assign(C, 0.0);
  for (int m = 0; m < config.num_experts(); ++m) {
    const double w = c.final_gate.weights[m];
    if (w == 0.0) continue;
    const double* hm = c.expert_logits.row(m);
    for (int j = 0; j < C; ++j) c.fused_logits[j] += w * hm[j];
  }
  c.class_probs = stable_softmax(c.fused_logits);

  Prediction pred;
  pred.class_probs = c.class_probs;
  pred.fused_logits = c.fused_logits;
  pred.gate = c.final_gate;
  pred.expert_logits = c.expert_logits;
  return pred;
}

MoeGrads MoeGrads::zeros_like(const MoeConfig& config, const GateTree& tree) {
  MoeGrads g;
  g.experts.reserve(config.blocks.size());
  for (const ExpertSlot& slot : config.blocks)
    g.experts.push_back(GradientBundle::zeros_like(slot.net));
  if (!tree.modality_gate.empty())
    g.modality_gate = GradientBundle::zeros_like(tree.modality_gate);
  g.region_gates.resize(tree.region_gates.size());
  for (std::size_t i = 0; i < tree.region_gates.size(); ++i)
    if (!tree.region_gates[i].empty())
      g.region_gates[i] = GradientBundle::zeros_like(tree.region_gates[i]);
  if (!tree.flat_gate.empty())
    g.flat_gate = GradientBundle::zeros_like(tree.flat_gate);
  return g;
}

void MoeGrads::set_zero() {
  for (auto& e : experts) e.set_zero();
  modality_gate.set_zero();
  for (auto& r : region_gates) r.set_zero();
  flat_gate.set_zero();
}

namespace {

bool all_zero(std::span<const double> v) {
  for (double x : v)
    if (x != 0.0) return false;
  return true;
}

}  // namespace

void moe_backward(const MoeConfig& config, const GateTree& tree,
                  const MoeCache& cache, std::span<const double> grad_fused_logits,
                  std::span<const double> grad_gate_weights,
                  const Matrix* grad_expert_logits, MoeGrads& out) {
  const int N = config.num_experts();
  const int C = config.num_classes;
  require(static_cast<int>(grad_fused_logits.size()) == C,
          "moe_backward: grad_fused_logits dim mismatch");
  require(grad_gate_weights.empty() ||
              static_cast<int>(grad_gate_weights.size()) == N,
          "moe_backward: grad_gate_weights dim mismatch");

  // d loss / d final gate weights: fusion term plus any direct term.
  std::vector<double> u2(N, 0.0);
  for (int m = 0; m < N; ++m) {
    const double* hm = cache.expert_logits.row(m);
    double acc = 0.0;
    for (int j = 0; j < C; ++j) acc += hm[j] * grad_fused_logits[j];
    u2[m] = acc;
    if (!grad_gate_weights.empty()) u2[m] += grad_gate_weights[m];
  }

  // Through top-k renormalization (selection frozen).
  std::vector<double> u1;
  if (cache.topk_applied) {
    double dot = 0.0;
    for (int m = 0; m < N; ++m) dot += u2[m] * cache.final_gate.weights[m];
    double denom = 0.0;
    for (int m = 0; m < N; ++m)
      if (cache.selection[m]) denom += cache.post_mask.weights[m];
    u1.assign(N, 0.0);
    for (int m = 0; m < N; ++m)
      if (cache.selection[m]) u1[m] = (u2[m] - dot) / denom;
  } else {
    u1 = u2;
  }

  // Through availability masking.
  std::vector<double> u0;
  if (cache.mask_applied) {
    double dot = 0.0;
    for (int m = 0; m < N; ++m) dot += u1[m] * cache.post_mask.weights[m];
    double denom = 0.0;
    for (int m = 0; m < N; ++m)
      if (cache.post_mask.active_mask[m]) denom += cache.pre_mask.weights[m];
    u0.assign(N, 0.0);
    for (int m = 0; m < N; ++m)
      if (cache.post_mask.active_mask[m]) u0[m] = (u1[m] - dot) / denom;
  } else {
    u0 = u1;
  }

  // Into the gate networks.
  const int M = config.num_modalities();
  switch (config.gate_mode) {
    case GateMode::kFlat: {
      std::vector<double> dz = softmax_backward(cache.pre_mask.weights, u0);
      if (!all_zero(dz))
        mlp_backward(tree.flat_gate, cache.flat_cache, dz, out.flat_gate);
      break;
    }
    case GateMode::kHierarchical: {
      const std::vector<double>& p = cache.pre_mask.modality_weights;
      std::vector<double> dp(M, 0.0);
      for (int b = 0; b < N; ++b) {
        const int i = config.block_modality[b];
        dp[i] += u0[b] * cache.pre_mask.region_weights[i][config.block_region[b]];
      }
      std::vector<double> dzp = softmax_backward(p, dp);
      if (!all_zero(dzp))
        mlp_backward(tree.modality_gate, cache.modality_cache, dzp,
                     out.modality_gate);
      for (int i = 0; i < M; ++i) {
        const auto& qi = cache.pre_mask.region_weights[i];
        std::vector<double> dq(qi.size(), 0.0);
        for (std::size_t r = 0; r < qi.size(); ++r)
          dq[r] = u0[config.modality_blocks[i][r]] * p[i];
        std::vector<double> dzq = softmax_backward(qi, dq);
        if (!all_zero(dzq))
          mlp_backward(tree.region_gates[i], cache.region_caches[i], dzq,
                       out.region_gates[i]);
      }
      break;
    }
    case GateMode::kModalityOnly: {
      const std::vector<double>& p = cache.pre_mask.modality_weights;
      std::vector<double> dp(M, 0.0);
      for (int b = 0; b < N; ++b) {
        const int i = config.block_modality[b];
        dp[i] += u0[b] / static_cast<double>(config.modality_blocks[i].size());
      }
      std::vector<double> dzp = softmax_backward(p, dp);
      if (!all_zero(dzp))
        mlp_backward(tree.modality_gate, cache.modality_cache, dzp,
                     out.modality_gate);
      break;
    }
    case GateMode::kRegionOnly: {
      for (int i = 0; i < M; ++i) {
        const auto& qi = cache.pre_mask.region_weights[i];
        std::vector<double> dq(qi.size(), 0.0);
        for (std::size_t r = 0; r < qi.size(); ++r)
          dq[r] = u0[config.modality_blocks[i][r]] / static_cast<double>(M);
        std::vector<double> dzq = softmax_backward(qi, dq);
        if (!all_zero(dzq))
          mlp_backward(tree.region_gates[i], cache.region_caches[i], dzq,
                       out.region_gates[i]);
      }
      break;
    }
  }

  // Into the experts: fusion path scaled by the final weight, plus any
  // direct logit gradient (diversity penalty).
  std::vector<double> row(C);
  for (int m = 0; m < N; ++m) {
    const double w = cache.final_gate.weights[m];
    bool nonzero = false;
    for (int j = 0; j < C; ++j) {
      row[j] = w * grad_fused_logits[j];
      if (grad_expert_logits) row[j] += grad_expert_logits->at(m, j);
      if (row[j] != 0.0) nonzero = true;
    }
    if (nonzero)
      mlp_backward(config.blocks[m].net, cache.expert_caches[m], row,
                   out.experts[m]);
  }
}

}  // namespace mref
