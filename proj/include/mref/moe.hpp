// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mref/nn.hpp"
#include "mref/record.hpp"

namespace mref {

enum class GateMode { kFlat, kModalityOnly, kRegionOnly, kHierarchical };

std::string gate_mode_name(GateMode mode);
GateMode gate_mode_from_name(const std::string& name);

/// One expert: a (modality, region) feature block and its classifier net.
struct ExpertSlot {
  std::string modality;
  std::string region;
  int in_dim = 0;
  MlpParams net;
};

struct MoeConfig {
  int num_classes = 0;
  std::vector<ExpertSlot> blocks;
  GateMode gate_mode = GateMode::kHierarchical;
  std::optional<int> top_k;

  // Derived by finalize().
  std::vector<std::string> modality_names;
  std::vector<int> block_modality;               // modality index per block
  std::vector<int> block_region;                 // region index within modality
  std::vector<std::vector<int>> modality_blocks; // block indices per modality

  int num_experts() const { return static_cast<int>(blocks.size()); }
  int num_modalities() const { return static_cast<int>(modality_names.size()); }
  int feature_dim() const;  // sum of block dims

  /// Builds the modality/region index maps and checks invariants.
  void finalize();
};

/// Gate parameter sets. Only the nets required by the gate mode are
/// allocated; the others stay empty.
struct GateTree {
  MlpParams modality_gate;               // in: features + flags, out: #modalities
  std::vector<MlpParams> region_gates;   // per modality; out: #regions in it
  MlpParams flat_gate;                   // out: N; used in Flat mode
};

/// Fusion weights over experts plus per-level summaries. region_weights[i]
/// holds the within-modality distribution, so its shape doubles as the
/// block -> (modality, region) layout for mask_renormalize/topk_sparsify.
struct GateOutput {
  std::vector<double> weights;                      // g, length N
  std::vector<double> modality_weights;             // length M
  std::vector<std::vector<double>> region_weights;  // per modality
  std::vector<std::uint8_t> active_mask;            // length N

  int num_experts() const { return static_cast<int>(weights.size()); }
};

/// Builds a GateOutput from raw expert weights and a modality-major grouping
/// (number of regions per modality). Summaries are derived from the weights.
GateOutput make_gate_output(std::vector<double> weights,
                            const std::vector<int>& regions_per_modality);

struct Prediction {
  std::vector<double> class_probs;
  std::vector<double> fused_logits;
  GateOutput gate;       // final weights: post-mask, post-top-k
  Matrix expert_logits;  // N x C
};

/// Forward trace of fuse_predict, consumed by moe_backward.
struct MoeCache {
  std::vector<MlpCache> expert_caches;
  MlpCache flat_cache;
  MlpCache modality_cache;
  std::vector<MlpCache> region_caches;
  std::vector<double> gate_input;       // features + availability flags
  GateOutput pre_mask;                  // gate before masking
  GateOutput post_mask;                 // after availability masking
  GateOutput final_gate;                // after top-k
  std::vector<std::uint8_t> availability;   // per expert
  std::vector<std::uint8_t> selection;      // top-k survivors (when applied)
  bool mask_applied = false;
  bool topk_applied = false;
  Matrix expert_logits;
  std::vector<double> fused_logits;
  std::vector<double> class_probs;
};

/// Concatenated normalized features of all blocks followed by one 0/1
/// availability flag per modality. Input of the modality/flat gates and of
/// the concatenation baseline.
std::vector<double> gate_input_features(const MoeConfig& config,
                                        const SubjectRecord& record);

/// Concatenated features of one modality's blocks (region gate input).
std::vector<double> modality_features(const MoeConfig& config,
                                      const SubjectRecord& record, int modality);

/// Expands the record's per-modality availability to one flag per expert.
std::vector<std::uint8_t> expert_availability(const MoeConfig& config,
                                              const SubjectRecord& record);

/// Row m = blocks[m].net forward on the record's m-th block. Rows of
/// unavailable blocks are computed on the zero placeholders and become
/// zero-weighted later.
Matrix expert_logits(const MoeConfig& config, const SubjectRecord& record,
                     std::vector<MlpCache>* caches = nullptr);

GateOutput gate_flat(const MoeConfig& config, const GateTree& tree,
                     const SubjectRecord& record, MoeCache* cache = nullptr);

/// Hierarchical: g_m = p_mod(modality) * p_reg(region | modality).
/// ModalityOnly spreads each modality weight uniformly over its regions;
/// RegionOnly spreads uniformly over modalities. All modes sum to one.
GateOutput gate_hierarchical(const MoeConfig& config, const GateTree& tree,
                             const SubjectRecord& record, MoeCache* cache = nullptr);

/// Zeroes unavailable experts and renormalizes the survivors. When every
/// expert is available the input is returned unchanged bit-for-bit.
/// Throws when no expert is available.
GateOutput mask_renormalize(const GateOutput& gate,
                            const std::vector<std::uint8_t>& availability);

/// Keeps the k largest active weights (ties broken by lowest expert index)
/// and renormalizes. k >= number of active experts keeps all (clamp) and
/// returns the input unchanged bit-for-bit.
GateOutput topk_sparsify(const GateOutput& gate, int k);

/// Full forward: experts, gate, masking, optional top-k, logit fusion.
Prediction fuse_predict(const MoeConfig& config, const GateTree& tree,
                        const SubjectRecord& record, MoeCache* cache = nullptr);

struct MoeGrads {
  std::vector<GradientBundle> experts;
  GradientBundle modality_gate;
  std::vector<GradientBundle> region_gates;
  GradientBundle flat_gate;

  static MoeGrads zeros_like(const MoeConfig& config, const GateTree& tree);
  void set_zero();
};

/// Exact reverse-mode pass through fusion, top-k (frozen selection), masking,
/// gate softmaxes/products and the expert MLPs. Adds into `out`.
/// grad_gate_weights (d loss / d final gate weights, e.g. from the entropy
/// penalty) may be empty; grad_expert_logits (e.g. from the diversity
/// penalty) may be null.
void moe_backward(const MoeConfig& config, const GateTree& tree,
                  const MoeCache& cache, std::span<const double> grad_fused_logits,
                  std::span<const double> grad_gate_weights,
                  const Matrix* grad_expert_logits, MoeGrads& out);

}  // namespace mref
