// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mref/data.hpp"
#include "mref/metrics.hpp"
#include "mref/moe_model.hpp"
#include "mref/train.hpp"

namespace mref {

enum class ModelKind { kMref, kConcat, kLate, kLogreg };

ModelKind model_kind_from_name(const std::string& name);
std::string model_kind_name(ModelKind kind);

struct ModelOptions {
  ModelKind kind = ModelKind::kMref;
  GateMode gate_mode = GateMode::kHierarchical;
  std::optional<int> top_k;
  std::vector<int> hidden_dims = {64, 32};
};

std::unique_ptr<TrainableModel> make_model(const FeatureSchema& schema,
                                           int num_classes,
                                           const ModelOptions& options,
                                           std::uint64_t seed);

struct ExperimentConfig {
  ModelOptions model;
  TrainConfig train;  // train.seed is overridden per fold with seed ^ fold
  double lambda_sparsity = 0.01;
  double lambda_diversity = 0.01;
  bool balanced_class_weights = true;
  int k_folds = 10;
  std::uint64_t seed = 0;
};

struct AttributionRow {
  std::string modality;
  std::string region;
  double mean_weight = 0.0;
};

/// Mean final gate weight per expert over every evaluated subject, plus
/// per-modality sums.
struct AttributionTable {
  std::vector<AttributionRow> experts;
  std::vector<AttributionRow> modalities;  // region left empty
};

struct SubjectGates {
  std::string id;
  int fold = -1;  // -1 outside cross-validation
  int label = -1;
  std::vector<double> weights;
};

struct CvResult {
  FoldSummary summary;
  std::vector<TrainTrace> traces;
  AttributionTable attribution;        // mixture model only
  std::vector<SubjectGates> gates;     // mixture model only
  std::vector<std::string> bundles;    // one JSON document per fold
  std::vector<std::uint64_t> input_checksums;  // normalized fold inputs
  FoldPlan plan;
};

CvResult run_cv(const Cohort& cohort, const ExperimentConfig& config);
CvResult run_cv_with_plan(const Cohort& cohort, const ExperimentConfig& config,
                          const FoldPlan& plan);

struct AblationMode {
  enum Kind { kFull, kDropModality, kOnlyModality, kTopK, kModalityGate, kRegionGate };
  Kind kind = kFull;
  std::string modality;  // Drop/Only
  int k = 0;             // TopK

  std::string label() const;
};

/// Parses full | drop:<modality> | only:<modality> | topk:<k> |
/// gate:modality | gate:region.
AblationMode ablation_mode_from_string(const std::string& text);

/// The layout mirrored by the combined ablation table: full run, one drop
/// per modality, top-1 and top-3 sparsity, and both single-level gates.
std::vector<AblationMode> default_ablation_modes(const FeatureSchema& schema);

struct AblationRow {
  std::string mode;
  FoldSummary summary;
};

/// Retrains every mode from scratch on a shared fold plan.
std::vector<AblationRow> run_ablation(const Cohort& cohort,
                                      const ExperimentConfig& config,
                                      const std::vector<AblationMode>& modes);

/// Cohort restricted to the named modalities; subjects left without any
/// available modality are dropped. kept_indices maps reduced records back to
/// positions in the source cohort.
Cohort reduce_to_modalities(const Cohort& cohort,
                            const std::vector<std::string>& keep,
                            std::vector<int>* kept_indices = nullptr);

std::string bundle_to_json_text(const TrainableModel& model,
                                const FeatureSchema& schema,
                                const std::vector<std::string>& class_names,
                                const NormStats& stats);

struct LoadedBundle {
  std::unique_ptr<TrainableModel> model;
  FeatureSchema schema;
  NormStats stats;
  std::vector<std::string> class_names;
};

LoadedBundle load_bundle(const std::string& path);

struct ExplainResult {
  AttributionTable attribution;
  std::vector<SubjectGates> gates;
};

/// Per-subject final gate weights of a trained mixture bundle on a cohort
/// normalized with the bundle's stored statistics.
ExplainResult explain(const LoadedBundle& bundle, const Cohort& cohort);

AttributionTable attribution_from_gates(const MoeConfig& config,
                                        const std::vector<SubjectGates>& gates);

// --- report writers (deterministic byte-for-byte under a fixed seed) ---

std::string metrics_csv_text(const FoldSummary& summary);
std::string metrics_json_text(const FoldSummary& summary);
std::string attribution_csv_text(const AttributionTable& table);
std::string gates_csv_text(const MoeConfig& config,
                           const std::vector<SubjectGates>& gates,
                           const std::vector<std::string>& class_names);
std::string trace_csv_text(const TrainTrace& trace);
std::string ablation_csv_text(const std::vector<AblationRow>& rows);

std::string default_run_id(const std::string& command,
                           const ExperimentConfig& config);

/// Writes metrics.csv/.json, traces/fold_i.csv, models/fold_i.json,
/// attribution.csv + gates_per_subject.csv (mixture only), manifest.json.
void write_cv_outputs(const std::string& run_dir, const CvResult& result,
                      const ExperimentConfig& config, const Cohort& cohort);

void write_ablation_outputs(const std::string& run_dir,
                            const std::vector<AblationRow>& rows,
                            const ExperimentConfig& config, const Cohort& cohort);

}  // namespace mref
