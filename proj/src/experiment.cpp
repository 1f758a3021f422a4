// SPDX-License-Identifier: Apache-2.0
#include "mref/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mref/baselines.hpp"
#include "mref/common.hpp"

namespace mref {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open for writing: " + path.string());
  out << text;
  require(out.good(), "write failed: " + path.string());
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const MoeModel* as_moe(const TrainableModel& model) {
  return dynamic_cast<const MoeModel*>(&model);
}

/// Checksum of the normalized feature state the model actually sees:
/// every train row then every test row, blocks concatenated, with the
/// availability flags appended per row.
std::uint64_t fold_input_checksum(const std::vector<SubjectRecord>& records,
                                  const std::vector<int>& train_idx,
                                  const std::vector<int>& test_idx) {
  std::vector<double> flat;
  auto append = [&](int i) {
    const SubjectRecord& r = records[i];
    for (const auto& block : r.blocks)
      flat.insert(flat.end(), block.begin(), block.end());
    for (std::uint8_t a : r.available) flat.push_back(a ? 1.0 : 0.0);
  };
  for (int i : train_idx) append(i);
  for (int i : test_idx) append(i);
  return checksum_doubles(flat.data(), flat.size());
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "mref") return ModelKind::kMref;
  if (name == "concat") return ModelKind::kConcat;
  if (name == "late") return ModelKind::kLate;
  if (name == "logreg") return ModelKind::kLogreg;
  fail("unknown model kind: " + name);
}

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kMref: return "mref";
    case ModelKind::kConcat: return "concat";
    case ModelKind::kLate: return "late";
    case ModelKind::kLogreg: return "logreg";
  }
  fail("invalid model kind");
}

std::unique_ptr<TrainableModel> make_model(const FeatureSchema& schema,
                                           int num_classes,
                                           const ModelOptions& options,
                                           std::uint64_t seed) {
  switch (options.kind) {
    case ModelKind::kMref: {
      MoeModelOptions moe;
      moe.num_classes = num_classes;
      moe.gate_mode = options.gate_mode;
      moe.top_k = options.top_k;
      moe.hidden_dims = options.hidden_dims;
      return std::make_unique<MoeModel>(schema, moe, seed);
    }
    case ModelKind::kConcat:
      return std::make_unique<ConcatModel>(schema, num_classes,
                                           options.hidden_dims, seed);
    case ModelKind::kLate:
      return std::make_unique<LateFusionModel>(schema, num_classes,
                                               options.hidden_dims, seed);
    case ModelKind::kLogreg:
      return std::make_unique<LogisticRegressionModel>(schema, num_classes);
  }
  fail("invalid model kind");
}

CvResult run_cv(const Cohort& cohort, const ExperimentConfig& config) {
  FoldPlan plan = stratified_kfold(cohort.records, config.k_folds, config.seed);
  return run_cv_with_plan(cohort, config, plan);
}

CvResult run_cv_with_plan(const Cohort& cohort, const ExperimentConfig& config,
                          const FoldPlan& plan) {
  require(!cohort.records.empty(), "empty cohort");
  require(plan.assignment.size() == cohort.records.size(),
          "fold plan does not match cohort size");

  CvResult result;
  result.plan = plan;
  std::vector<EvalResult> fold_evals;

  MoeConfig gate_layout;  // for column naming; filled on the first mixture fold
  bool have_layout = false;

  for (int fold = 0; fold < plan.k; ++fold) {
    std::vector<int> train_idx = plan.train_indices(fold);
    std::vector<int> test_idx = plan.test_indices(fold);
    require(!train_idx.empty() && !test_idx.empty(),
            "fold " + std::to_string(fold) + " has an empty split");

    // Normalization is fitted on the fold's training rows alone and then
    // applied to a copy of the whole cohort.
    NormStats stats = zscore_fit(cohort.records, train_idx, cohort.schema);
    std::vector<SubjectRecord> records = cohort.records;
    zscore_apply(records, cohort.schema, stats);

    result.input_checksums.push_back(
        fold_input_checksum(records, train_idx, test_idx));

    LossConfig loss;
    if (config.model.kind == ModelKind::kMref) {
      loss.lambda_sparsity = config.lambda_sparsity;
      loss.lambda_diversity = config.lambda_diversity;
    }
    if (config.balanced_class_weights) {
      loss.class_weights = class_weights_from_counts(
          label_counts(records, train_idx, cohort.num_classes));
    }

    const std::uint64_t fold_seed = config.seed ^ static_cast<std::uint64_t>(fold);
    std::unique_ptr<TrainableModel> model =
        make_model(cohort.schema, cohort.num_classes, config.model, fold_seed);

    TrainConfig train = config.train;
    train.seed = fold_seed;
    result.traces.push_back(train_model(*model, records, train_idx, loss, train));

    Matrix scores(static_cast<int>(test_idx.size()), cohort.num_classes);
    std::vector<int> labels(test_idx.size());
    for (std::size_t i = 0; i < test_idx.size(); ++i) {
      const SubjectRecord& rec = records[test_idx[i]];
      std::vector<double> probs = model->predict_probs(rec);
      std::copy(probs.begin(), probs.end(), scores.row(static_cast<int>(i)));
      labels[i] = rec.label;
    }
    fold_evals.push_back(evaluate(scores, labels, cohort.num_classes));

    if (const MoeModel* moe = as_moe(*model)) {
      if (!have_layout) {
        gate_layout = moe->config();
        have_layout = true;
      }
      for (int idx : test_idx) {
        Prediction pred = moe->predict(records[idx]);
        SubjectGates g;
        g.id = records[idx].id;
        g.fold = fold;
        g.label = records[idx].label;
        g.weights = std::move(pred.gate.weights);
        result.gates.push_back(std::move(g));
      }
    }

    result.bundles.push_back(
        bundle_to_json_text(*model, cohort.schema, cohort.class_names, stats));
  }

  result.summary = summarize_folds(fold_evals);
  if (have_layout)
    result.attribution = attribution_from_gates(gate_layout, result.gates);
  return result;
}

AttributionTable attribution_from_gates(const MoeConfig& config,
                                        const std::vector<SubjectGates>& gates) {
  require(!gates.empty(), "no gate records to aggregate");
  const int n_experts = config.num_experts();
  std::vector<double> sums(n_experts, 0.0);
  for (const SubjectGates& g : gates) {
    require(static_cast<int>(g.weights.size()) == n_experts,
            "gate record length does not match expert count");
    for (int m = 0; m < n_experts; ++m) sums[m] += g.weights[m];
  }

  AttributionTable table;
  const double inv_n = 1.0 / static_cast<double>(gates.size());
  std::vector<double> modality_sums(config.num_modalities(), 0.0);
  for (int m = 0; m < n_experts; ++m) {
    AttributionRow row;
    row.modality = config.blocks[m].modality;
    row.region = config.blocks[m].region;
    row.mean_weight = sums[m] * inv_n;
    modality_sums[config.block_modality[m]] += sums[m];
    table.experts.push_back(std::move(row));
  }
  for (int i = 0; i < config.num_modalities(); ++i) {
    AttributionRow row;
    row.modality = config.modality_names[i];
    row.mean_weight = modality_sums[i] * inv_n;
    table.modalities.push_back(std::move(row));
  }
  return table;
}

std::string AblationMode::label() const {
  switch (kind) {
    case kFull: return "full";
    case kDropModality: return "drop:" + modality;
    case kOnlyModality: return "only:" + modality;
    case kTopK: return "topk:" + std::to_string(k);
    case kModalityGate: return "gate:modality";
    case kRegionGate: return "gate:region";
  }
  fail("invalid ablation mode");
}

AblationMode ablation_mode_from_string(const std::string& text) {
  AblationMode mode;
  if (text == "full") {
    mode.kind = AblationMode::kFull;
    return mode;
  }
  if (text == "gate:modality") {
    mode.kind = AblationMode::kModalityGate;
    return mode;
  }
  if (text == "gate:region") {
    mode.kind = AblationMode::kRegionGate;
    return mode;
  }
  auto colon = text.find(':');
  require(colon != std::string::npos && colon + 1 < text.size(),
          "unknown ablation mode: " + text);
  const std::string head = text.substr(0, colon);
  const std::string tail = text.substr(colon + 1);
  if (head == "drop") {
    mode.kind = AblationMode::kDropModality;
    mode.modality = tail;
    return mode;
  }
  if (head == "only") {
    mode.kind = AblationMode::kOnlyModality;
    mode.modality = tail;
    return mode;
  }
  if (head == "topk") {
    mode.kind = AblationMode::kTopK;
    char* end = nullptr;
    long k = std::strtol(tail.c_str(), &end, 10);
    require(end && *end == '\0' && k >= 1, "invalid top-k value: " + tail);
    mode.k = static_cast<int>(k);
    return mode;
  }
  fail("unknown ablation mode: " + text);
}

std::vector<AblationMode> default_ablation_modes(const FeatureSchema& schema) {
  std::vector<AblationMode> modes;
  modes.push_back(ablation_mode_from_string("full"));
  for (const ModalitySpec& m : schema.modalities)
    modes.push_back(ablation_mode_from_string("drop:" + m.name));
  modes.push_back(ablation_mode_from_string("topk:1"));
  modes.push_back(ablation_mode_from_string("topk:3"));
  modes.push_back(ablation_mode_from_string("gate:modality"));
  modes.push_back(ablation_mode_from_string("gate:region"));
  return modes;
}

Cohort reduce_to_modalities(const Cohort& cohort,
                            const std::vector<std::string>& keep,
                            std::vector<int>* kept_indices) {
  std::set<std::string> keep_set(keep.begin(), keep.end());
  Cohort reduced;
  reduced.class_names = cohort.class_names;
  reduced.num_classes = cohort.num_classes;
  reduced.schema.label_column = cohort.schema.label_column;
  reduced.schema.id_column = cohort.schema.id_column;

  std::vector<int> kept_modalities;
  for (std::size_t i = 0; i < cohort.schema.modalities.size(); ++i) {
    if (keep_set.count(cohort.schema.modalities[i].name)) {
      reduced.schema.modalities.push_back(cohort.schema.modalities[i]);
      kept_modalities.push_back(static_cast<int>(i));
      keep_set.erase(cohort.schema.modalities[i].name);
    }
  }
  for (const std::string& name : keep_set)
    fail("modality not in schema: " + name);
  require(!reduced.schema.modalities.empty(), "no modalities left");

  const BlockLayout layout = build_layout(cohort.schema);
  if (kept_indices) kept_indices->clear();
  for (std::size_t r = 0; r < cohort.records.size(); ++r) {
    const SubjectRecord& rec = cohort.records[r];
    SubjectRecord out;
    out.id = rec.id;
    out.label = rec.label;
    bool any = false;
    for (int mi : kept_modalities) {
      for (int b : layout.modality_blocks[mi]) out.blocks.push_back(rec.blocks[b]);
      out.available.push_back(rec.available[mi]);
      any = any || rec.available[mi];
    }
    if (!any) continue;  // subject has nothing left to classify with
    reduced.records.push_back(std::move(out));
    if (kept_indices) kept_indices->push_back(static_cast<int>(r));
  }
  require(!reduced.records.empty(), "no subjects left after modality reduction");
  return reduced;
}

namespace {

/// Fold plan for a reduced cohort: reuse the base assignment of the kept
/// subjects so every mode evaluates the same subject partition.
FoldPlan restrict_plan(const FoldPlan& base, const std::vector<int>& kept) {
  FoldPlan plan;
  plan.k = base.k;
  plan.seed = base.seed;
  plan.assignment.reserve(kept.size());
  for (int i : kept) plan.assignment.push_back(base.assignment[i]);
  return plan;
}

}  // namespace

std::vector<AblationRow> run_ablation(const Cohort& cohort,
                                      const ExperimentConfig& config,
                                      const std::vector<AblationMode>& modes) {
  require(!modes.empty(), "no ablation modes requested");
  FoldPlan base_plan =
      stratified_kfold(cohort.records, config.k_folds, config.seed);

  std::vector<AblationRow> rows;
  for (const AblationMode& mode : modes) {
    ExperimentConfig mode_config = config;
    const Cohort* data = &cohort;
    Cohort reduced;
    FoldPlan plan = base_plan;

    switch (mode.kind) {
      case AblationMode::kFull:
        break;
      case AblationMode::kDropModality:
      case AblationMode::kOnlyModality: {
        std::vector<std::string> keep;
        bool found = false;
        for (const ModalitySpec& m : cohort.schema.modalities) {
          const bool is_target = (m.name == mode.modality);
          found = found || is_target;
          if (mode.kind == AblationMode::kDropModality ? !is_target : is_target)
            keep.push_back(m.name);
        }
        require(found, "modality not in schema: " + mode.modality);
        std::vector<int> kept_subjects;
        reduced = reduce_to_modalities(cohort, keep, &kept_subjects);
        plan = restrict_plan(base_plan, kept_subjects);
        data = &reduced;
        break;
      }
      case AblationMode::kTopK:
        require(config.model.kind == ModelKind::kMref,
                "top-k ablation needs the mixture model");
        mode_config.model.top_k = mode.k;
        break;
      case AblationMode::kModalityGate:
        require(config.model.kind == ModelKind::kMref,
                "gate ablation needs the mixture model");
        mode_config.model.gate_mode = GateMode::kModalityOnly;
        break;
      case AblationMode::kRegionGate:
        require(config.model.kind == ModelKind::kMref,
                "gate ablation needs the mixture model");
        mode_config.model.gate_mode = GateMode::kRegionOnly;
        break;
    }

    CvResult cv = run_cv_with_plan(*data, mode_config, plan);
    AblationRow row;
    row.mode = mode.label();
    row.summary = cv.summary;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string bundle_to_json_text(const TrainableModel& model,
                                const FeatureSchema& schema,
                                const std::vector<std::string>& class_names,
                                const NormStats& stats) {
  ordered_json j;
  j["schema_version"] = 1;
  j["kind"] = model.kind();
  j["class_names"] = class_names;
  j["schema"] = json::parse(schema_to_json(schema));
  j["norm_stats"] = {{"mean", stats.mean}, {"std", stats.std_dev}};
  j["model"] = model.to_json();
  return j.dump(2) + "\n";
}

LoadedBundle load_bundle(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    fail("invalid bundle JSON in " + path + ": " + e.what());
  }
  require(j.value("schema_version", 0) == 1, "unsupported bundle version");

  LoadedBundle bundle;
  bundle.schema = schema_from_json(j.at("schema").dump());
  bundle.class_names = j.at("class_names").get<std::vector<std::string>>();
  bundle.stats.mean = j.at("norm_stats").at("mean").get<std::vector<double>>();
  bundle.stats.std_dev = j.at("norm_stats").at("std").get<std::vector<double>>();
  const BlockLayout layout = build_layout(bundle.schema);
  require(static_cast<int>(bundle.stats.mean.size()) == layout.total_columns &&
              bundle.stats.mean.size() == bundle.stats.std_dev.size(),
          "norm_stats length does not match schema");

  const std::string kind = j.at("kind").get<std::string>();
  const json& m = j.at("model");
  if (kind == "mref") {
    bundle.model = MoeModel::from_json(bundle.schema, m);
  } else if (kind == "concat") {
    bundle.model = ConcatModel::from_json(bundle.schema, m);
  } else if (kind == "late") {
    bundle.model = LateFusionModel::from_json(bundle.schema, m);
  } else if (kind == "logreg") {
    bundle.model = LogisticRegressionModel::from_json(bundle.schema, m);
  } else {
    fail("unknown model kind in bundle: " + kind);
  }
  return bundle;
}

ExplainResult explain(const LoadedBundle& bundle, const Cohort& cohort) {
  const MoeModel* moe = as_moe(*bundle.model);
  require(moe != nullptr, "gate attribution needs a mixture bundle");
  require(schema_to_json(bundle.schema) == schema_to_json(cohort.schema),
          "cohort schema does not match the bundle schema");

  std::vector<SubjectRecord> records = cohort.records;
  zscore_apply(records, cohort.schema, bundle.stats);

  ExplainResult result;
  for (const SubjectRecord& rec : records) {
    Prediction pred = moe->predict(rec);
    SubjectGates g;
    g.id = rec.id;
    g.fold = -1;
    g.label = rec.label;
    g.weights = std::move(pred.gate.weights);
    result.gates.push_back(std::move(g));
  }
  result.attribution = attribution_from_gates(moe->config(), result.gates);
  return result;
}

std::string metrics_csv_text(const FoldSummary& summary) {
  std::ostringstream out;
  out << "fold,auroc_macro,accuracy,f1_macro\n";
  for (std::size_t i = 0; i < summary.per_fold.size(); ++i) {
    const EvalResult& r = summary.per_fold[i];
    out << i << ',' << fmt_g17(r.auroc_macro) << ',' << fmt_g17(r.accuracy)
        << ',' << fmt_g17(r.f1_macro) << '\n';
  }
  out << "mean," << fmt_g17(summary.auroc_mean) << ','
      << fmt_g17(summary.accuracy_mean) << ',' << fmt_g17(summary.f1_mean)
      << '\n';
  out << "sd," << fmt_g17(summary.auroc_sd) << ','
      << fmt_g17(summary.accuracy_sd) << ',' << fmt_g17(summary.f1_sd) << '\n';
  return out.str();
}

std::string metrics_json_text(const FoldSummary& summary) {
  ordered_json folds = ordered_json::array();
  for (const EvalResult& r : summary.per_fold) {
    folds.push_back({{"auroc_macro", r.auroc_macro},
                     {"accuracy", r.accuracy},
                     {"f1_macro", r.f1_macro},
                     {"confusion", r.confusion}});
  }
  ordered_json j;
  j["folds"] = folds;
  j["mean"] = {{"auroc_macro", summary.auroc_mean},
               {"accuracy", summary.accuracy_mean},
               {"f1_macro", summary.f1_mean}};
  j["sd"] = {{"auroc_macro", summary.auroc_sd},
             {"accuracy", summary.accuracy_sd},
             {"f1_macro", summary.f1_sd}};
  return j.dump(2) + "\n";
}

std::string attribution_csv_text(const AttributionTable& table) {
  std::ostringstream out;
  out << "kind,modality,region,mean_weight\n";
  for (const AttributionRow& r : table.experts)
    out << "expert," << csv_escape(r.modality) << ',' << csv_escape(r.region)
        << ',' << fmt_g17(r.mean_weight) << '\n';
  for (const AttributionRow& r : table.modalities)
    out << "modality," << csv_escape(r.modality) << ",,"
        << fmt_g17(r.mean_weight) << '\n';
  return out.str();
}

std::string gates_csv_text(const MoeConfig& config,
                           const std::vector<SubjectGates>& gates,
                           const std::vector<std::string>& class_names) {
  std::ostringstream out;
  out << "id,fold,label";
  for (const ExpertSlot& b : config.blocks)
    out << ',' << csv_escape(b.modality + "/" + b.region);
  out << '\n';
  for (const SubjectGates& g : gates) {
    require(static_cast<int>(g.weights.size()) == config.num_experts(),
            "gate record length does not match expert count");
    out << csv_escape(g.id) << ',' << g.fold << ',';
    if (g.label >= 0 && g.label < static_cast<int>(class_names.size()))
      out << csv_escape(class_names[g.label]);
    for (double w : g.weights) out << ',' << fmt_g17(w);
    out << '\n';
  }
  return out.str();
}

std::string trace_csv_text(const TrainTrace& trace) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < trace.train_loss.size(); ++e) {
    out << (e + 1) << ',' << fmt_g17(trace.train_loss[e]) << ',';
    if (e < trace.val_loss.size()) out << fmt_g17(trace.val_loss[e]);
    out << '\n';
  }
  return out.str();
}

std::string ablation_csv_text(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "mode,auroc_mean,auroc_sd,accuracy_mean,accuracy_sd,f1_mean,f1_sd\n";
  for (const AblationRow& r : rows) {
    out << csv_escape(r.mode) << ',' << fmt_g17(r.summary.auroc_mean) << ','
        << fmt_g17(r.summary.auroc_sd) << ',' << fmt_g17(r.summary.accuracy_mean)
        << ',' << fmt_g17(r.summary.accuracy_sd) << ','
        << fmt_g17(r.summary.f1_mean) << ',' << fmt_g17(r.summary.f1_sd) << '\n';
  }
  return out.str();
}

std::string default_run_id(const std::string& command,
                           const ExperimentConfig& config) {
  return command + "-" + model_kind_name(config.model.kind) + "-seed" +
         std::to_string(config.seed);
}

namespace {

ordered_json config_to_json(const ExperimentConfig& config) {
  ordered_json j;
  j["model"] = model_kind_name(config.model.kind);
  j["gate_mode"] = gate_mode_name(config.model.gate_mode);
  if (config.model.top_k)
    j["top_k"] = *config.model.top_k;
  else
    j["top_k"] = nullptr;
  j["hidden_dims"] = config.model.hidden_dims;
  j["lambda_sparsity"] = config.lambda_sparsity;
  j["lambda_diversity"] = config.lambda_diversity;
  j["class_weighting"] = config.balanced_class_weights ? "balanced" : "none";
  j["k_folds"] = config.k_folds;
  j["seed"] = config.seed;
  j["max_epochs"] = config.train.max_epochs;
  j["patience"] = config.train.patience;
  j["batch_size"] = config.train.batch_size;
  j["val_fraction"] = config.train.val_fraction;
  j["lr"] = config.train.optim.lr;
  j["weight_decay"] = config.train.optim.weight_decay;
  return j;
}

ordered_json cohort_to_json(const Cohort& cohort) {
  ordered_json j;
  j["subjects"] = cohort.records.size();
  j["classes"] = cohort.class_names;
  std::vector<int> all(cohort.records.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  j["class_counts"] = label_counts(cohort.records, all, cohort.num_classes);
  return j;
}

}  // namespace

void write_cv_outputs(const std::string& run_dir, const CvResult& result,
                      const ExperimentConfig& config, const Cohort& cohort) {
  const fs::path dir(run_dir);
  fs::create_directories(dir / "models");
  fs::create_directories(dir / "traces");

  write_text_file(dir / "metrics.csv", metrics_csv_text(result.summary));
  write_text_file(dir / "metrics.json", metrics_json_text(result.summary));

  for (std::size_t i = 0; i < result.traces.size(); ++i)
    write_text_file(dir / "traces" / ("fold_" + std::to_string(i) + ".csv"),
                    trace_csv_text(result.traces[i]));
  for (std::size_t i = 0; i < result.bundles.size(); ++i)
    write_text_file(dir / "models" / ("fold_" + std::to_string(i) + ".json"),
                    result.bundles[i]);

  if (!result.gates.empty()) {
    MoeModelOptions options;
    options.num_classes = cohort.num_classes;
    options.gate_mode = config.model.gate_mode;
    options.top_k = config.model.top_k;
    const MoeConfig layout = moe_config_from_schema(cohort.schema, options);
    write_text_file(dir / "attribution.csv",
                    attribution_csv_text(result.attribution));
    write_text_file(dir / "gates_per_subject.csv",
                    gates_csv_text(layout, result.gates, cohort.class_names));
  }

  ordered_json manifest;
  manifest["schema_version"] = 1;
  manifest["command"] = "cv";
  manifest["config"] = config_to_json(config);
  manifest["cohort"] = cohort_to_json(cohort);
  manifest["fold_input_checksums"] = ordered_json::array();
  for (std::uint64_t c : result.input_checksums)
    manifest["fold_input_checksums"].push_back(c);
  manifest["metrics"] = {{"auroc_mean", result.summary.auroc_mean},
                         {"auroc_sd", result.summary.auroc_sd},
                         {"accuracy_mean", result.summary.accuracy_mean},
                         {"f1_mean", result.summary.f1_mean}};
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

void write_ablation_outputs(const std::string& run_dir,
                            const std::vector<AblationRow>& rows,
                            const ExperimentConfig& config,
                            const Cohort& cohort) {
  const fs::path dir(run_dir);
  fs::create_directories(dir);
  write_text_file(dir / "ablation.csv", ablation_csv_text(rows));

  ordered_json manifest;
  manifest["schema_version"] = 1;
  manifest["command"] = "ablate";
  manifest["config"] = config_to_json(config);
  manifest["cohort"] = cohort_to_json(cohort);
  ordered_json modes = ordered_json::array();
  for (const AblationRow& r : rows) {
    modes.push_back({{"mode", r.mode},
                     {"auroc_mean", r.summary.auroc_mean},
                     {"auroc_sd", r.summary.auroc_sd},
                     {"accuracy_mean", r.summary.accuracy_mean}});
  }
  manifest["modes"] = modes;
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace mref
