// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mref/common.hpp"
#include "mref/experiment.hpp"
#include "mref/synth.hpp"

namespace fs = std::filesystem;

namespace {

struct CliOptions {
  std::string schema_path;
  std::string data_path;
  std::string out_dir = "out";
  std::string run_id;
  std::string spec_path;
  std::string bundle_path;
  std::string model = "mref";
  std::string gate_mode = "hier";
  std::string class_weighting = "balanced";
  std::string modes;  // comma-separated ablation modes; empty = defaults
  int top_k = 0;      // 0 = dense gating
  int k_folds = 10;
  int epochs = 40;
  int patience = 10;
  int batch_size = 64;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double val_fraction = 0.1;
  double lambda_sparsity = 0.01;
  double lambda_diversity = 0.01;
  std::uint64_t seed = 0;
};

mref::ExperimentConfig build_config(const CliOptions& opt) {
  mref::ExperimentConfig config;
  config.model.kind = mref::model_kind_from_name(opt.model);
  config.model.gate_mode = mref::gate_mode_from_name(opt.gate_mode);
  if (opt.top_k != 0) {
    mref::require(opt.top_k > 0, "--top-k must be positive");
    config.model.top_k = opt.top_k;
  }
  config.lambda_sparsity = opt.lambda_sparsity;
  config.lambda_diversity = opt.lambda_diversity;
  config.balanced_class_weights = (opt.class_weighting == "balanced");
  config.k_folds = opt.k_folds;
  config.seed = opt.seed;
  config.train.max_epochs = opt.epochs;
  config.train.patience = opt.patience;
  config.train.batch_size = opt.batch_size;
  config.train.val_fraction = opt.val_fraction;
  config.train.optim.lr = opt.lr;
  config.train.optim.weight_decay = opt.weight_decay;
  return config;
}

mref::Cohort load_inputs(const CliOptions& opt) {
  mref::require(!opt.schema_path.empty(), "--schema is required");
  mref::require(!opt.data_path.empty(), "--data is required");
  mref::FeatureSchema schema = mref::load_schema(opt.schema_path);
  return mref::load_cohort(opt.data_path, schema);
}

fs::path run_dir(const CliOptions& opt, const std::string& command,
                 const mref::ExperimentConfig& config) {
  const std::string id =
      opt.run_id.empty() ? mref::default_run_id(command, config) : opt.run_id;
  return fs::path(opt.out_dir) / id;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  mref::require(out.good(), "cannot open for writing: " + path.string());
  out << text;
  mref::require(out.good(), "write failed: " + path.string());
}

int cmd_synth(const CliOptions& opt) {
  mref::SynthSpec spec = mref::default_synth_spec();
  if (!opt.spec_path.empty()) {
    std::ifstream in(opt.spec_path, std::ios::binary);
    mref::require(in.good(), "cannot open: " + opt.spec_path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    spec = mref::synth_spec_from_json(text);
  }
  const std::string manifest = mref::synth_generate(spec, opt.seed, opt.out_dir);
  std::cout << manifest;
  return 0;
}

int cmd_train(const CliOptions& opt) {
  mref::Cohort cohort = load_inputs(opt);
  mref::ExperimentConfig config = build_config(opt);

  std::vector<int> all(cohort.records.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);

  mref::NormStats stats = mref::zscore_fit(cohort.records, all, cohort.schema);
  std::vector<mref::SubjectRecord> records = cohort.records;
  mref::zscore_apply(records, cohort.schema, stats);

  mref::LossConfig loss;
  if (config.model.kind == mref::ModelKind::kMref) {
    loss.lambda_sparsity = config.lambda_sparsity;
    loss.lambda_diversity = config.lambda_diversity;
  }
  if (config.balanced_class_weights) {
    loss.class_weights = mref::class_weights_from_counts(
        mref::label_counts(records, all, cohort.num_classes));
  }

  auto model = mref::make_model(cohort.schema, cohort.num_classes, config.model,
                                config.seed);
  mref::TrainConfig train = config.train;
  train.seed = config.seed;
  mref::TrainTrace trace = mref::train_model(*model, records, all, loss, train);

  const fs::path dir = run_dir(opt, "train", config);
  fs::create_directories(dir);
  write_file(dir / "model.json",
             mref::bundle_to_json_text(*model, cohort.schema,
                                       cohort.class_names, stats));
  write_file(dir / "trace.csv", mref::trace_csv_text(trace));

  nlohmann::ordered_json manifest;
  manifest["schema_version"] = 1;
  manifest["command"] = "train";
  manifest["model"] = model->kind();
  manifest["seed"] = config.seed;
  manifest["subjects"] = cohort.records.size();
  manifest["stopped_epoch"] = trace.stopped_epoch;
  manifest["best_epoch"] = trace.best_epoch;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");

  std::cout << "trained " << model->kind() << " on " << cohort.records.size()
            << " subjects; bundle at " << (dir / "model.json").string() << "\n";
  return 0;
}

int cmd_cv(const CliOptions& opt) {
  mref::Cohort cohort = load_inputs(opt);
  mref::ExperimentConfig config = build_config(opt);
  mref::CvResult result = mref::run_cv(cohort, config);
  const fs::path dir = run_dir(opt, "cv", config);
  mref::write_cv_outputs(dir.string(), result, config, cohort);
  std::cout << "cv " << mref::model_kind_name(config.model.kind) << " k="
            << config.k_folds << " auroc_macro="
            << mref::fmt_g17(result.summary.auroc_mean) << " +- "
            << mref::fmt_g17(result.summary.auroc_sd) << "\n"
            << "outputs in " << dir.string() << "\n";
  return 0;
}

int cmd_ablate(const CliOptions& opt) {
  mref::Cohort cohort = load_inputs(opt);
  mref::ExperimentConfig config = build_config(opt);

  std::vector<mref::AblationMode> modes;
  if (opt.modes.empty()) {
    modes = mref::default_ablation_modes(cohort.schema);
  } else {
    std::string rest = opt.modes;
    while (!rest.empty()) {
      auto comma = rest.find(',');
      modes.push_back(mref::ablation_mode_from_string(rest.substr(0, comma)));
      if (comma == std::string::npos) break;
      rest = rest.substr(comma + 1);
    }
  }

  std::vector<mref::AblationRow> rows = mref::run_ablation(cohort, config, modes);
  const fs::path dir = run_dir(opt, "ablate", config);
  mref::write_ablation_outputs(dir.string(), rows, config, cohort);
  std::cout << "ablation over " << rows.size() << " modes; outputs in "
            << dir.string() << "\n";
  return 0;
}

int cmd_explain(const CliOptions& opt) {
  mref::require(!opt.bundle_path.empty(), "--bundle is required");
  mref::require(!opt.data_path.empty(), "--data is required");
  mref::LoadedBundle bundle = mref::load_bundle(opt.bundle_path);

  // The bundle's schema is authoritative; --schema may confirm but not
  // replace it.
  if (!opt.schema_path.empty()) {
    mref::FeatureSchema given = mref::load_schema(opt.schema_path);
    mref::require(mref::schema_to_json(given) == mref::schema_to_json(bundle.schema),
                  "cohort schema does not match the bundle schema");
  }
  mref::Cohort cohort = mref::load_cohort(opt.data_path, bundle.schema);
  mref::ExplainResult result = mref::explain(bundle, cohort);

  mref::ExperimentConfig config;  // only used for the run id
  config.seed = opt.seed;
  const fs::path dir = run_dir(opt, "explain", config);
  fs::create_directories(dir);

  mref::MoeModelOptions options;
  options.num_classes = cohort.num_classes;
  const mref::MoeConfig layout =
      mref::moe_config_from_schema(bundle.schema, options);
  write_file(dir / "attribution.csv",
             mref::attribution_csv_text(result.attribution));
  write_file(dir / "gates_per_subject.csv",
             mref::gates_csv_text(layout, result.gates, cohort.class_names));

  nlohmann::ordered_json manifest;
  manifest["schema_version"] = 1;
  manifest["command"] = "explain";
  manifest["bundle"] = opt.bundle_path;
  manifest["subjects"] = cohort.records.size();
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");

  std::cout << "explained " << cohort.records.size() << " subjects; outputs in "
            << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MREF-AD: mixture-of-experts fusion for multimodal tabular cohorts"};
  app.require_subcommand(1);

  CliOptions opt;

  auto add_data_flags = [&](CLI::App* cmd) {
    cmd->add_option("--schema", opt.schema_path, "feature schema JSON");
    cmd->add_option("--data", opt.data_path, "cohort CSV");
  };
  auto add_out_flags = [&](CLI::App* cmd) {
    cmd->add_option("--out", opt.out_dir, "output root directory");
    cmd->add_option("--run-id", opt.run_id, "run directory name");
    cmd->add_option("--seed", opt.seed, "master PRNG seed");
  };
  auto add_model_flags = [&](CLI::App* cmd) {
    cmd->add_option("--model", opt.model, "mref|concat|late|logreg")
        ->check(CLI::IsMember({"mref", "concat", "late", "logreg"}));
    cmd->add_option("--gate-mode", opt.gate_mode, "flat|hier|modality|region")
        ->check(CLI::IsMember({"flat", "hier", "modality", "region"}));
    cmd->add_option("--top-k", opt.top_k, "sparsify gate to k experts (0 = dense)");
    cmd->add_option("--lambda-sparsity", opt.lambda_sparsity,
                    "gate entropy penalty weight");
    cmd->add_option("--lambda-diversity", opt.lambda_diversity,
                    "expert decorrelation penalty weight");
    cmd->add_option("--class-weighting", opt.class_weighting, "balanced|none")
        ->check(CLI::IsMember({"balanced", "none"}));
    cmd->add_option("--epochs", opt.epochs, "max training epochs");
    cmd->add_option("--patience", opt.patience, "early-stopping patience");
    cmd->add_option("--batch-size", opt.batch_size, "mini-batch size");
    cmd->add_option("--lr", opt.lr, "learning rate");
    cmd->add_option("--weight-decay", opt.weight_decay, "decoupled weight decay");
    cmd->add_option("--val-fraction", opt.val_fraction,
                    "inner validation fraction");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  synth->add_option("--spec", opt.spec_path, "synthetic cohort spec JSON");
  synth->add_option("--out", opt.out_dir, "output directory")->required();
  synth->add_option("--seed", opt.seed, "master PRNG seed");

  CLI::App* train = app.add_subcommand("train", "train one model on a cohort");
  add_data_flags(train);
  add_out_flags(train);
  add_model_flags(train);

  CLI::App* cv = app.add_subcommand("cv", "stratified k-fold cross-validation");
  add_data_flags(cv);
  add_out_flags(cv);
  add_model_flags(cv);
  cv->add_option("--folds", opt.k_folds, "number of folds");

  CLI::App* ablate = app.add_subcommand("ablate", "retrain under ablation modes");
  add_data_flags(ablate);
  add_out_flags(ablate);
  add_model_flags(ablate);
  ablate->add_option("--folds", opt.k_folds, "number of folds");
  ablate->add_option("--modes", opt.modes,
                     "comma-separated modes: full, drop:<modality>, "
                     "only:<modality>, topk:<k>, gate:modality, gate:region");

  CLI::App* explain = app.add_subcommand("explain", "per-subject gate weights");
  explain->add_option("--bundle", opt.bundle_path, "trained model bundle JSON");
  add_data_flags(explain);
  add_out_flags(explain);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(opt);
    if (train->parsed()) return cmd_train(opt);
    if (cv->parsed()) return cmd_cv(opt);
    if (ablate->parsed()) return cmd_ablate(opt);
    if (explain->parsed()) return cmd_explain(opt);
    mref::fail("no subcommand given");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
