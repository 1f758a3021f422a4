// SPDX-License-Identifier: Apache-2.0
#include "mref/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "mref/common.hpp"
#include "mref/rng.hpp"

namespace mref {

using nlohmann::ordered_json;

void SynthSpec::validate() const {
  require(n_subjects >= 1, "synth: n_subjects must be >= 1");
  require(class_names.size() >= 2, "synth: at least two classes required");
  require(class_fractions.size() == class_names.size(),
          "synth: class_fractions length must match class_names");
  double total = 0.0;
  for (double f : class_fractions) {
    require(f > 0.0, "synth: class fractions must be positive");
    total += f;
  }
  require(std::abs(total - 1.0) < 1e-9, "synth: class fractions must sum to 1");
  require(noise > 0.0, "synth: noise must be positive");
  require(!modalities.empty(), "synth: at least one modality required");
  for (const SynthModality& m : modalities) {
    require(!m.regions.empty(), "synth: modality '" + m.name + "' has no regions");
    require(m.columns_per_region >= 1,
            "synth: columns_per_region must be >= 1 in modality '" + m.name + "'");
    require(m.missing_rate >= 0.0 && m.missing_rate < 1.0,
            "synth: missing_rate must be in [0, 1) in modality '" + m.name + "'");
  }
  for (const PlantedBlock& p : planted) {
    require(p.effect >= 0.0, "synth: effect size must be >= 0 for planted block '" +
                                 p.modality + "/" + p.region + "'");
    require(p.class_means.size() == class_names.size(),
            "synth: class_means length mismatch for planted block '" + p.modality +
                "/" + p.region + "'");
    bool found = false;
    for (const SynthModality& m : modalities)
      if (m.name == p.modality)
        for (const std::string& r : m.regions)
          if (r == p.region) found = true;
    require(found, "synth: planted block '" + p.modality + "/" + p.region +
                       "' not present in the modality list");
  }
  require(mc_draws >= 1, "synth: mc_draws must be >= 1");
}

SynthSpec default_synth_spec() {
  const std::vector<std::string> kRegions = {
      "temporal",      "subcortical_temporal",   "ventricular",
      "brainstem",     "striatum_basal_ganglia", "corpus_callosum_wm",
      "frontal",       "parietal",               "occipital",
      "cingulate",     "insula",                 "cerebellum",
      "hippocampus_amygdala", "deep_white_matter"};
  SynthSpec spec;
  spec.modalities = {
      {"mri", kRegions, 3, 0.1},
      {"pet", kRegions, 3, 0.1},
      {"demographics", {"global"}, 6, 0.0},
  };
  // Effect 0.65 puts trained models around 0.88 macro-AUROC, far from both
  // chance and ceiling, so model differences stay visible.
  spec.planted = {
      {"mri", "temporal", {1.0, -0.5, -0.5}, 0.65},
      {"mri", "subcortical_temporal", {0.7, -0.35, -0.35}, 0.65},
      {"pet", "brainstem", {0.0, 1.0, -1.0}, 0.65},
      {"pet", "striatum_basal_ganglia", {0.0, 0.7, -0.7}, 0.65},
  };
  return spec;
}

SynthSpec synth_spec_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    fail(std::string("synth spec: parse error: ") + e.what());
  }
  SynthSpec spec = default_synth_spec();
  try {
    if (j.contains("n_subjects")) spec.n_subjects = j["n_subjects"].get<int>();
    if (j.contains("class_names"))
      spec.class_names = j["class_names"].get<std::vector<std::string>>();
    if (j.contains("class_fractions"))
      spec.class_fractions = j["class_fractions"].get<std::vector<double>>();
    if (j.contains("noise")) spec.noise = j["noise"].get<double>();
    if (j.contains("mc_draws")) spec.mc_draws = j["mc_draws"].get<int>();
    if (j.contains("modalities")) {
      spec.modalities.clear();
      for (const auto& jm : j["modalities"]) {
        SynthModality m;
        m.name = jm.at("name").get<std::string>();
        m.regions = jm.at("regions").get<std::vector<std::string>>();
        m.columns_per_region = jm.value("columns_per_region", 3);
        m.missing_rate = jm.value("missing_rate", 0.0);
        spec.modalities.push_back(std::move(m));
      }
    }
    if (j.contains("planted")) {
      spec.planted.clear();
      for (const auto& jp : j["planted"]) {
        PlantedBlock p;
        p.modality = jp.at("modality").get<std::string>();
        p.region = jp.at("region").get<std::string>();
        p.class_means = jp.at("class_means").get<std::vector<double>>();
        p.effect = jp.value("effect", 1.0);
        spec.planted.push_back(std::move(p));
      }
    }
  } catch (const ordered_json::exception& e) {
    fail(std::string("synth spec: malformed document: ") + e.what());
  }
  spec.validate();
  return spec;
}

std::string synth_spec_to_json(const SynthSpec& spec) {
  ordered_json j;
  j["n_subjects"] = spec.n_subjects;
  j["class_names"] = spec.class_names;
  j["class_fractions"] = spec.class_fractions;
  j["noise"] = spec.noise;
  j["modalities"] = ordered_json::array();
  for (const SynthModality& m : spec.modalities) {
    ordered_json jm;
    jm["name"] = m.name;
    jm["regions"] = m.regions;
    jm["columns_per_region"] = m.columns_per_region;
    jm["missing_rate"] = m.missing_rate;
    j["modalities"].push_back(std::move(jm));
  }
  j["planted"] = ordered_json::array();
  for (const PlantedBlock& p : spec.planted) {
    ordered_json jp;
    jp["modality"] = p.modality;
    jp["region"] = p.region;
    jp["class_means"] = p.class_means;
    jp["effect"] = p.effect;
    j["planted"].push_back(std::move(jp));
  }
  j["mc_draws"] = spec.mc_draws;
  return j.dump(2) + "\n";
}

FeatureSchema synth_schema(const SynthSpec& spec) {
  FeatureSchema schema;
  for (const SynthModality& m : spec.modalities) {
    ModalitySpec ms;
    ms.name = m.name;
    for (const std::string& region : m.regions) {
      RegionSpec rs;
      rs.name = region;
      for (int c = 1; c <= m.columns_per_region; ++c)
        rs.columns.push_back(m.name + "_" + region + "_c" + std::to_string(c));
      ms.regions.push_back(std::move(rs));
    }
    schema.modalities.push_back(std::move(ms));
  }
  schema.validate();
  return schema;
}

namespace {

/// class_means[c][b]: mean of every column of block b for class c.
std::vector<std::vector<double>> block_class_means(const SynthSpec& spec,
                                                   const BlockLayout& layout) {
  const int C = static_cast<int>(spec.class_names.size());
  std::vector<std::vector<double>> means(C,
                                         std::vector<double>(layout.num_blocks(), 0.0));
  for (const PlantedBlock& p : spec.planted) {
    for (int b = 0; b < layout.num_blocks(); ++b) {
      if (layout.modality_names[layout.block_modality[b]] != p.modality) continue;
      const SynthModality& m = spec.modalities[layout.block_modality[b]];
      if (m.regions[layout.block_region[b]] != p.region) continue;
      for (int c = 0; c < C; ++c) means[c][b] += p.effect * p.class_means[c];
    }
  }
  return means;
}

std::vector<int> deterministic_label_counts(const SynthSpec& spec) {
  const int C = static_cast<int>(spec.class_names.size());
  std::vector<int> counts(C);
  std::vector<std::pair<double, int>> rema(C);
  int assigned = 0;
  for (int c = 0; c < C; ++c) {
    const double exact = spec.class_fractions[c] * spec.n_subjects;
    counts[c] = static_cast<int>(std::floor(exact));
    assigned += counts[c];
    rema[c] = {-(exact - counts[c]), c};  // most-deserving first, ties by index
  }
  std::sort(rema.begin(), rema.end());
  for (int r = 0; r < spec.n_subjects - assigned; ++r) ++counts[rema[r].second];
  return counts;
}

std::vector<std::uint8_t> draw_availability(const SynthSpec& spec, Rng& rng) {
  const int M = static_cast<int>(spec.modalities.size());
  std::vector<std::uint8_t> avail(M);
  while (true) {
    bool any = false;
    for (int m = 0; m < M; ++m) {
      avail[m] = rng.uniform01() >= spec.modalities[m].missing_rate;
      any = any || avail[m];
    }
    if (any) return avail;  // every subject keeps at least one modality
  }
}

}  // namespace

SynthResult synth_cohort(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  SynthResult result;
  result.schema = synth_schema(spec);
  result.class_names = spec.class_names;
  const BlockLayout layout = build_layout(result.schema);
  const auto means = block_class_means(spec, layout);

  std::vector<int> labels;
  {
    const std::vector<int> counts = deterministic_label_counts(spec);
    for (std::size_t c = 0; c < counts.size(); ++c)
      labels.insert(labels.end(), counts[c], static_cast<int>(c));
    Rng rng(derive_seed(seed, 0));
    rng.shuffle(labels);
  }

  Rng rng_miss(derive_seed(seed, 1));
  Rng rng_feat(derive_seed(seed, 2));
  int id_width = 1;
  for (int n = spec.n_subjects; n >= 10; n /= 10) ++id_width;

  result.records.reserve(spec.n_subjects);
  for (int s = 0; s < spec.n_subjects; ++s) {
    SubjectRecord rec;
    std::string num = std::to_string(s + 1);
    rec.id = "s" + std::string(id_width - num.size(), '0') + num;
    rec.label = labels[s];
    rec.available = draw_availability(spec, rng_miss);
    rec.blocks.resize(layout.num_blocks());
    for (int b = 0; b < layout.num_blocks(); ++b) {
      rec.blocks[b].resize(layout.block_len[b]);
      const double mu = means[rec.label][b];
      for (int off = 0; off < layout.block_len[b]; ++off)
        rec.blocks[b][off] = mu + spec.noise * rng_feat.normal();
      // Mirror CSV semantics: missing blocks carry zeros in memory.
      if (!rec.available[layout.block_modality[b]])
        std::fill(rec.blocks[b].begin(), rec.blocks[b].end(), 0.0);
    }
    result.records.push_back(std::move(rec));
  }
  result.bayes_accuracy_mc = synth_bayes_mc(spec, seed, spec.mc_draws);
  return result;
}

double synth_bayes_mc(const SynthSpec& spec, std::uint64_t seed, int draws,
                      std::uint64_t mc_stream) {
  spec.validate();
  require(draws >= 1, "synth_bayes_mc: draws must be >= 1");
  const FeatureSchema schema = synth_schema(spec);
  const BlockLayout layout = build_layout(schema);
  const auto means = block_class_means(spec, layout);
  const int C = static_cast<int>(spec.class_names.size());

  std::vector<double> cumulative(C);
  double acc = 0.0;
  for (int c = 0; c < C; ++c) {
    acc += spec.class_fractions[c];
    cumulative[c] = acc;
  }
  std::vector<double> log_prior(C);
  for (int c = 0; c < C; ++c) log_prior[c] = std::log(spec.class_fractions[c]);

  // Only planted blocks discriminate; zero-mean blocks cancel in the
  // posterior and are skipped.
  std::vector<int> informative;
  for (int b = 0; b < layout.num_blocks(); ++b)
    for (int c = 0; c < C; ++c)
      if (means[c][b] != 0.0) {
        informative.push_back(b);
        break;
      }

  Rng rng(derive_seed(seed, 1000 + mc_stream));
  const double inv_two_var = 1.0 / (2.0 * spec.noise * spec.noise);
  long hits = 0;
  std::vector<double> log_post(C);
  for (int d = 0; d < draws; ++d) {
    const double u = rng.uniform01();
    int y = C - 1;
    for (int c = 0; c < C; ++c)
      if (u < cumulative[c]) {
        y = c;
        break;
      }
    const std::vector<std::uint8_t> avail = draw_availability(spec, rng);
    log_post = log_prior;
    for (int b : informative) {
      if (!avail[layout.block_modality[b]]) continue;
      for (int off = 0; off < layout.block_len[b]; ++off) {
        const double x = means[y][b] + spec.noise * rng.normal();
        for (int c = 0; c < C; ++c) {
          const double d2 = x - means[c][b];
          log_post[c] -= d2 * d2 * inv_two_var;
        }
      }
    }
    int pred = 0;
    for (int c = 1; c < C; ++c)
      if (log_post[c] > log_post[pred]) pred = c;
    if (pred == y) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(draws);
}

std::string synth_generate(const SynthSpec& spec, std::uint64_t seed,
                           const std::string& out_dir) {
  SynthResult result = synth_cohort(spec, seed);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  write_cohort((dir / "cohort.csv").string(), result.schema, result.records,
               result.class_names);
  {
    std::ofstream out(dir / "schema.json", std::ios::binary);
    require(out.good(), "synth: cannot write schema.json");
    out << schema_to_json(result.schema);
  }
  ordered_json manifest;
  manifest["planted_blocks"] = ordered_json::array();
  for (const PlantedBlock& p : spec.planted) {
    ordered_json jp;
    jp["modality"] = p.modality;
    jp["region"] = p.region;
    std::vector<double> scaled(p.class_means.size());
    for (std::size_t c = 0; c < p.class_means.size(); ++c)
      scaled[c] = p.effect * p.class_means[c];
    jp["class_means"] = scaled;
    manifest["planted_blocks"].push_back(std::move(jp));
  }
  manifest["bayes_accuracy_mc"] = result.bayes_accuracy_mc;
  manifest["seed"] = seed;
  manifest["spec"] = ordered_json::parse(synth_spec_to_json(spec));
  const std::string text = manifest.dump(2) + "\n";
  {
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    require(out.good(), "synth: cannot write manifest.json");
    out << text;
  }
  return text;
}

}  // namespace mref
