// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mref/data.hpp"

namespace mref {

struct SynthModality {
  std::string name;
  std::vector<std::string> regions;
  int columns_per_region = 3;
  double missing_rate = 0.0;
};

/// One informative (modality, region) block: every column in the block gets
/// class-conditional mean effect * class_means[c]; all other blocks are
/// zero-mean noise.
struct PlantedBlock {
  std::string modality;
  std::string region;
  std::vector<double> class_means;
  double effect = 1.0;
};

struct SynthSpec {
  int n_subjects = 1200;
  std::vector<std::string> class_names = {"CN", "MCI", "AD"};
  std::vector<double> class_fractions = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  double noise = 1.0;
  std::vector<SynthModality> modalities;
  std::vector<PlantedBlock> planted;
  int mc_draws = 20000;

  void validate() const;
};

/// Two imaging modalities x 14 meso-scale regions x 3 columns plus a 6-column
/// demographic modality, 3 balanced classes, n=1200, 10% imaging missingness,
/// complementary signal planted in 4 blocks.
SynthSpec default_synth_spec();

/// Spec for SynthSpec JSON files; missing keys fall back to defaults.
SynthSpec synth_spec_from_json(const std::string& text);
std::string synth_spec_to_json(const SynthSpec& spec);

FeatureSchema synth_schema(const SynthSpec& spec);

struct SynthResult {
  FeatureSchema schema;
  std::vector<SubjectRecord> records;
  std::vector<std::string> class_names;
  double bayes_accuracy_mc = 0.0;
};

/// Deterministic draw of the full cohort; same (spec, seed) gives identical
/// records. Every subject keeps at least one modality.
SynthResult synth_cohort(const SynthSpec& spec, std::uint64_t seed);

/// Monte-Carlo accuracy of the Bayes-optimal classifier on the generative
/// model, honouring the missingness pattern. mc_stream picks the MC noise
/// stream so convergence can be checked across reruns.
double synth_bayes_mc(const SynthSpec& spec, std::uint64_t seed, int draws,
                      std::uint64_t mc_stream = 0);

/// Writes cohort.csv, schema.json, and manifest.json under out_dir.
/// Returns the manifest JSON text.
std::string synth_generate(const SynthSpec& spec, std::uint64_t seed,
                           const std::string& out_dir);

}  // namespace mref
