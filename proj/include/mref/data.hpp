// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mref/record.hpp"

namespace mref {

struct RegionSpec {
  std::string name;
  std::vector<std::string> columns;
};

struct ModalitySpec {
  std::string name;
  std::vector<RegionSpec> regions;
};

/// Declarative modality -> region -> column map. Blocks (experts) are the
/// (modality, region) pairs flattened in declaration order.
struct FeatureSchema {
  std::vector<ModalitySpec> modalities;
  std::string label_column = "label";
  std::string id_column = "id";

  int num_blocks() const;
  int num_columns() const;
  void validate() const;
};

/// Flattened view of a schema: block b spans feature columns
/// [block_start[b], block_start[b] + block_len[b]).
struct BlockLayout {
  std::vector<int> block_start;
  std::vector<int> block_len;
  std::vector<int> block_modality;
  std::vector<int> block_region;
  std::vector<std::string> modality_names;
  std::vector<std::vector<int>> modality_blocks;
  std::vector<std::string> column_names;
  int total_columns = 0;

  int num_blocks() const { return static_cast<int>(block_start.size()); }
  int num_modalities() const { return static_cast<int>(modality_names.size()); }
};

BlockLayout build_layout(const FeatureSchema& schema);

FeatureSchema load_schema(const std::string& path);
FeatureSchema schema_from_json(const std::string& text);
std::string schema_to_json(const FeatureSchema& schema);

struct Cohort {
  FeatureSchema schema;  // post one-hot expansion
  std::vector<SubjectRecord> records;
  std::vector<std::string> class_names;
  int num_classes = 0;
};

/// CSV ingestion. Categorical columns (any non-numeric cell) are one-hot
/// expanded in place as "<column>=<category>" with categories sorted
/// lexicographically; the returned schema reflects the expansion.
Cohort load_cohort(const std::string& csv_path, const FeatureSchema& schema);

void write_cohort(const std::string& csv_path, const FeatureSchema& schema,
                  const std::vector<SubjectRecord>& records,
                  const std::vector<std::string>& class_names);

/// Per-column moments fitted on training rows whose modality is available.
/// Population (1/n) standard deviation, floored at 1e-8.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> std_dev;
};

NormStats zscore_fit(const std::vector<SubjectRecord>& records,
                     const std::vector<int>& indices, const FeatureSchema& schema);

/// x' = (x - mean) / std, applied only to available blocks; unavailable
/// blocks stay zero-filled.
void zscore_apply(std::vector<SubjectRecord>& records, const FeatureSchema& schema,
                  const NormStats& stats);

struct FoldPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> assignment;  // record index -> fold

  std::vector<int> test_indices(int fold) const;
  std::vector<int> train_indices(int fold) const;
};

/// Per-class round-robin assignment after a seeded per-class shuffle.
FoldPlan stratified_kfold(const std::vector<SubjectRecord>& records, int k,
                          std::uint64_t seed);

std::vector<int> label_counts(const std::vector<SubjectRecord>& records,
                              const std::vector<int>& indices, int num_classes);

}  // namespace mref
