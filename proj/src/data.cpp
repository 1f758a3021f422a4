// SPDX-License-Identifier: Apache-2.0
#include "mref/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mref/common.hpp"
#include "mref/rng.hpp"

namespace mref {

int FeatureSchema::num_blocks() const {
  int n = 0;
  for (const ModalitySpec& m : modalities) n += static_cast<int>(m.regions.size());
  return n;
}

int FeatureSchema::num_columns() const {
  int n = 0;
  for (const ModalitySpec& m : modalities)
    for (const RegionSpec& r : m.regions) n += static_cast<int>(r.columns.size());
  return n;
}

void FeatureSchema::validate() const {
  require(!modalities.empty(), "schema: at least one modality required");
  std::set<std::string> seen;
  std::set<std::string> modality_seen;
  for (const ModalitySpec& m : modalities) {
    require(!m.name.empty(), "schema: empty modality name");
    require(modality_seen.insert(m.name).second,
            "schema: duplicate modality '" + m.name + "'");
    require(!m.regions.empty(), "schema: modality '" + m.name + "' has no regions");
    std::set<std::string> region_seen;
    for (const RegionSpec& r : m.regions) {
      require(region_seen.insert(r.name).second, "schema: duplicate region '" +
                                                     r.name + "' in modality '" +
                                                     m.name + "'");
      require(!r.columns.empty(), "schema: region '" + m.name + "/" + r.name +
                                      "' has no columns");
      for (const std::string& c : r.columns)
        require(seen.insert(c).second, "schema: duplicate column '" + c + "'");
    }
  }
  require(!seen.count(label_column) && !seen.count(id_column),
          "schema: id/label column collides with a feature column");
}

BlockLayout build_layout(const FeatureSchema& schema) {
  BlockLayout l;
  int col = 0;
  for (std::size_t mi = 0; mi < schema.modalities.size(); ++mi) {
    const ModalitySpec& m = schema.modalities[mi];
    l.modality_names.push_back(m.name);
    l.modality_blocks.emplace_back();
    for (std::size_t ri = 0; ri < m.regions.size(); ++ri) {
      const RegionSpec& r = m.regions[ri];
      l.modality_blocks[mi].push_back(l.num_blocks());
      l.block_start.push_back(col);
      l.block_len.push_back(static_cast<int>(r.columns.size()));
      l.block_modality.push_back(static_cast<int>(mi));
      l.block_region.push_back(static_cast<int>(ri));
      for (const std::string& c : r.columns) l.column_names.push_back(c);
      col += static_cast<int>(r.columns.size());
    }
  }
  l.total_columns = col;
  return l;
}

namespace {

using nlohmann::ordered_json;

ordered_json parse_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  require(in.good(), std::string(what) + ": cannot open '" + path + "'");
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const std::exception& e) {
    fail(std::string(what) + ": parse error in '" + path + "': " + e.what());
  }
  return j;
}

FeatureSchema schema_from_parsed(const ordered_json& j) {
  FeatureSchema s;
  try {
    for (const auto& jm : j.at("modalities")) {
      ModalitySpec m;
      m.name = jm.at("name").get<std::string>();
      for (const auto& jr : jm.at("regions")) {
        RegionSpec r;
        r.name = jr.at("name").get<std::string>();
        for (const auto& jc : jr.at("columns"))
          r.columns.push_back(jc.get<std::string>());
        m.regions.push_back(std::move(r));
      }
      s.modalities.push_back(std::move(m));
    }
    s.label_column = j.value("label_column", std::string("label"));
    s.id_column = j.value("id_column", std::string("id"));
  } catch (const ordered_json::exception& e) {
    fail(std::string("schema: malformed document: ") + e.what());
  }
  s.validate();
  return s;
}

}  // namespace

FeatureSchema load_schema(const std::string& path) {
  return schema_from_parsed(parse_json_file(path, "schema"));
}

FeatureSchema schema_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    fail(std::string("schema: parse error: ") + e.what());
  }
  return schema_from_parsed(j);
}

std::string schema_to_json(const FeatureSchema& schema) {
  ordered_json j;
  j["modalities"] = ordered_json::array();
  for (const ModalitySpec& m : schema.modalities) {
    ordered_json jm;
    jm["name"] = m.name;
    jm["regions"] = ordered_json::array();
    for (const RegionSpec& r : m.regions) {
      ordered_json jr;
      jr["name"] = r.name;
      jr["columns"] = r.columns;
      jm["regions"].push_back(std::move(jr));
    }
    j["modalities"].push_back(std::move(jm));
  }
  j["label_column"] = schema.label_column;
  j["id_column"] = schema.id_column;
  return j.dump(2) + "\n";
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cell);
      cell.clear();
    } else if (ch != '\r') {
      cell += ch;
    }
  }
  out.push_back(cell);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end == begin + s.size() && s.size() > 0 && std::isfinite(out);
}

int parse_label(const std::string& token, std::vector<std::string>& class_names) {
  static const std::vector<std::string> kDiagnosis = {"CN", "MCI", "AD"};
  for (std::size_t i = 0; i < kDiagnosis.size(); ++i) {
    if (token == kDiagnosis[i]) {
      class_names = kDiagnosis;
      return static_cast<int>(i);
    }
  }
  if (!token.empty() && token.find_first_not_of("0123456789") == std::string::npos)
    return std::stoi(token);
  fail("cohort: unknown label token '" + token + "' (expected CN|MCI|AD or 0|1|2)");
}

}  // namespace

Cohort load_cohort(const std::string& csv_path, const FeatureSchema& schema) {
  schema.validate();
  std::ifstream in(csv_path);
  require(in.good(), "cohort: cannot open '" + csv_path + "'");

  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "cohort: empty file");
  const std::vector<std::string> header = split_csv_line(line);
  std::map<std::string, int> col_of;
  for (std::size_t i = 0; i < header.size(); ++i) col_of[header[i]] = static_cast<int>(i);

  const auto col_index = [&](const std::string& name) {
    auto it = col_of.find(name);
    require(it != col_of.end(), "cohort: missing required column '" + name + "'");
    return it->second;
  };
  const int id_col = col_index(schema.id_column);
  const int label_col = col_index(schema.label_column);
  const BlockLayout layout = build_layout(schema);
  std::vector<int> feature_col(layout.total_columns);
  for (int c = 0; c < layout.total_columns; ++c)
    feature_col[c] = col_index(layout.column_names[c]);

  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    require(cells.size() == header.size(),
            "cohort: row " + std::to_string(rows.size() + 2) + " has " +
                std::to_string(cells.size()) + " cells, header has " +
                std::to_string(header.size()));
    rows.push_back(std::move(cells));
  }
  require(!rows.empty(), "cohort: no data rows");

  // Column kinds: numeric unless some non-empty cell fails to parse.
  std::vector<std::vector<std::string>> categories(layout.total_columns);
  std::vector<bool> categorical(layout.total_columns, false);
  for (int c = 0; c < layout.total_columns; ++c) {
    std::set<std::string> tokens;
    bool any_non_numeric = false;
    for (const auto& row : rows) {
      const std::string& cell = row[feature_col[c]];
      if (cell.empty()) continue;
      double v;
      if (!parse_double(cell, v)) any_non_numeric = true;
      tokens.insert(cell);
    }
    if (any_non_numeric) {
      categorical[c] = true;
      categories[c].assign(tokens.begin(), tokens.end());  // set: lexicographic
      require(!categories[c].empty(),
              "cohort: categorical column '" + layout.column_names[c] +
                  "' has no observed categories");
    }
  }

  // Expanded schema: replace each categorical column with one indicator
  // column per category.
  Cohort cohort;
  cohort.schema = schema;
  {
    int flat = 0;
    for (ModalitySpec& m : cohort.schema.modalities) {
      for (RegionSpec& r : m.regions) {
        std::vector<std::string> expanded;
        for (const std::string& name : r.columns) {
          if (categorical[flat]) {
            for (const std::string& cat : categories[flat])
              expanded.push_back(name + "=" + cat);
          } else {
            expanded.push_back(name);
          }
          ++flat;
        }
        r.columns = std::move(expanded);
      }
    }
  }
  cohort.schema.validate();

  std::vector<int> col_modality(layout.total_columns, 0);
  for (int b = 0; b < layout.num_blocks(); ++b)
    for (int off = 0; off < layout.block_len[b]; ++off)
      col_modality[layout.block_start[b] + off] = layout.block_modality[b];

  std::set<std::string> ids_seen;
  int max_label = -1;
  for (const auto& row : rows) {
    SubjectRecord rec;
    rec.id = row[id_col];
    require(!rec.id.empty(), "cohort: empty subject id");
    require(ids_seen.insert(rec.id).second,
            "cohort: duplicate subject id '" + rec.id + "'");
    rec.label = parse_label(row[label_col], cohort.class_names);
    max_label = std::max(max_label, rec.label);
    rec.available.assign(layout.num_modalities(), 0);
    rec.blocks.resize(layout.num_blocks());

    // Availability first: a modality is absent iff all its cells are empty.
    std::vector<int> empty_cells(layout.num_modalities(), 0);
    std::vector<int> total_cells(layout.num_modalities(), 0);
    for (int c = 0; c < layout.total_columns; ++c) {
      ++total_cells[col_modality[c]];
      if (row[feature_col[c]].empty()) ++empty_cells[col_modality[c]];
    }
    for (int mi = 0; mi < layout.num_modalities(); ++mi) {
      if (empty_cells[mi] == 0) {
        rec.available[mi] = 1;
      } else if (empty_cells[mi] == total_cells[mi]) {
        rec.available[mi] = 0;
      } else {
        fail("cohort: subject '" + rec.id + "': modality '" +
             layout.modality_names[mi] +
             "' is partially missing; a modality must be fully present or fully "
             "empty");
      }
    }
    require(std::any_of(rec.available.begin(), rec.available.end(),
                        [](std::uint8_t a) { return a != 0; }),
            "cohort: subject '" + rec.id + "' has no available modalities");

    for (int b = 0; b < layout.num_blocks(); ++b) {
      std::vector<double>& block = rec.blocks[b];
      for (int off = 0; off < layout.block_len[b]; ++off) {
        const int c = layout.block_start[b] + off;
        const std::string& cell = row[feature_col[c]];
        if (!rec.available[layout.block_modality[b]]) {
          if (categorical[c])
            block.insert(block.end(), categories[c].size(), 0.0);
          else
            block.push_back(0.0);
          continue;
        }
        if (categorical[c]) {
          for (const std::string& cat : categories[c])
            block.push_back(cell == cat ? 1.0 : 0.0);
        } else {
          double v;
          require(parse_double(cell, v), "cohort: subject '" + rec.id +
                                             "': non-numeric value '" + cell +
                                             "' in column '" +
                                             layout.column_names[c] + "'");
          block.push_back(v);
        }
      }
    }
    cohort.records.push_back(std::move(rec));
  }

  if (cohort.class_names.empty()) {
    for (int c = 0; c <= max_label; ++c)
      cohort.class_names.push_back(std::to_string(c));
  }
  cohort.num_classes = static_cast<int>(cohort.class_names.size());
  for (const SubjectRecord& rec : cohort.records)
    require(rec.label < cohort.num_classes, "cohort: label index out of range");
  return cohort;
}

void write_cohort(const std::string& csv_path, const FeatureSchema& schema,
                  const std::vector<SubjectRecord>& records,
                  const std::vector<std::string>& class_names) {
  const BlockLayout layout = build_layout(schema);
  std::ofstream out(csv_path, std::ios::binary);  // LF line endings everywhere
  require(out.good(), "cohort: cannot write '" + csv_path + "'");
  out << schema.id_column;
  for (const std::string& c : layout.column_names) out << "," << c;
  out << "," << schema.label_column << "\n";
  for (const SubjectRecord& rec : records) {
    out << rec.id;
    for (int b = 0; b < layout.num_blocks(); ++b) {
      const bool avail = rec.available[layout.block_modality[b]];
      for (int off = 0; off < layout.block_len[b]; ++off) {
        out << ",";
        if (avail) out << fmt_g17(rec.blocks[b][off]);
      }
    }
    require(rec.label >= 0 && rec.label < static_cast<int>(class_names.size()),
            "write_cohort: label out of range for subject '" + rec.id + "'");
    out << "," << class_names[rec.label] << "\n";
  }
  require(out.good(), "cohort: write failed for '" + csv_path + "'");
}

NormStats zscore_fit(const std::vector<SubjectRecord>& records,
                     const std::vector<int>& indices,
                     const FeatureSchema& schema) {
  const BlockLayout layout = build_layout(schema);
  NormStats stats;
  stats.mean.assign(layout.total_columns, 0.0);
  stats.std_dev.assign(layout.total_columns, 0.0);
  for (int b = 0; b < layout.num_blocks(); ++b) {
    const int mi = layout.block_modality[b];
    for (int off = 0; off < layout.block_len[b]; ++off) {
      const int c = layout.block_start[b] + off;
      double sum = 0.0;
      long n = 0;
      for (int i : indices) {
        if (!records[i].available[mi]) continue;
        sum += records[i].blocks[b][off];
        ++n;
      }
      require(n > 0, "zscore_fit: column '" + layout.column_names[c] +
                         "' has no available training rows");
      const double mean = sum / static_cast<double>(n);
      double sq = 0.0;
      for (int i : indices) {
        if (!records[i].available[mi]) continue;
        const double d = records[i].blocks[b][off] - mean;
        sq += d * d;
      }
      stats.mean[c] = mean;
      stats.std_dev[c] = std::max(std::sqrt(sq / static_cast<double>(n)), 1e-8);
    }
  }
  return stats;
}

void zscore_apply(std::vector<SubjectRecord>& records,
                  const FeatureSchema& schema, const NormStats& stats) {
  const BlockLayout layout = build_layout(schema);
  require(static_cast<int>(stats.mean.size()) == layout.total_columns &&
              static_cast<int>(stats.std_dev.size()) == layout.total_columns,
          "zscore_apply: stats column count mismatch");
  for (SubjectRecord& rec : records) {
    for (int b = 0; b < layout.num_blocks(); ++b) {
      if (!rec.available[layout.block_modality[b]]) continue;
      for (int off = 0; off < layout.block_len[b]; ++off) {
        const int c = layout.block_start[b] + off;
        rec.blocks[b][off] = (rec.blocks[b][off] - stats.mean[c]) / stats.std_dev[c];
      }
    }
  }
}

std::vector<int> FoldPlan::test_indices(int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == fold) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> FoldPlan::train_indices(int fold) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] != fold) out.push_back(static_cast<int>(i));
  return out;
}

FoldPlan stratified_kfold(const std::vector<SubjectRecord>& records, int k,
                          std::uint64_t seed) {
  require(k >= 2, "stratified_kfold: k must be >= 2");
  require(!records.empty(), "stratified_kfold: empty cohort");
  std::map<int, std::vector<int>> by_class;
  for (std::size_t i = 0; i < records.size(); ++i) {
    require(records[i].label >= 0, "stratified_kfold: unlabeled record");
    by_class[records[i].label].push_back(static_cast<int>(i));
  }
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignment.assign(records.size(), -1);
  std::uint64_t stream = 0x3000;  // distinct from init/epoch/split streams
  for (auto& [label, members] : by_class) {
    require(static_cast<int>(members.size()) >= k,
            "stratified_kfold: class " + std::to_string(label) + " has only " +
                std::to_string(members.size()) + " members, need >= k = " +
                std::to_string(k));
    Rng rng(derive_seed(seed, stream++));
    rng.shuffle(members);
    for (std::size_t j = 0; j < members.size(); ++j)
      plan.assignment[members[j]] = static_cast<int>(j % k);
  }
  return plan;
}

std::vector<int> label_counts(const std::vector<SubjectRecord>& records,
                              const std::vector<int>& indices, int num_classes) {
  std::vector<int> counts(num_classes, 0);
  for (int i : indices) {
    require(records[i].label >= 0 && records[i].label < num_classes,
            "label_counts: label out of range");
    ++counts[records[i].label];
  }
  return counts;
}

}  // namespace mref
