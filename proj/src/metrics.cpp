// SPDX-License-Identifier: Apache-2.0
#include "mref/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mref/common.hpp"

namespace mref {

int argmax_class(std::span<const double> probs) {
  require(!probs.empty(), "argmax_class: empty input");
  int best = 0;
  for (int i = 1; i < static_cast<int>(probs.size()); ++i)
    if (probs[i] > probs[best]) best = i;
  return best;
}

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
  require(!labels.empty(), "accuracy: empty input");
  require(preds.size() == labels.size(), "accuracy: length mismatch");
  long hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (preds[i] == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::vector<std::vector<int>> confusion_matrix(const std::vector<int>& preds,
                                               const std::vector<int>& labels,
                                               int num_classes) {
  require(preds.size() == labels.size(), "confusion_matrix: length mismatch");
  std::vector<std::vector<int>> m(num_classes, std::vector<int>(num_classes, 0));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < num_classes &&
                preds[i] >= 0 && preds[i] < num_classes,
            "confusion_matrix: class index out of range");
    ++m[labels[i]][preds[i]];
  }
  return m;
}

double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels,
                int num_classes) {
  require(!labels.empty(), "macro_f1: empty input");
  const auto m = confusion_matrix(preds, labels, num_classes);
  double total = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    long tp = m[c][c];
    long pred_pos = 0, actual_pos = 0;
    for (int j = 0; j < num_classes; ++j) {
      pred_pos += m[j][c];
      actual_pos += m[c][j];
    }
    const double precision = pred_pos > 0 ? static_cast<double>(tp) / pred_pos : 0.0;
    const double recall = actual_pos > 0 ? static_cast<double>(tp) / actual_pos : 0.0;
    const double f1 =
        precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall)
                                 : 0.0;
    total += f1;
  }
  return total / static_cast<double>(num_classes);
}

namespace {

/// AUROC for one class from its score column: rank-sum with average ranks.
/// Ties between a positive and a negative then contribute exactly 0.5 each,
/// identical to exhaustive pair counting.
double binary_auroc(const std::vector<double>& scores,
                    const std::vector<std::uint8_t>& positive) {
  const std::size_t n = scores.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  long n_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t t = i; t <= j; ++t) {
      if (positive[order[t]]) {
        rank_sum_pos += avg_rank;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const long n_neg = static_cast<long>(n) - n_pos;
  require(n_pos > 0 && n_neg > 0, "auroc: class missing positives or negatives");
  const double pairs_won =
      rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return pairs_won / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace

double macro_auroc(const Matrix& scores, const std::vector<int>& labels,
                   int num_classes) {
  require(num_classes >= 2, "macro_auroc: need at least two classes");
  require(scores.rows == static_cast<int>(labels.size()),
          "macro_auroc: scores/labels length mismatch");
  require(scores.cols == num_classes, "macro_auroc: score column count mismatch");
  std::vector<int> counts(num_classes, 0);
  for (int y : labels) {
    require(y >= 0 && y < num_classes, "macro_auroc: label out of range");
    ++counts[y];
  }
  for (int c = 0; c < num_classes; ++c)
    require(counts[c] > 0, "macro_auroc: class " + std::to_string(c) +
                               " absent from labels; stratify the evaluation set");
  double total = 0.0;
  std::vector<double> col(labels.size());
  std::vector<std::uint8_t> positive(labels.size());
  for (int c = 0; c < num_classes; ++c) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      col[i] = scores.at(static_cast<int>(i), c);
      positive[i] = labels[i] == c;
    }
    total += binary_auroc(col, positive);
  }
  return total / static_cast<double>(num_classes);
}

EvalResult evaluate(const Matrix& scores, const std::vector<int>& labels,
                    int num_classes) {
  std::vector<int> preds(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double* row = scores.row(static_cast<int>(i));
    preds[i] = argmax_class(std::span<const double>(row, scores.cols));
  }
  EvalResult r;
  r.auroc_macro = macro_auroc(scores, labels, num_classes);
  r.accuracy = accuracy(preds, labels);
  r.f1_macro = macro_f1(preds, labels, num_classes);
  r.confusion = confusion_matrix(preds, labels, num_classes);
  return r;
}

namespace {

void mean_sd(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) {
    sd = 0.0;
    return;
  }
  double sq = 0.0;
  for (double x : xs) sq += (x - mean) * (x - mean);
  sd = std::sqrt(sq / static_cast<double>(xs.size() - 1));
}

}  // namespace

FoldSummary summarize_folds(const std::vector<EvalResult>& results) {
  require(!results.empty(), "summarize_folds: no fold results");
  FoldSummary s;
  s.per_fold = results;
  s.sd_degenerate = results.size() < 2;
  std::vector<double> auroc, acc, f1;
  for (const EvalResult& r : results) {
    auroc.push_back(r.auroc_macro);
    acc.push_back(r.accuracy);
    f1.push_back(r.f1_macro);
  }
  mean_sd(auroc, s.auroc_mean, s.auroc_sd);
  mean_sd(acc, s.accuracy_mean, s.accuracy_sd);
  mean_sd(f1, s.f1_mean, s.f1_sd);
  return s;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size() && a.size() >= 2, "spearman: need two equal-length series");
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= static_cast<double>(ra.size());
  mb /= static_cast<double>(rb.size());
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  require(va > 0.0 && vb > 0.0, "spearman: constant series has no rank correlation");
  return cov / std::sqrt(va * vb);
}

}  // namespace mref
