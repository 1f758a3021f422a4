// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "mref/nn.hpp"

namespace mref {

/// Argmax with ties resolved to the lowest class index.
int argmax_class(std::span<const double> probs);

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels);

/// Unweighted mean of per-class F1; 0/0 precision, recall, or F1 counts as 0.
double macro_f1(const std::vector<int>& preds, const std::vector<int>& labels,
                int num_classes);

/// One-vs-rest AUROC per class via the rank-sum form of the Mann-Whitney
/// statistic (average ranks give ties exactly 0.5 credit), macro-averaged.
/// Every class must appear in labels.
double macro_auroc(const Matrix& scores, const std::vector<int>& labels,
                   int num_classes);

/// confusion[true][pred].
std::vector<std::vector<int>> confusion_matrix(const std::vector<int>& preds,
                                               const std::vector<int>& labels,
                                               int num_classes);

struct EvalResult {
  double auroc_macro = 0.0;
  double accuracy = 0.0;
  double f1_macro = 0.0;
  std::vector<std::vector<int>> confusion;
};

EvalResult evaluate(const Matrix& scores, const std::vector<int>& labels,
                    int num_classes);

struct FoldSummary {
  std::vector<EvalResult> per_fold;
  double auroc_mean = 0.0, auroc_sd = 0.0;
  double accuracy_mean = 0.0, accuracy_sd = 0.0;
  double f1_mean = 0.0, f1_sd = 0.0;
  bool sd_degenerate = false;  // fewer than 2 folds: SDs reported as 0
};

/// Mean and sample (n-1) standard deviation across folds.
FoldSummary summarize_folds(const std::vector<EvalResult>& results);

/// Spearman rank correlation with average ranks on ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace mref
