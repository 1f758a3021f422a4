// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mref/common.hpp"
#include "mref/metrics.hpp"
#include "mref/rng.hpp"

using namespace mref;

namespace {

/// Exhaustive positive/negative pair counting with half credit on ties. The
/// rank-sum implementation must reproduce this exactly.
double pairwise_macro_auroc(const Matrix& scores, const std::vector<int>& labels,
                            int num_classes) {
  double total = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    double wins = 0.0;
    long pairs = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != c) continue;
      for (std::size_t j = 0; j < labels.size(); ++j) {
        if (labels[j] == c) continue;
        ++pairs;
        const double si = scores.at(static_cast<int>(i), c);
        const double sj = scores.at(static_cast<int>(j), c);
        if (si > sj)
          wins += 1.0;
        else if (si == sj)
          wins += 0.5;
      }
    }
    total += wins / static_cast<double>(pairs);
  }
  return total / static_cast<double>(num_classes);
}

/// Average rank of element i computed by direct counting.
double naive_rank(const std::vector<double>& v, std::size_t i) {
  double less = 0.0, equal = 0.0;
  for (double x : v) {
    if (x < v[i]) ++less;
    if (x == v[i]) ++equal;
  }
  return less + 0.5 * (equal + 1.0);
}

double naive_spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  std::vector<double> ra(n), rb(n);
  for (std::size_t i = 0; i < n; ++i) {
    ra[i] = naive_rank(a, i);
    rb[i] = naive_rank(b, i);
  }
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return cov / std::sqrt(va * vb);
}

}  // namespace

TEST_CASE("argmax breaks ties toward the lowest class index") {
  CHECK(argmax_class(std::vector<double>{0.1, 0.7, 0.2}) == 1);
  CHECK(argmax_class(std::vector<double>{0.4, 0.4, 0.2}) == 0);
  CHECK(argmax_class(std::vector<double>{0.1, 0.5, 0.5}) == 1);
  CHECK(argmax_class(std::vector<double>{2.0}) == 0);
  CHECK_THROWS_AS(argmax_class(std::vector<double>{}), Error);
}

TEST_CASE("accuracy is the exact hit fraction") {
  CHECK(accuracy({1, 1, 0, 2}, {1, 0, 0, 2}) == 0.75);
  CHECK(accuracy({0, 0}, {1, 1}) == 0.0);
  CHECK(accuracy({2, 2}, {2, 2}) == 1.0);
  CHECK_THROWS_AS(accuracy({}, {}), Error);
  CHECK_THROWS_AS(accuracy({0}, {0, 1}), Error);
}

TEST_CASE("confusion matrix rows are true classes, columns predictions") {
  auto m = confusion_matrix({0, 1, 1, 2}, {0, 1, 2, 2}, 3);
  CHECK(m[0][0] == 1);
  CHECK(m[1][1] == 1);
  CHECK(m[2][1] == 1);
  CHECK(m[2][2] == 1);
  int total = 0;
  for (const auto& row : m)
    for (int x : row) total += x;
  CHECK(total == 4);
  CHECK_THROWS_AS(confusion_matrix({3}, {0}, 3), Error);
}

TEST_CASE("macro F1 averages per-class harmonic means, zero on empty classes") {
  // Classes: perfect, precision 1/2, recall 1/2.
  const double f = macro_f1({0, 1, 1, 2}, {0, 1, 2, 2}, 3);
  CHECK(std::abs(f - (1.0 + 2.0 / 3.0 + 2.0 / 3.0) / 3.0) <= 1e-15);

  // A class absent from both preds and labels contributes zero, not NaN.
  const double g = macro_f1({0, 1, 0}, {0, 0, 1}, 3);
  CHECK(std::abs(g - 0.5 / 3.0) <= 1e-15);

  CHECK(macro_f1({1, 0, 2}, {1, 0, 2}, 3) == 1.0);
}

TEST_CASE("macro AUROC: frozen worked example with a decisive 8/9") {
  Matrix scores(6, 2);
  const std::vector<double> s1 = {0.9, 0.8, 0.4, 0.1, 0.2, 0.5};
  for (int i = 0; i < 6; ++i) {
    scores.at(i, 1) = s1[i];
    scores.at(i, 0) = 1.0 - s1[i];
  }
  const std::vector<int> labels = {1, 1, 1, 0, 0, 0};
  CHECK(macro_auroc(scores, labels, 2) == 8.0 / 9.0);

  // Perfect separation and total reversal.
  Matrix sep(4, 2);
  for (int i = 0; i < 4; ++i) {
    sep.at(i, 1) = i < 2 ? 0.9 : 0.1;
    sep.at(i, 0) = 1.0 - sep.at(i, 1);
  }
  CHECK(macro_auroc(sep, {1, 1, 0, 0}, 2) == 1.0);
  CHECK(macro_auroc(sep, {0, 0, 1, 1}, 2) == 0.0);

  // All-tied scores give exactly chance level.
  Matrix flat(5, 2);
  for (int i = 0; i < 5; ++i) flat.at(i, 0) = flat.at(i, 1) = 0.5;
  CHECK(macro_auroc(flat, {0, 1, 0, 1, 0}, 2) == 0.5);
}

TEST_CASE("rank-sum AUROC equals exhaustive pair counting") {
  Rng rng(61);
  for (int trial = 0; trial < 300; ++trial) {
    const int C = 2 + static_cast<int>(rng.bounded(3));
    const int n = C + 2 + static_cast<int>(rng.bounded(30));
    std::vector<int> labels(n);
    for (int c = 0; c < C; ++c) labels[c] = c;  // each class present
    for (int i = C; i < n; ++i) labels[i] = static_cast<int>(rng.bounded(C));
    Matrix scores(n, C);
    // Coarse grid scores force plenty of ties.
    for (double& x : scores.data)
      x = static_cast<double>(rng.bounded(8)) / 8.0;
    const double got = macro_auroc(scores, labels, C);
    const double want = pairwise_macro_auroc(scores, labels, C);
    CHECK(std::abs(got - want) <= 1e-12);
  }
}

TEST_CASE("AUROC refuses evaluation sets missing a class") {
  Matrix scores(3, 2);
  CHECK_THROWS_AS(macro_auroc(scores, {0, 0, 0}, 2), Error);
  CHECK_THROWS_AS(macro_auroc(scores, {0, 1}, 2), Error);  // length mismatch
}

TEST_CASE("evaluate composes the individual metrics verbatim") {
  Rng rng(67);
  const int n = 40, C = 3;
  Matrix scores(n, C);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    labels[i] = i % C;
    for (int c = 0; c < C; ++c) scores.at(i, c) = rng.uniform01();
  }
  EvalResult r = evaluate(scores, labels, C);

  std::vector<int> preds(n);
  for (int i = 0; i < n; ++i)
    preds[i] = argmax_class(std::span<const double>(scores.row(i), C));
  CHECK(r.auroc_macro == macro_auroc(scores, labels, C));
  CHECK(r.accuracy == accuracy(preds, labels));
  CHECK(r.f1_macro == macro_f1(preds, labels, C));
  CHECK(r.confusion == confusion_matrix(preds, labels, C));
}

TEST_CASE("fold summaries use the sample standard deviation") {
  EvalResult a, b;
  a.auroc_macro = 0.8;
  a.accuracy = 0.7;
  a.f1_macro = 0.6;
  b.auroc_macro = 0.9;
  b.accuracy = 0.8;
  b.f1_macro = 0.7;
  FoldSummary s = summarize_folds({a, b});
  CHECK(std::abs(s.auroc_mean - 0.85) <= 1e-15);
  CHECK(std::abs(s.auroc_sd - 0.070710678118654752) <= 1e-12);
  CHECK(std::abs(s.accuracy_mean - 0.75) <= 1e-15);
  CHECK(std::abs(s.f1_mean - 0.65) <= 1e-15);
  CHECK(!s.sd_degenerate);

  FoldSummary one = summarize_folds({a});
  CHECK(one.auroc_mean == 0.8);
  CHECK(one.auroc_sd == 0.0);
  CHECK(one.sd_degenerate);

  // Four equal folds: zero spread.
  FoldSummary same = summarize_folds({a, a, a, a});
  CHECK(same.auroc_mean == 0.8);
  CHECK(same.auroc_sd == 0.0);

  CHECK_THROWS_AS(summarize_folds({}), Error);
}

TEST_CASE("spearman: frozen tie example and boundary correlations") {
  // Ranks 1,2,3,4 against 1,2.5,2.5,4.
  CHECK(std::abs(spearman({1, 2, 3, 4}, {10, 20, 20, 30}) -
                 0.94868329805051377) <= 1e-15);
  CHECK(std::abs(spearman({1, 2, 3}, {5, 6, 9}) - 1.0) <= 1e-15);
  CHECK(std::abs(spearman({1, 2, 3}, {9, 6, 5}) + 1.0) <= 1e-15);
  CHECK_THROWS_AS(spearman({1, 1, 1}, {1, 2, 3}), Error);
  CHECK_THROWS_AS(spearman({1}, {1}), Error);
  CHECK_THROWS_AS(spearman({1, 2}, {1, 2, 3}), Error);
}

TEST_CASE("spearman is invariant under strictly monotone transforms") {
  Rng rng(71);
  std::vector<double> a(20), b(20);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = rng.normal();
    b[i] = rng.normal();
  }
  const double base = spearman(a, b);
  std::vector<double> ea(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) ea[i] = std::exp(a[i]);
  // Same ranks, bit-identical correlation.
  CHECK(spearman(ea, b) == base);
}

TEST_CASE("spearman with ties equals the direct-ranking oracle") {
  Rng rng(73);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(rng.bounded(30));
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = static_cast<double>(rng.bounded(6));
      b[i] = static_cast<double>(rng.bounded(6));
    }
    // Skip draws that are constant in either series.
    bool const_a = true, const_b = true;
    for (int i = 1; i < n; ++i) {
      const_a = const_a && a[i] == a[0];
      const_b = const_b && b[i] == b[0];
    }
    if (const_a || const_b) continue;
    CHECK(std::abs(spearman(a, b) - naive_spearman(a, b)) <= 1e-12);
  }
}
