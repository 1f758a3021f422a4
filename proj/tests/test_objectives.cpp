// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mref/common.hpp"
#include "mref/loss.hpp"
#include "mref/moe_model.hpp"
#include "mref/rng.hpp"
#include "fd_check.hpp"

using namespace mref;

namespace {

/// Straightforward quadratic-time re-statement of the diversity penalty,
/// kept deliberately independent of the library implementation.
double naive_diversity(const Matrix& h, const std::vector<std::uint8_t>& mask) {
  std::vector<int> active;
  for (int m = 0; m < h.rows; ++m)
    if (mask[m]) active.push_back(m);
  if (active.size() < 2) return 0.0;

  std::vector<std::vector<double>> rows(h.rows);
  std::vector<double> norms(h.rows, 0.0);
  for (int m : active) {
    double mean = 0.0;
    for (int c = 0; c < h.cols; ++c) mean += h.at(m, c);
    mean /= h.cols;
    rows[m].resize(h.cols);
    double sq = 0.0;
    for (int c = 0; c < h.cols; ++c) {
      rows[m][c] = h.at(m, c) - mean;
      sq += rows[m][c] * rows[m][c];
    }
    norms[m] = std::sqrt(sq);
  }

  double acc = 0.0;
  int pairs = 0;
  for (std::size_t a = 0; a < active.size(); ++a)
    for (std::size_t b = a + 1; b < active.size(); ++b) {
      ++pairs;
      const int i = active[a], j = active[b];
      if (norms[i] < 1e-12 || norms[j] < 1e-12) continue;
      double dot = 0.0;
      for (int c = 0; c < h.cols; ++c) dot += rows[i][c] * rows[j][c];
      double cos = dot / (norms[i] * norms[j]);
      acc += cos * cos;
    }
  return acc / pairs;
}

Matrix random_matrix(Rng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  for (double& x : m.data) x = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("class weights are inverse frequencies scaled by the class count") {
  std::vector<double> w = class_weights_from_counts({2, 1, 1});
  CHECK(w[0] == 0.66666666666666663);
  CHECK(w[1] == 1.3333333333333333);
  CHECK(w[2] == 1.3333333333333333);

  std::vector<double> skew = class_weights_from_counts({1, 99});
  CHECK(skew[0] == 50.0);
  CHECK(skew[1] == 0.50505050505050508);

  // Balanced counts give exactly unit weights.
  for (double x : class_weights_from_counts({7, 7, 7, 7})) CHECK(x == 1.0);

  // Reweighted dataset mass equals the raw count in every case.
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> counts(2 + rng.bounded(5));
    long total = 0;
    for (int& c : counts) {
      c = 1 + static_cast<int>(rng.bounded(500));
      total += c;
    }
    std::vector<double> weights = class_weights_from_counts(counts);
    double mass = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) mass += weights[i] * counts[i];
    CHECK(std::abs(mass - static_cast<double>(total)) <=
          1e-9 * static_cast<double>(total));
  }

  CHECK_THROWS_AS(class_weights_from_counts({3, 0}), Error);
  CHECK_THROWS_AS(class_weights_from_counts({}), Error);
}

TEST_CASE("weighted cross-entropy matches hand values and floors the probability") {
  std::vector<double> probs = {0.2, 0.3, 0.5};
  std::vector<double> unit = {1.0, 1.0, 1.0};
  CHECK(weighted_ce(probs, 0, unit) == 1.6094379124341003);

  std::vector<double> w = {2.5, 1.0, 1.0};
  CHECK(weighted_ce(probs, 0, w) == 2.5 * 1.6094379124341003);

  // Zero probability is floored at 1e-12 instead of producing infinity.
  std::vector<double> degenerate = {0.0, 1.0, 0.0};
  CHECK(weighted_ce(degenerate, 0, unit) == 27.631021115928547);
  CHECK(std::isfinite(weighted_ce(degenerate, 2, unit)));

  CHECK(weighted_ce(std::vector<double>{1.0, 0.0}, 0,
                    std::vector<double>{3.0, 1.0}) == 0.0);
  CHECK_THROWS_AS(weighted_ce(probs, 3, unit), Error);
  CHECK_THROWS_AS(weighted_ce(probs, 0, std::vector<double>{1.0}), Error);
}

TEST_CASE("cross-entropy logit gradient matches finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int C = 2 + static_cast<int>(rng.bounded(4));
    std::vector<double> z(C);
    for (double& x : z) x = rng.uniform(-2.0, 2.0);
    std::vector<double> weights(C);
    for (double& x : weights) x = rng.uniform(0.5, 2.0);
    const int label = static_cast<int>(rng.bounded(C));

    std::vector<double> probs = stable_softmax(z);
    std::vector<double> analytic = ce_fused_gradient(probs, label, weights);

    double sum = 0.0;
    for (double g : analytic) sum += g;
    CHECK(std::abs(sum) <= 1e-14);

    auto f = [&]() { return weighted_ce(stable_softmax(z), label, weights); };
    auto report = mref::testing::fd_check_fn(f, z.data(), analytic.data(), C, "z");
    CHECK_MESSAGE(report.ok, "worst ", report.worst_abs, " at ", report.worst_at);
  }
}

TEST_CASE("gate entropy agrees with closed forms") {
  CHECK(gate_entropy(std::vector<double>{1.0, 0.0, 0.0}) == 0.0);
  double third = 1.0 / 3.0;
  CHECK(std::abs(gate_entropy(std::vector<double>{third, third, third}) -
                 1.0986122886681098) <= 1e-15);
  CHECK(std::abs(gate_entropy(std::vector<double>{0.5, 0.0, 0.5, 0.0}) -
                 0.69314718055994529) <= 1e-15);
  CHECK_THROWS_AS(gate_entropy(std::vector<double>{-0.1, 1.1}), Error);
}

TEST_CASE("gate entropy gradient: finite differences on positive entries") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 3 + static_cast<int>(rng.bounded(4));
    std::vector<double> g(n);
    for (double& x : g) x = rng.uniform(0.05, 1.0);

    std::vector<double> analytic = gate_entropy_grad(g);
    auto f = [&]() { return gate_entropy(g); };
    auto report = mref::testing::fd_check_fn(f, g.data(), analytic.data(), n, "g");
    CHECK_MESSAGE(report.ok, "worst ", report.worst_abs, " at ", report.worst_at);
  }
  // Zero entries are fixed points of the gate and carry zero gradient.
  std::vector<double> grad = gate_entropy_grad(std::vector<double>{0.5, 0.0, 0.5});
  CHECK(grad[1] == 0.0);
}

TEST_CASE("diversity penalty equals the naive pairwise mean") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const int N = 2 + static_cast<int>(rng.bounded(6));
    const int C = 2 + static_cast<int>(rng.bounded(4));
    Matrix h = random_matrix(rng, N, C);
    std::vector<std::uint8_t> mask(N);
    for (auto& m : mask) m = rng.bounded(4) ? 1 : 0;
    CHECK(std::abs(diversity_penalty(h, mask) - naive_diversity(h, mask)) <= 1e-12);
  }
}

TEST_CASE("diversity penalty: identical, orthogonal and degenerate rows") {
  Matrix same(2, 3);
  for (int c = 0; c < 3; ++c) {
    same.at(0, c) = c;
    same.at(1, c) = c;  // identical direction, cos = 1
  }
  CHECK(std::abs(diversity_penalty(same, {1, 1}) - 1.0) <= 1e-15);

  Matrix anti = same;
  for (int c = 0; c < 3; ++c) anti.at(1, c) = -anti.at(1, c);  // cos = -1
  CHECK(std::abs(diversity_penalty(anti, {1, 1}) - 1.0) <= 1e-15);

  Matrix ortho(2, 2);
  ortho.at(0, 0) = 1.0;
  ortho.at(0, 1) = -1.0;  // centered (1, -1)
  ortho.at(1, 0) = 5.0;
  ortho.at(1, 1) = 5.0;  // centered (0, 0): norm floor, treated orthogonal
  CHECK(diversity_penalty(ortho, {1, 1}) == 0.0);

  // Fewer than two active rows always scores zero.
  CHECK(diversity_penalty(same, {1, 0}) == 0.0);
  CHECK(diversity_penalty(same, {0, 0}) == 0.0);

  // Penalty is scale-invariant per row.
  Rng rng(29);
  Matrix h = random_matrix(rng, 3, 4);
  double base = diversity_penalty(h, {1, 1, 1});
  for (int c = 0; c < 4; ++c) h.at(1, c) *= 37.0;
  CHECK(std::abs(diversity_penalty(h, {1, 1, 1}) - base) <= 1e-12);
}

TEST_CASE("diversity gradient matches finite differences, inactive rows get zero") {
  Rng rng(37);
  for (int trial = 0; trial < 30; ++trial) {
    const int N = 3 + static_cast<int>(rng.bounded(3));
    const int C = 2 + static_cast<int>(rng.bounded(3));
    Matrix h = random_matrix(rng, N, C);
    std::vector<std::uint8_t> mask(N, 1);
    mask[rng.bounded(N)] = 0;

    Matrix analytic = diversity_grad(h, mask);
    auto f = [&]() { return diversity_penalty(h, mask); };
    auto report = mref::testing::fd_check_fn(f, h.data.data(), analytic.data.data(),
                                             static_cast<int>(h.data.size()), "h");
    CHECK_MESSAGE(report.ok, "worst ", report.worst_abs, " at ", report.worst_at);

    for (int m = 0; m < N; ++m)
      if (!mask[m])
        for (int c = 0; c < C; ++c) CHECK(analytic.at(m, c) == 0.0);
  }
}

TEST_CASE("loss breakdown composes exactly from its parts") {
  FeatureSchema schema;
  schema.modalities = {
      {"a", {{"r1", {"a1", "a2"}}, {"r2", {"a3", "a4"}}}},
      {"b", {{"r1", {"b1", "b2", "b3"}}}},
  };
  MoeModelOptions options;
  options.num_classes = 3;
  options.hidden_dims = {4, 3};
  MoeModel model(schema, options, 99);

  LossConfig loss;
  loss.lambda_sparsity = 0.07;
  loss.lambda_diversity = 0.003;
  loss.class_weights = {1.2, 0.9, 1.0};

  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    SubjectRecord rec;
    rec.id = "t";
    rec.label = static_cast<int>(rng.bounded(3));
    rec.blocks = {{rng.normal(), rng.normal()},
                  {rng.normal(), rng.normal()},
                  {rng.normal(), rng.normal(), rng.normal()}};
    rec.available = {1, 1};

    LossBreakdown b = model.sample_loss(rec, loss);
    CHECK(b.total == b.cross_entropy + loss.lambda_sparsity * b.sparsity +
                         loss.lambda_diversity * b.diversity);

    // Each component equals its standalone recomputation.
    Prediction pred = model.predict(rec);
    CHECK(b.cross_entropy ==
          weighted_ce(pred.class_probs, rec.label, loss.class_weights));
    CHECK(b.sparsity == gate_entropy(pred.gate.weights));
    CHECK(b.diversity == diversity_penalty(pred.expert_logits, pred.gate.active_mask));
  }

  // Zero lambdas leave only the cross-entropy term.
  LossConfig plain;
  plain.lambda_sparsity = 0.0;
  plain.lambda_diversity = 0.0;
  plain.class_weights = {1.0, 1.0, 1.0};
  SubjectRecord rec;
  rec.id = "t";
  rec.label = 1;
  rec.blocks = {{0.1, -0.2}, {0.3, 0.4}, {-0.5, 0.6, 0.7}};
  rec.available = {1, 1};
  LossBreakdown b = model.sample_loss(rec, plain);
  CHECK(b.total == b.cross_entropy);
}
