#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dhmp/metrics.hpp"
#include "metric_fixtures.hpp"

namespace dhmp {
namespace {

Matrix probs_from_scores(const std::vector<double>& fraud) {
  Matrix m(fraud.size(), 2);
  for (std::size_t i = 0; i < fraud.size(); ++i) {
    m(i, 0) = 1.0 - fraud[i];
    m(i, 1) = fraud[i];
  }
  return m;
}

std::vector<NodeId> all_nodes(std::size_t n) {
  std::vector<NodeId> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<NodeId>(i);
  return v;
}

TEST(Evaluate, PerfectRanking) {
  const std::vector<int> labels{1, 0};
  auto r = evaluate(probs_from_scores({0.9, 0.1}), labels, all_nodes(2));
  EXPECT_EQ(r.auc, 1.0);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.gmean, 1.0);
  EXPECT_EQ(r.f1_macro, 1.0);
}

TEST(Evaluate, ReversedRanking) {
  const std::vector<int> labels{1, 0};
  EXPECT_EQ(evaluate(probs_from_scores({0.1, 0.9}), labels, all_nodes(2)).auc, 0.0);
}

TEST(Evaluate, TiesCountHalf) {
  const std::vector<int> labels{1, 0};
  auto r = evaluate(probs_from_scores({0.5, 0.5}), labels, all_nodes(2));
  EXPECT_EQ(r.auc, 0.5);
  // argmax with an exact tie predicts benign
  EXPECT_EQ(r.confusion.fn, 1u);
  EXPECT_EQ(r.confusion.tn, 1u);
}

TEST(Evaluate, SingleClassAucIsNaN) {
  const std::vector<int> labels{0, 0, 0};
  EXPECT_TRUE(std::isnan(evaluate(probs_from_scores({0.2, 0.4, 0.9}), labels, all_nodes(3)).auc));
}

TEST(Evaluate, EmptyNodeSetRejected) {
  const std::vector<int> labels{0, 1};
  EXPECT_THROW(evaluate(probs_from_scores({0.2, 0.4}), labels, {}), ContractViolation);
}

TEST(Evaluate, SubsetOfNodesAndCountsSum) {
  const std::vector<int> labels{1, 0, 1, 0, 1};
  const std::vector<NodeId> nodes{0, 1, 3, 4};
  auto r = evaluate(probs_from_scores({0.8, 0.3, 0.0, 0.6, 0.4}), labels, nodes);
  EXPECT_EQ(r.confusion.total(), nodes.size());
  EXPECT_EQ(r.confusion, (Confusion{1, 1, 1, 1}));
  // positives {0.8, 0.4} vs negatives {0.3, 0.6}: 3 of 4 pairs concordant
  EXPECT_EQ(r.auc, 0.75);
}

TEST(Auc, NaNScoreIsNumericalError) {
  const std::vector<double> scores{0.1, std::nan(""), 0.7};
  const std::vector<int> labels{0, 1, 1};
  EXPECT_THROW(auc_mann_whitney(scores, labels), NumericalError);
}

TEST(Auc, MatchesBruteForcePairCounting) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> scores(20);
    std::vector<int> labels(20);
    // Coarse grid makes ties common.
    for (auto& s : scores) s = static_cast<double>(rng() % 7) / 6.0;
    for (auto& l : labels) l = static_cast<int>(rng() % 2);
    labels[0] = 1;
    labels[1] = 0;
    EXPECT_NEAR(auc_mann_whitney(scores, labels), testing::brute_force_auc(scores, labels), 1e-12);
  }
}

TEST(Metrics, HandComputedConfusionFixtures) {
  for (const auto& f : testing::kConfusionFixtures) {
    auto r = metrics_from_confusion({f.tp, f.fp, f.tn, f.fn});
    EXPECT_TRUE(testing::same_or_both_nan(r.recall, f.recall, 1e-15)) << f.tp << "," << f.fp << "," << f.tn << "," << f.fn;
    EXPECT_TRUE(testing::same_or_both_nan(r.gmean, f.gmean, 1e-15)) << f.tp << "," << f.fp;
    EXPECT_TRUE(testing::same_or_both_nan(r.f1_macro, f.f1_macro, 1e-15)) << f.tp << "," << f.fp;
  }
}

TEST(Metrics, ConfusionMatrixCounts) {
  const std::vector<int> pred{1, 1, 0, 0, 1};
  const std::vector<int> truth{1, 0, 0, 1, 1};
  EXPECT_EQ(confusion_matrix(pred, truth), (Confusion{2, 1, 1, 1}));
}

TEST(Metrics, ValuesInUnitInterval) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    Confusion c{rng() % 20 + 1, rng() % 20, rng() % 20 + 1, rng() % 20};
    auto r = metrics_from_confusion(c);
    for (double v : {r.recall, r.gmean, r.f1_macro}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

}  // namespace
}  // namespace dhmp
