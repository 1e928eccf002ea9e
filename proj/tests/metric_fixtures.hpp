#pragma once

// Confusion matrices with metric values worked out by hand
// (recall = tp/(tp+fn), gmean = sqrt(TPR*TNR), F1-macro = mean of the two
// per-class F1 scores, an empty class scoring 1).

#include <cmath>
#include <cstddef>
#include <limits>

namespace dhmp::testing {

struct ConfusionFixture {
  std::size_t tp, fp, tn, fn;
  double recall, gmean, f1_macro;
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline constexpr ConfusionFixture kConfusionFixtures[] = {
    {5, 0, 5, 0, 1.0, 1.0, 1.0},
    {3, 1, 4, 2, 0.6, 0.69282032302755092, 0.69696969696969702},
    {0, 0, 10, 0, kNaN, kNaN, 1.0},
    {0, 5, 0, 5, 0.0, 0.0, 0.0},
    {10, 90, 0, 0, 1.0, 0.0, 0.090909090909090912},
    {1, 0, 99, 9, 0.1, 0.31622776601683794, 0.56916996047430835},
    {7, 3, 80, 10, 0.41176470588235292, 0.62998543175533406, 0.72168700492399918},
    {12, 20, 150, 4, 0.75, 0.81348921681996067, 0.71296296296296302},
    {50, 50, 50, 50, 0.5, 0.5, 0.5},
    {2, 1, 0, 3, 0.4, 0.0, 0.25},
};

inline bool same_or_both_nan(double a, double b, double tol) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::abs(a - b) <= tol;
}

// (concordant + 0.5 ties) / (pos * neg) over every positive/negative pair.
template <class Scores, class Labels>
double brute_force_auc(const Scores& scores, const Labels& labels) {
  double good = 0.0;
  std::size_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg)++;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) good += 1.0;
      else if (scores[i] == scores[j]) good += 0.5;
    }
  }
  return good / static_cast<double>(pos * neg);
}

}  // namespace dhmp::testing
