#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iostream>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "dhmp/errors.hpp"
#include "dhmp/graph.hpp"
#include "dhmp/matrix.hpp"

namespace dhmp {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct MetricsReport {
  double auc = 0.0;
  double recall = 0.0;
  double f1_macro = 0.0;
  double gmean = 0.0;
  Confusion confusion;
};

/**
 * ROC AUC as the normalized Mann-Whitney U statistic, with tied scores
 * sharing their average rank. Returns NaN when only one class is present.
 */
inline double auc_mann_whitney(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ContractViolation("auc: scores/labels length mismatch");
  const std::size_t n = scores.size();
  for (double s : scores)
    if (std::isnan(s)) throw NumericalError("auc: NaN score");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // ranks i+1 .. j share their mean
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += avg;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::numeric_limits<double>::quiet_NaN();
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

inline Confusion confusion_matrix(std::span<const int> predicted, std::span<const int> labels) {
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      (predicted[i] == 1 ? c.tp : c.fn)++;
    } else {
      (predicted[i] == 1 ? c.fp : c.tn)++;
    }
  }
  return c;
}

namespace detail {
inline double ratio_or_nan(std::size_t num, std::size_t den) {
  return den == 0 ? std::numeric_limits<double>::quiet_NaN()
                  : static_cast<double>(num) / static_cast<double>(den);
}
// F1 = 2tp / (2tp + fp + fn); a class absent from both truth and
// prediction scores 1.
inline double f1_score(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t den = 2 * tp + fp + fn;
  return den == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(den);
}
}  // namespace detail

inline MetricsReport metrics_from_confusion(const Confusion& c) {
  MetricsReport r;
  r.confusion = c;
  const double tpr = detail::ratio_or_nan(c.tp, c.tp + c.fn);
  const double tnr = detail::ratio_or_nan(c.tn, c.tn + c.fp);
  r.recall = tpr;
  r.gmean = std::sqrt(tpr * tnr);
  r.f1_macro = 0.5 * (detail::f1_score(c.tp, c.fp, c.fn) + detail::f1_score(c.tn, c.fn, c.fp));
  return r;
}

// Metrics over `nodes` from an N x 2 probability matrix (column 1 = fraud).
// Hard prediction is the argmax, so a 0.5/0.5 row counts as benign.
inline MetricsReport evaluate(const Matrix& probs, std::span<const int> labels,
                              std::span<const NodeId> nodes) {
  if (nodes.empty()) throw ContractViolation("evaluate: empty node set");
  if (probs.cols() != 2) throw ContractViolation("evaluate: probabilities must be N x 2");
  std::vector<double> scores;
  std::vector<int> truth, predicted;
  scores.reserve(nodes.size());
  for (NodeId u : nodes) {
    if (u >= probs.rows()) throw ContractViolation("evaluate: node index out of range");
    scores.push_back(probs(u, 1));
    truth.push_back(labels[u]);
    predicted.push_back(probs(u, 1) > probs(u, 0) ? 1 : 0);
  }
  MetricsReport r = metrics_from_confusion(confusion_matrix(predicted, truth));
  r.auc = auc_mann_whitney(scores, truth);
  if (std::isnan(r.auc)) std::cerr << "warning: AUC undefined on a single-class node set\n";
  return r;
}

}  // namespace dhmp
