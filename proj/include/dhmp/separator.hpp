#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dhmp/graph.hpp"
#include "dhmp/tensor.hpp"

namespace dhmp {

// Label access restricted to the training split. Anything that builds
// training targets goes through this view, so val/test labels cannot leak.
class MaskedLabels {
 public:
  MaskedLabels(std::span<const int> labels, std::span<const NodeId> train)
      : known_(labels.size(), -1) {
    for (NodeId u : train) {
      if (u >= labels.size()) throw ContractViolation("MaskedLabels: train index out of range");
      known_[u] = labels[u];
    }
    for (NodeId u : train) train_.push_back(u);
  }

  std::optional<int> label(NodeId u) const {
    if (u >= known_.size() || known_[u] < 0) return std::nullopt;
    return known_[u];
  }
  std::span<const NodeId> train_nodes() const noexcept { return train_; }
  std::size_t num_nodes() const noexcept { return known_.size(); }

 private:
  std::vector<int> known_;
  std::vector<NodeId> train_;
};

// Training edges of one relation with their targets: -1 same label, +1 different.
struct EdgeLabelSet {
  std::vector<std::size_t> edges;  // positions in the relation's edge order
  std::vector<int> targets;

  std::size_t size() const noexcept { return edges.size(); }
};

inline int edge_label(int label_u, int label_v) noexcept { return label_u == label_v ? -1 : 1; }

// Keeps only edges whose endpoints both carry a training label.
inline EdgeLabelSet edge_labels(const RelationAdjacency& adj, const MaskedLabels& labels) {
  EdgeLabelSet out;
  for (std::size_t e = 0; e < adj.edge_count(); ++e) {
    const auto lu = labels.label(adj.sources[e]);
    const auto lv = labels.label(adj.targets[e]);
    if (!lu || !lv) continue;
    out.edges.push_back(e);
    out.targets.push_back(edge_label(*lu, *lv));
  }
  return out;
}

// relu(X * W_s + b_s), with W_s stored d_in x d_h and b_s 1 x d_h.
inline Var project_features(const Var& features, const Var& w_s, const Var& b_s) {
  return relu(add_row_bias(matmul(features, w_s), b_s));
}

// kappa_e = tanh([h_u || h_v || h_u - h_v] * W_h) for every edge u -> v;
// W_h is (3 d_h) x 1, no bias. Returns E x 1.
//
// With W_h = [a; b; c] the pre-activation equals h_u (a + c) + h_v (b - c),
// so it is evaluated as two per-node scores gathered per edge.
inline Var edge_sign(const Var& projected, const RelationAdjacency& adj, const Var& w_h) {
  const std::size_t d = projected.cols();
  if (w_h.rows() != 3 * d || w_h.cols() != 1) {
    throw ContractViolation("edge_sign: W_h must be " + std::to_string(3 * d) + "x1, got " + w_h.value().shape());
  }
  Var a = slice_rows(w_h, 0, d);
  Var b = slice_rows(w_h, d, d);
  Var c = slice_rows(w_h, 2 * d, d);
  Var source_score = matmul(projected, add(a, c));
  Var target_score = matmul(projected, sub(b, c));
  return tanh(add(gather_rows(source_score, adj.sources), gather_rows(target_score, adj.targets)));
}

// Literal concatenation form of edge_sign, E x 3 d_h intermediate.
inline Var edge_sign_concat(const Var& projected, const RelationAdjacency& adj, const Var& w_h) {
  Var hu = gather_rows(projected, adj.sources);
  Var hv = gather_rows(projected, adj.targets);
  Var diff = sub(hu, hv);
  return tanh(matmul(concat_cols({hu, hv, diff}), w_h));
}

// Mean hinge max(1 - kappa * y, 0) over the selected training edges.
inline Var heterophily_loss(const Var& kappa, const EdgeLabelSet& labels,
                            std::span<const std::size_t> batch) {
  std::vector<std::size_t> rows;
  std::vector<int> targets;
  rows.reserve(batch.size());
  targets.reserve(batch.size());
  for (std::size_t k : batch) {
    rows.push_back(labels.edges[k]);
    targets.push_back(labels.targets[k]);
  }
  return hinge_loss_mean(kappa, rows, targets);
}

inline Var heterophily_loss(const Var& kappa, const EdgeLabelSet& labels) {
  std::vector<std::size_t> all(labels.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  return heterophily_loss(kappa, labels, all);
}

}  // namespace dhmp
