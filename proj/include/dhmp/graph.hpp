#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dhmp/errors.hpp"
#include "dhmp/matrix.hpp"

namespace dhmp {

using NodeId = std::uint32_t;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// One relation stored as CSR. For node u the out-neighbors are
// targets[offsets[u] .. offsets[u+1]); sources[e] is the row owning edge e.
struct RelationAdjacency {
  std::string name;
  std::vector<std::size_t> offsets{0};
  std::vector<NodeId> targets;
  std::vector<NodeId> sources;

  std::size_t num_nodes() const noexcept { return offsets.size() - 1; }
  std::size_t edge_count() const noexcept { return targets.size(); }
  std::span<const NodeId> neighbors(NodeId u) const noexcept {
    return {targets.data() + offsets[u], offsets[u + 1] - offsets[u]};
  }
};

struct NodeSplit {
  std::vector<NodeId> train;
  std::vector<NodeId> val;
  std::vector<NodeId> test;
};

struct MultiRelationGraph {
  Matrix features;           // N x d
  std::vector<int> labels;   // 0 benign, 1 fraud
  std::vector<RelationAdjacency> relations;
  NodeSplit split;

  std::size_t num_nodes() const noexcept { return labels.size(); }
  std::size_t feature_dim() const noexcept { return features.cols(); }
  std::size_t num_relations() const noexcept { return relations.size(); }
};

enum class EdgeSign : std::uint8_t { Homophilic, Heterophilic };

struct EdgePartition {
  std::vector<EdgeSign> signs;  // aligned with the parent relation's edge order
  RelationAdjacency homo;
  RelationAdjacency hetero;
  std::vector<std::size_t> homo_degrees;
  std::vector<std::size_t> hetero_degrees;
};

// Builds CSR from an edge list: self-loops dropped, duplicates removed,
// neighbors kept in the order they first appear.
inline RelationAdjacency build_csr(std::span<const Edge> edges, std::size_t num_nodes,
                                   std::string name = {}) {
  std::vector<Edge> kept;
  kept.reserve(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    if (e.src >= num_nodes || e.dst >= num_nodes) {
      throw LoadError("edge " + std::to_string(i) + " (" + std::to_string(e.src) + "," +
                      std::to_string(e.dst) + ") has an endpoint outside [0," +
                      std::to_string(num_nodes) + ")");
    }
    if (e.src != e.dst) kept.push_back(e);
  }
  // Drop later duplicates, then group by source keeping first-seen order.
  std::vector<std::size_t> order(kept.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return kept[a] != kept[b] ? kept[a] < kept[b] : a < b;
  });
  std::vector<char> duplicate(kept.size(), 0);
  for (std::size_t i = 1; i < order.size(); ++i)
    if (kept[order[i]] == kept[order[i - 1]]) duplicate[order[i]] = 1;
  std::vector<Edge> unique;
  unique.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i)
    if (!duplicate[i]) unique.push_back(kept[i]);
  std::stable_sort(unique.begin(), unique.end(), [](const Edge& a, const Edge& b) { return a.src < b.src; });
  kept = std::move(unique);

  RelationAdjacency adj;
  adj.name = std::move(name);
  adj.offsets.assign(num_nodes + 1, 0);
  adj.targets.reserve(kept.size());
  adj.sources.reserve(kept.size());
  for (const Edge& e : kept) {
    ++adj.offsets[e.src + 1];
    adj.targets.push_back(e.dst);
    adj.sources.push_back(e.src);
  }
  for (std::size_t u = 0; u < num_nodes; ++u) adj.offsets[u + 1] += adj.offsets[u];
  return adj;
}

inline std::vector<Edge> flatten(const RelationAdjacency& adj) {
  std::vector<Edge> out;
  out.reserve(adj.edge_count());
  for (std::size_t e = 0; e < adj.edge_count(); ++e) out.push_back({adj.sources[e], adj.targets[e]});
  return out;
}

inline std::vector<Edge> symmetrize(std::span<const Edge> edges) {
  std::vector<Edge> out;
  out.reserve(2 * edges.size());
  for (const Edge& e : edges) {
    out.push_back(e);
    out.push_back({e.dst, e.src});
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::vector<std::size_t> degrees(const RelationAdjacency& adj) {
  std::vector<std::size_t> out(adj.num_nodes());
  for (std::size_t u = 0; u < out.size(); ++u) out[u] = adj.offsets[u + 1] - adj.offsets[u];
  return out;
}

// Sign rule: kappa >= 0 goes to the heterophilic side (ties included).
inline EdgeSign sign_of(double kappa) noexcept {
  return kappa >= 0.0 ? EdgeSign::Heterophilic : EdgeSign::Homophilic;
}

inline EdgePartition partition_subgraphs(const RelationAdjacency& adj,
                                         std::span<const double> kappa) {
  if (kappa.size() != adj.edge_count()) {
    throw ContractViolation("partition_subgraphs: " + std::to_string(kappa.size()) +
                            " scores for " + std::to_string(adj.edge_count()) + " edges");
  }
  std::vector<EdgeSign> signs(kappa.size());
  std::transform(kappa.begin(), kappa.end(), signs.begin(), sign_of);

  const std::size_t n = adj.num_nodes();
  EdgePartition part;
  part.homo.name = adj.name + "+";
  part.hetero.name = adj.name + "-";
  part.homo.offsets.assign(n + 1, 0);
  part.hetero.offsets.assign(n + 1, 0);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t e = adj.offsets[u]; e < adj.offsets[u + 1]; ++e) {
      RelationAdjacency& side = signs[e] == EdgeSign::Homophilic ? part.homo : part.hetero;
      side.targets.push_back(adj.targets[e]);
      side.sources.push_back(static_cast<NodeId>(u));
    }
    part.homo.offsets[u + 1] = part.homo.targets.size();
    part.hetero.offsets[u + 1] = part.hetero.targets.size();
  }
  part.homo_degrees = degrees(part.homo);
  part.hetero_degrees = degrees(part.hetero);
  part.signs = std::move(signs);
  return part;
}

// Union of all relations as a single relation (used when relation
// information is discarded).
inline RelationAdjacency merge_relations(std::span<const RelationAdjacency> relations,
                                         std::size_t num_nodes) {
  std::vector<Edge> all;
  for (const auto& r : relations) {
    auto flat = flatten(r);
    all.insert(all.end(), flat.begin(), flat.end());
  }
  return build_csr(all, num_nodes, "union");
}

// Per-class shuffle, then floor(train_frac*n) train, floor(val_frac*n) val,
// remainder test.
inline NodeSplit stratified_split(std::span<const int> labels, double train_frac,
                                  double val_frac, std::uint64_t seed) {
  if (train_frac <= 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0) {
    throw ConfigError("stratified_split: invalid fractions");
  }
  std::mt19937_64 rng(seed);
  NodeSplit split;
  for (int cls : {0, 1}) {
    std::vector<NodeId> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(static_cast<NodeId>(i));
    std::shuffle(members.begin(), members.end(), rng);
    const auto n = members.size();
    const auto n_train = static_cast<std::size_t>(train_frac * static_cast<double>(n));
    const auto n_val = static_cast<std::size_t>(val_frac * static_cast<double>(n));
    split.train.insert(split.train.end(), members.begin(), members.begin() + n_train);
    split.val.insert(split.val.end(), members.begin() + n_train,
                     members.begin() + n_train + n_val);
    split.test.insert(split.test.end(), members.begin() + n_train + n_val, members.end());
  }
  for (auto* part : {&split.train, &split.val, &split.test}) std::sort(part->begin(), part->end());
  return split;
}

inline void validate(const MultiRelationGraph& g) {
  const std::size_t n = g.num_nodes();
  if (g.features.rows() != n) {
    throw LoadError("features have " + std::to_string(g.features.rows()) + " rows for " +
                    std::to_string(n) + " nodes");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (g.labels[i] != 0 && g.labels[i] != 1) {
      throw LoadError("label of node " + std::to_string(i) + " is " +
                      std::to_string(g.labels[i]) + ", expected 0 or 1");
    }
  }
  if (g.relations.empty()) throw LoadError("graph has no relations");
  for (const auto& r : g.relations) {
    if (r.num_nodes() != n) throw LoadError("relation '" + r.name + "' has wrong node count");
    for (NodeId t : r.targets)
      if (t >= n) throw LoadError("relation '" + r.name + "' has an out-of-range target");
  }
  std::vector<char> seen(n, 0);
  for (const auto* part : {&g.split.train, &g.split.val, &g.split.test}) {
    for (NodeId u : *part) {
      if (u >= n) throw LoadError("split index " + std::to_string(u) + " out of range");
      if (seen[u]) throw LoadError("node " + std::to_string(u) + " appears in two splits");
      seen[u] = 1;
    }
  }
  if (g.split.train.empty()) throw LoadError("train split is empty");
}

}  // namespace dhmp
