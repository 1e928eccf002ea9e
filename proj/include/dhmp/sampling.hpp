#pragma once

#include <algorithm>
#include <cstddef>
#include <iterator>
#include <random>
#include <vector>

#include "dhmp/errors.hpp"
#include "dhmp/graph.hpp"
#include "dhmp/separator.hpp"

namespace dhmp {

// Every minority-class train node plus an equal-size uniform sample (without
// replacement) of the majority class. Sorted by node id.
template <class Rng>
std::vector<NodeId> balanced_node_sample(const MaskedLabels& labels, Rng& rng) {
  std::vector<NodeId> fraud, benign;
  for (NodeId u : labels.train_nodes()) (*labels.label(u) == 1 ? fraud : benign).push_back(u);
  if (fraud.empty() || benign.empty()) {
    throw ConfigError("balanced_node_sample: train split must contain both classes");
  }
  auto& minority = fraud.size() <= benign.size() ? fraud : benign;
  auto& majority = fraud.size() <= benign.size() ? benign : fraud;
  std::vector<NodeId> batch = minority;
  std::sample(majority.begin(), majority.end(), std::back_inserter(batch), minority.size(), rng);
  std::sort(batch.begin(), batch.end());
  return batch;
}

// k = min(#same-label, #different-label) edges from each class; empty when
// either class is missing. Returns positions into `labels`.
template <class Rng>
std::vector<std::size_t> balanced_edge_sample(const EdgeLabelSet& labels, Rng& rng) {
  std::vector<std::size_t> homo, hetero;
  for (std::size_t k = 0; k < labels.size(); ++k) (labels.targets[k] < 0 ? homo : hetero).push_back(k);
  const std::size_t k = std::min(homo.size(), hetero.size());
  std::vector<std::size_t> batch;
  if (k == 0) return batch;
  batch.reserve(2 * k);
  std::sample(homo.begin(), homo.end(), std::back_inserter(batch), k, rng);
  std::sample(hetero.begin(), hetero.end(), std::back_inserter(batch), k, rng);
  std::sort(batch.begin(), batch.end());
  return batch;
}

}  // namespace dhmp
