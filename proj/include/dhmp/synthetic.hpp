#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dhmp/errors.hpp"
#include "dhmp/graph.hpp"

namespace dhmp {

// Camouflage-style multi-relation graph: class-conditional Gaussian
// features and per-class probabilities of attaching to the same class.
struct SyntheticSpec {
  std::size_t num_nodes = 1000;
  double fraud_ratio = 0.1;
  std::size_t num_relations = 1;
  std::vector<double> mean_degree{10.0};  // one value, or one per relation
  double fraud_homophily = 0.3;
  double benign_homophily = 0.9;
  std::size_t feature_dim = 16;
  double separation = 3.0;  // offset of the fraud mean in every coordinate
  double noise = 1.0;       // per-coordinate standard deviation
  bool symmetrize = false;
  std::uint64_t seed = 0;
  double train_fraction = 0.4;
  double val_fraction = 0.2;

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (num_nodes < 2) throw ConfigError("synthetic: need at least 2 nodes");
    if (!(fraud_ratio > 0.0 && fraud_ratio < 1.0)) throw ConfigError("synthetic: fraud_ratio must be in (0,1)");
    if (!prob(fraud_homophily) || !prob(benign_homophily)) {
      throw ConfigError("synthetic: homophily probabilities must be in [0,1]");
    }
    if (num_relations == 0) throw ConfigError("synthetic: need at least one relation");
    if (mean_degree.size() != 1 && mean_degree.size() != num_relations) {
      throw ConfigError("synthetic: mean_degree needs 1 or num_relations entries");
    }
    for (double m : mean_degree)
      if (m < 0.0) throw ConfigError("synthetic: mean degree must be non-negative");
    if (feature_dim == 0) throw ConfigError("synthetic: feature_dim must be positive");
    if (noise < 0.0 || separation < 0.0) throw ConfigError("synthetic: separation/noise must be non-negative");
    const auto fraud = static_cast<std::size_t>(std::floor(static_cast<double>(num_nodes) * fraud_ratio));
    if (fraud == 0 || fraud == num_nodes) throw ConfigError("synthetic: both classes must be non-empty");
  }
};

inline MultiRelationGraph generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.num_nodes;
  const std::size_t d = spec.feature_dim;
  std::mt19937_64 rng(spec.seed);

  const auto n_fraud = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.fraud_ratio));
  std::vector<NodeId> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);

  MultiRelationGraph g;
  g.labels.assign(n, 0);
  for (std::size_t i = 0; i < n_fraud; ++i) g.labels[perm[i]] = 1;
  std::vector<NodeId> members[2];
  for (std::size_t u = 0; u < n; ++u) members[g.labels[u]].push_back(static_cast<NodeId>(u));

  // The fraud mean is offset by `separation` in every coordinate, so the
  // Euclidean distance between class means is separation * sqrt(d).
  const double shift = spec.separation;
  std::normal_distribution<double> gauss(0.0, 1.0);
  g.features = Matrix(n, d);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t j = 0; j < d; ++j)
      g.features(u, j) = (g.labels[u] == 1 ? shift : 0.0) + spec.noise * gauss(rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t r = 0; r < spec.num_relations; ++r) {
    const double mean = spec.mean_degree.size() == 1 ? spec.mean_degree[0] : spec.mean_degree[r];
    const auto whole = static_cast<std::size_t>(std::floor(mean));
    const double frac = mean - static_cast<double>(whole);
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(mean * static_cast<double>(n)) + n);
    for (std::size_t u = 0; u < n; ++u) {
      const int cls = g.labels[u];
      const double homophily = cls == 1 ? spec.fraud_homophily : spec.benign_homophily;
      const std::size_t k = whole + (unit(rng) < frac ? 1 : 0);
      for (std::size_t i = 0; i < k; ++i) {
        const bool same = unit(rng) < homophily;
        const auto& pool = members[same ? cls : 1 - cls];
        if (same && pool.size() < 2) continue;  // no same-class partner other than u
        NodeId v;
        do {
          v = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
        } while (v == u);
        edges.push_back({static_cast<NodeId>(u), v});
      }
    }
    if (spec.symmetrize) edges = symmetrize(edges);
    g.relations.push_back(build_csr(edges, n, "rel" + std::to_string(r)));
  }
  g.split = stratified_split(g.labels, spec.train_fraction, spec.val_fraction, spec.seed);
  return g;
}

}  // namespace dhmp
