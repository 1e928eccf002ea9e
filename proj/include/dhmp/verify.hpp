#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "dhmp/gradcheck.hpp"
#include "dhmp/model.hpp"
#include "dhmp/synthetic.hpp"
#include "dhmp/trainer.hpp"

namespace dhmp {

struct ModelGradCheckOptions {
  std::size_t num_nodes = 30;
  std::size_t num_relations = 2;
  std::size_t feature_dim = 6;
  double mean_degree = 4.0;
  double probe = 1e-3;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  std::size_t max_entries = 64;
  double jitter = 0.3;  // standard deviation added to the initial parameters
  ModelConfig model;  // dropout is forced to 0
};

// Small seeded graph used for whole-model gradient checks.
inline MultiRelationGraph gradcheck_graph(const ModelGradCheckOptions& opt) {
  SyntheticSpec s;
  s.num_nodes = opt.num_nodes;
  s.num_relations = opt.num_relations;
  s.mean_degree = {opt.mean_degree};
  s.feature_dim = opt.feature_dim;
  s.fraud_ratio = 0.3;
  s.separation = 0.5;
  s.symmetrize = true;
  s.seed = opt.seed;
  return generate_synthetic(s);
}

// Finite differences of the full joint loss with respect to every model
// parameter. Batches and the edge partition are drawn once and held fixed,
// so the loss is a smooth function of the parameters away from ReLU kinks.
inline GradCheckReport model_grad_check(const ModelGradCheckOptions& opt) {
  const MultiRelationGraph g = gradcheck_graph(opt);
  ModelConfig mc = opt.model;
  mc.dropout = 0.0;
  TrainingData data(g, mc.ablation);
  DhmpModel model(mc, g.feature_dim(), data.relations.size(), opt.seed);

  std::mt19937_64 rng(opt.seed + 1);
  // Zero-initialized biases put some pre-activations exactly on a ReLU kink,
  // where the one-sided derivative and a central difference disagree.
  // Jitter every entry so the check runs at a generic point.
  std::normal_distribution<double> jitter(0.0, opt.jitter);
  for (auto& e : model.params())
    for (std::size_t i = 0; i < e.value.size(); ++i) e.value[i] += jitter(rng);

  const auto node_batch = balanced_node_sample(data.labels, rng);
  std::vector<std::vector<std::size_t>> edge_batches;
  for (const auto& set : data.edge_sets) edge_batches.push_back(balanced_edge_sample(set, rng));

  std::vector<EdgePartition> frozen;
  if (mc.ablation != Ablation::Sep) frozen = predict(model, g.features, data.relations).partitions;

  LossClosure loss = [&](Tape& tape, const std::vector<Var>& bound) {
    ForwardOptions fo{false, nullptr, mc.ablation == Ablation::Sep ? nullptr : &frozen};
    ForwardPass fp = model.forward(tape, bound, g.features, data.relations, fo);
    return joint_loss(fp, data, node_batch, edge_batches, opt.lambda).total;
  };
  return grad_check(model.params(), loss, opt.probe, opt.seed + 2, opt.max_entries);
}

}  // namespace dhmp
