#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "dhmp/errors.hpp"
#include "dhmp/graph.hpp"
#include "dhmp/metrics.hpp"
#include "dhmp/model.hpp"
#include "dhmp/params.hpp"
#include "dhmp/sampling.hpp"
#include "dhmp/separator.hpp"
#include "dhmp/tensor.hpp"

namespace dhmp {

struct TrainConfig {
  double learning_rate = 0.01;
  double weight_decay = 5e-5;
  std::size_t epochs = 3000;
  std::size_t patience = 200;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  ModelConfig model;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (patience == 0 || patience > epochs) throw ConfigError("patience must be in [1, epochs]");
    if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
    if (model.residual < 0.0) throw ConfigError("epsilon must be non-negative");
    if (model.dropout < 0.0 || model.dropout >= 1.0) throw ConfigError("dropout must be in [0,1)");
    if (model.hidden_dim == 0) throw ConfigError("hidden_dim must be positive");
  }
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss_classification = 0.0;
  std::vector<double> loss_heterophily;  // one per relation
  double loss_total = 0.0;
  MetricsReport val;
};

struct Prediction {
  Matrix probs;      // N x 2
  Matrix embedding;  // N x (R d_out)
  std::vector<EdgePartition> partitions;
  std::vector<std::vector<double>> kappa;
};

// Eval-mode forward (no dropout, partitions from the current separator).
inline Prediction predict(const DhmpModel& model, const Matrix& features,
                          std::span<const RelationAdjacency> relations) {
  Tape tape;
  auto bound = model.params().bind(tape);
  ForwardPass fp = model.forward(tape, bound, features, relations);
  Prediction p{fp.probs.value(), fp.embedding.value(), {}, {}};
  for (auto& rp : fp.relations) {
    if (rp.partition) p.partitions.push_back(std::move(*rp.partition));
    if (rp.kappa.valid()) p.kappa.push_back(rp.kappa.value().data());
  }
  return p;
}

// Training state that is fixed for the lifetime of one fit() call.
struct TrainingData {
  std::vector<RelationAdjacency> relations;
  MaskedLabels labels;
  std::vector<EdgeLabelSet> edge_sets;

  TrainingData(const MultiRelationGraph& g, Ablation ablation)
      : relations(effective_relations(g, ablation)), labels(g.labels, g.split.train) {
    if (ablation != Ablation::Sep)
      for (const auto& r : relations) edge_sets.push_back(edge_labels(r, labels));
  }
};

struct LossTerms {
  Var classification;
  std::vector<Var> heterophily;  // one per relation (constant 0 when the batch is empty)
  Var total;
};

// L = L_T + lambda * sum_r L_H,r on the given batches.
inline LossTerms joint_loss(const ForwardPass& fp, const TrainingData& data,
                            std::span<const NodeId> node_batch,
                            const std::vector<std::vector<std::size_t>>& edge_batches, double lambda) {
  Tape& tape = fp.probs.tape();
  std::vector<int> targets;
  targets.reserve(node_batch.size());
  for (NodeId u : node_batch) targets.push_back(*data.labels.label(u));
  LossTerms terms;
  terms.classification = binary_cross_entropy_sum(fp.probs, node_batch, targets);
  terms.total = terms.classification;
  for (std::size_t r = 0; r < data.edge_sets.size(); ++r) {
    Var lh = edge_batches[r].empty()
                 ? tape.constant(Matrix(1, 1, 0.0))
                 : heterophily_loss(fp.relations[r].kappa, data.edge_sets[r], edge_batches[r]);
    terms.heterophily.push_back(lh);
    terms.total = add(terms.total, scale(lh, lambda));
  }
  return terms;
}

struct TrainResult {
  DhmpModel model;  // parameters with the best validation AUC
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_auc = -std::numeric_limits<double>::infinity();
};

// Called after every epoch with the current (not best) model.
using EpochCallback = std::function<void(const EpochLog&, const DhmpModel&)>;

/**
 * Full-graph training loop. Per epoch: balanced node and edge batches,
 * forward with sign-derived partitions, one Adam step on the joint loss,
 * validation AUC for early stopping. Validation AUC that is undefined never
 * counts as an improvement except on the first epoch.
 */
inline TrainResult fit(const MultiRelationGraph& graph, const TrainConfig& cfg,
                       const EpochCallback& on_epoch = {}) {
  cfg.validate();
  TrainingData data(graph, cfg.model.ablation);
  DhmpModel model(cfg.model, graph.feature_dim(), data.relations.size(), cfg.seed);
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);
  const AdamConfig adam{cfg.learning_rate, cfg.weight_decay};

  TrainResult result{model, {}, 0, -std::numeric_limits<double>::infinity()};
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto node_batch = balanced_node_sample(data.labels, rng);
    std::vector<std::vector<std::size_t>> edge_batches;
    for (const auto& set : data.edge_sets) edge_batches.push_back(balanced_edge_sample(set, rng));

    EpochLog entry;
    entry.epoch = epoch;
    {
      Tape tape;
      auto bound = model.params().bind(tape);
      ForwardOptions opt{true, &rng, nullptr};
      ForwardPass fp = model.forward(tape, bound, graph.features, data.relations, opt);
      LossTerms loss = joint_loss(fp, data, node_batch, edge_batches, cfg.lambda);
      entry.loss_classification = loss.classification.value()[0];
      for (const Var& lh : loss.heterophily) entry.loss_heterophily.push_back(lh.value()[0]);
      entry.loss_total = loss.total.value()[0];
      if (!std::isfinite(entry.loss_total)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch));
      }
      tape.backward(loss.total);
      model.params().pull_gradients(bound);
    }
    adam_step(model.params(), adam);

    if (!graph.split.val.empty()) {
      Prediction pred = predict(model, graph.features, data.relations);
      entry.val = evaluate(pred.probs, graph.labels, graph.split.val);
    } else {
      entry.val.auc = std::numeric_limits<double>::quiet_NaN();
    }
    // Without a validation split there is nothing to select on, so the
    // latest model is kept and training runs for the full epoch budget.
    const bool improved = graph.split.val.empty() || epoch == 1 || entry.val.auc > result.best_val_auc ||
                          (std::isnan(result.best_val_auc) && !std::isnan(entry.val.auc));
    if (improved) {
      result.model = model;
      result.best_epoch = epoch;
      result.best_val_auc = entry.val.auc;
      since_best = 0;
    } else {
      ++since_best;
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry, model);
    if (since_best >= cfg.patience) break;
  }
  return result;
}

}  // namespace dhmp
