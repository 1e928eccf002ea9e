#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dhmp/errors.hpp"
#include "dhmp/graph.hpp"
#include "dhmp/params.hpp"
#include "dhmp/propagation.hpp"
#include "dhmp/separator.hpp"
#include "dhmp/tensor.hpp"

namespace dhmp {

enum class Ablation {
  Full,
  Sep,    // no separator: one channel over the whole relation, no heterophily loss
  Homo,   // homophilic channel removed, z = z-
  Heter,  // heterophilic channel removed, z = z+
  Rel,    // relations merged into one union graph
};

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::Full: return "full";
    case Ablation::Sep: return "sep";
    case Ablation::Homo: return "homo";
    case Ablation::Heter: return "heter";
    case Ablation::Rel: return "rel";
  }
  return "full";
}

inline Ablation parse_ablation(const std::string& s) {
  if (s == "full") return Ablation::Full;
  if (s == "sep") return Ablation::Sep;
  if (s == "homo") return Ablation::Homo;
  if (s == "heter") return Ablation::Heter;
  if (s == "rel") return Ablation::Rel;
  throw ConfigError("unknown ablation '" + s + "' (expected full|sep|homo|heter|rel)");
}

struct ModelConfig {
  std::size_t hidden_dim = 8;
  double residual = 0.5;  // epsilon in the residual gate
  double dropout = 0.1;
  Ablation ablation = Ablation::Full;
  FusionMode fusion = FusionMode::Enhanced;
  bool homophilic_activation = false;
};

// Relations the model actually sees under an ablation.
inline std::vector<RelationAdjacency> effective_relations(const MultiRelationGraph& g, Ablation a) {
  if (a == Ablation::Rel) return {merge_relations(g.relations, g.num_nodes())};
  return g.relations;
}

struct ForwardOptions {
  bool training = false;
  std::mt19937_64* rng = nullptr;  // required when training with dropout > 0
  // Replaces the sign-derived partitions (one per relation).
  const std::vector<EdgePartition>* frozen_partitions = nullptr;
};

struct RelationPass {
  Var projected;
  Var kappa;  // E x 1; invalid under Ablation::Sep
  std::optional<EdgePartition> partition;
  Var z_homo;
  Var z_hetero;
  Var z;
};

struct ForwardPass {
  std::vector<RelationPass> relations;
  Var embedding;  // N x (R d_out)
  Var logits;
  Var probs;      // N x 2
};

class DhmpModel {
 public:
  DhmpModel(ModelConfig cfg, std::size_t input_dim, std::size_t num_relations, std::uint64_t seed)
      : cfg_(cfg), input_dim_(input_dim), num_relations_(num_relations) {
    if (num_relations == 0) throw ConfigError("model needs at least one relation");
    if (cfg.hidden_dim == 0) throw ConfigError("hidden_dim must be positive");
    std::mt19937_64 rng(seed);
    build(rng);
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t num_relations() const noexcept { return num_relations_; }
  std::size_t output_dim() const noexcept { return cfg_.hidden_dim; }
  ParamStore& params() noexcept { return params_; }
  const ParamStore& params() const noexcept { return params_; }

  static std::string param_name(std::size_t r, const char* role) {
    return "r" + std::to_string(r) + "." + role;
  }

  ForwardPass forward(Tape& tape, const std::vector<Var>& bound, const Matrix& features,
                      std::span<const RelationAdjacency> relations,
                      const ForwardOptions& opt = {}) const {
    if (relations.size() != num_relations_) {
      throw ContractViolation("forward: model has " + std::to_string(num_relations_) +
                              " relations, graph has " + std::to_string(relations.size()));
    }
    if (features.cols() != input_dim_) {
      throw ContractViolation("forward: feature dim " + std::to_string(features.cols()) +
                              " != model input dim " + std::to_string(input_dim_));
    }
    if (opt.frozen_partitions && opt.frozen_partitions->size() != relations.size()) {
      throw ContractViolation("forward: frozen partition count mismatch");
    }
    const bool drop = opt.training && cfg_.dropout > 0.0;
    if (drop && !opt.rng) throw ContractViolation("forward: dropout needs an rng");

    auto get = [&](std::optional<std::size_t> id) { return id ? bound[*id] : Var(); };
    Var x = tape.constant(features);

    ForwardPass out;
    std::vector<Var> per_relation;
    for (std::size_t r = 0; r < relations.size(); ++r) {
      const RelationAdjacency& adj = relations[r];
      const RelationIds& ids = ids_[r];
      RelationPass pass;
      Var h = project_features(x, get(ids.w_s), get(ids.b_s));
      if (drop) h = dropout(h, cfg_.dropout, true, *opt.rng);
      pass.projected = h;

      ChannelVars homo{get(ids.w_f), get(ids.b_p1), get(ids.w_p), get(ids.b_p2)};
      ChannelVars hetero{get(ids.w_f), get(ids.b_n1), get(ids.w_n), get(ids.b_n2)};

      if (cfg_.ablation == Ablation::Sep) {
        auto deg = degrees(adj);
        pass.z_homo = aggregate(h, homophilic_messages(h, homo, cfg_.residual, cfg_.homophilic_activation),
                                adj, deg);
        pass.z = pass.z_homo;
      } else {
        pass.kappa = edge_sign(h, adj, get(ids.w_h));
        if (opt.frozen_partitions) {
          pass.partition = (*opt.frozen_partitions)[r];
        } else {
          pass.partition = partition_subgraphs(adj, pass.kappa.value().data());
        }
        const EdgePartition& part = *pass.partition;
        if (cfg_.ablation != Ablation::Homo) {
          pass.z_homo = aggregate(
              h, homophilic_messages(h, homo, cfg_.residual, cfg_.homophilic_activation), part.homo,
              part.homo_degrees);
        }
        if (cfg_.ablation != Ablation::Heter) {
          pass.z_hetero = aggregate(h, heterophilic_messages(h, hetero, cfg_.residual), part.hetero,
                                    part.hetero_degrees);
        }
        if (cfg_.ablation == Ablation::Homo) {
          pass.z = pass.z_hetero;
        } else if (cfg_.ablation == Ablation::Heter) {
          pass.z = pass.z_homo;
        } else {
          FusionVars fuse{get(ids.w_i), get(ids.b_i), get(ids.ln_gain), get(ids.ln_bias)};
          pass.z = frequency_fuse(pass.z_homo, pass.z_hetero, fuse, cfg_.fusion);
        }
      }
      per_relation.push_back(pass.z);
      out.relations.push_back(std::move(pass));
    }
    out.embedding = per_relation.size() == 1 ? per_relation[0] : concat_cols(std::span<const Var>(per_relation));
    out.logits = add_row_bias(matmul(out.embedding, bound[classifier_w_]), bound[classifier_b_]);
    out.probs = softmax_rows(out.logits);
    return out;
  }

 private:
  struct RelationIds {
    std::optional<std::size_t> w_s, b_s, w_h;
    std::optional<std::size_t> w_f, b_p1, w_p, b_p2, b_n1, w_n, b_n2;
    std::optional<std::size_t> w_i, b_i, ln_gain, ln_bias;
  };

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) with fan_in = rows.
  static Matrix fan_in_uniform(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = dist(rng);
    return m;
  }

  void build(std::mt19937_64& rng) {
    const std::size_t d = cfg_.hidden_dim;
    const Ablation a = cfg_.ablation;
    const bool has_separator = a != Ablation::Sep;
    const bool has_homo = a != Ablation::Homo;
    const bool has_hetero = a != Ablation::Heter && a != Ablation::Sep;
    const bool has_fusion = a == Ablation::Full || a == Ablation::Rel;

    auto weight = [&](std::size_t r, const char* role, std::size_t rows, std::size_t cols) {
      return params_.add(param_name(r, role), fan_in_uniform(rows, cols, rng), true);
    };
    auto bias = [&](std::size_t r, const char* role, std::size_t cols, double fill = 0.0) {
      return params_.add(param_name(r, role), Matrix(1, cols, fill), false);
    };

    ids_.resize(num_relations_);
    for (std::size_t r = 0; r < num_relations_; ++r) {
      RelationIds& ids = ids_[r];
      ids.w_s = weight(r, "W_s", input_dim_, d);
      ids.b_s = bias(r, "b_s", d);
      if (has_separator) ids.w_h = weight(r, "W_h", 3 * d, 1);

      Matrix filter = Matrix::identity(d);
      std::uniform_real_distribution<double> noise(-0.01, 0.01);
      for (double& v : filter.data()) v = 0.5 * v + noise(rng);
      ids.w_f = params_.add(param_name(r, "W_f"), std::move(filter), true);

      if (has_homo) {
        ids.b_p1 = bias(r, "b_p1", d);
        ids.w_p = weight(r, "W_p", d, d);
        ids.b_p2 = bias(r, "b_p2", d);
      }
      if (has_hetero) {
        ids.b_n1 = bias(r, "b_n1", d);
        ids.w_n = weight(r, "W_n", d, d);
        ids.b_n2 = bias(r, "b_n2", d);
      }
      if (has_fusion) {
        const std::size_t in = cfg_.fusion == FusionMode::Enhanced ? 3 * d : 2 * d;
        ids.w_i = weight(r, "W_i", in, d);
        ids.b_i = bias(r, "b_i", d);
        if (cfg_.fusion == FusionMode::Enhanced) {
          ids.ln_gain = bias(r, "ln_gain", d, 1.0);
          ids.ln_bias = bias(r, "ln_bias", d);
        }
      }
    }
    classifier_w_ = params_.add("W_c", fan_in_uniform(num_relations_ * d, 2, rng), true);
    classifier_b_ = params_.add("b_c", Matrix(1, 2), false);
  }

  ModelConfig cfg_;
  std::size_t input_dim_;
  std::size_t num_relations_;
  ParamStore params_;
  std::vector<RelationIds> ids_;
  std::size_t classifier_w_ = 0;
  std::size_t classifier_b_ = 0;
};

}  // namespace dhmp
