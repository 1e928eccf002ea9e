#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dhmp/graph.hpp"
#include "dhmp/tensor.hpp"

namespace dhmp {

inline constexpr double kLayerNormEps = 1e-5;

// Weight matrices are stored as right multipliers: a row feature h maps to
// h * W. The complementary filter is then h - h * W_f = h * (I - W_f).
struct ChannelVars {
  Var filter;        // W_f, d_h x d_h, shared by both channels
  Var filter_bias;   // b_p1 or b_n1
  Var gate;          // W_p or W_n
  Var gate_bias;     // b_p2 or b_n2
};

struct FusionVars {
  Var weight;  // W_i
  Var bias;    // b_i
  Var norm_gain;
  Var norm_bias;
};

enum class FusionMode {
  Enhanced,  // LayerNorm(leaky([z+ || z- || z+ - z-] W_i + b_i))
  Concat,    // [z+ || z-] W_i + b_i
};

// 1 / sqrt(1 + d_u d_v) for every edge u -> v of a subgraph.
inline std::vector<double> rescale_coefficients(const RelationAdjacency& sub,
                                                std::span<const std::size_t> deg) {
  std::vector<double> coef(sub.edge_count());
  for (std::size_t e = 0; e < coef.size(); ++e) {
    const double du = static_cast<double>(deg[sub.sources[e]]);
    const double dv = static_cast<double>(deg[sub.targets[e]]);
    coef[e] = 1.0 / std::sqrt(1.0 + du * dv);
  }
  return coef;
}

// Per-node homophilic message: leaky((eps h + h W_f + b_p1) W_p + b_p2).
// The filtered term carries no activation unless filter_activation is set.
inline Var homophilic_messages(const Var& h, const ChannelVars& p, double residual,
                               bool filter_activation = false) {
  Var filtered = add_row_bias(matmul(h, p.filter), p.filter_bias);
  if (filter_activation) filtered = relu(filtered);
  Var mixed = add(scale(h, residual), filtered);
  return leaky_relu(add_row_bias(matmul(mixed, p.gate), p.gate_bias));
}

// Per-node heterophilic message: leaky((eps h + relu(h (I - W_f) + b_n1)) W_n + b_n2).
inline Var heterophilic_messages(const Var& h, const ChannelVars& p, double residual) {
  Var complement = sub(h, matmul(h, p.filter));
  Var filtered = relu(add_row_bias(complement, p.filter_bias));
  Var mixed = add(scale(h, residual), filtered);
  return leaky_relu(add_row_bias(matmul(mixed, p.gate), p.gate_bias));
}

// z_u = h_u + sum_{v in N(u)} m_v / sqrt(1 + d_u d_v) over the subgraph's
// out-neighbors. An empty subgraph returns h itself.
inline Var aggregate(const Var& h, const Var& node_messages, const RelationAdjacency& sub,
                     std::span<const std::size_t> deg) {
  if (sub.edge_count() == 0) return h;
  auto coef = rescale_coefficients(sub, deg);
  Var edge_messages = gather_rows(node_messages, sub.targets);
  return add(h, segment_weighted_sum(edge_messages, sub.sources, coef, h.rows()));
}

inline Var frequency_fuse(const Var& z_homo, const Var& z_hetero, const FusionVars& p,
                          FusionMode mode = FusionMode::Enhanced) {
  if (mode == FusionMode::Concat) {
    return add_row_bias(matmul(concat_cols({z_homo, z_hetero}), p.weight), p.bias);
  }
  Var joined = concat_cols({z_homo, z_hetero, sub(z_homo, z_hetero)});
  Var act = leaky_relu(add_row_bias(matmul(joined, p.weight), p.bias));
  return layer_norm(act, p.norm_gain, p.norm_bias, kLayerNormEps);
}

}  // namespace dhmp
