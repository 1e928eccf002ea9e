#pragma once

// Dense reverse-mode differentiation over row-major matrices.
//
// A Tape owns every value produced during one forward pass. Operations append
// nodes in creation order, so reverse index order is a valid reverse
// topological order and backward() visits each node once. Gradients are
// allocated lazily and accumulate additively across fan-out.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <iostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dhmp/errors.hpp"
#include "dhmp/graph.hpp"
#include "dhmp/matrix.hpp"

namespace dhmp {

class Tape;

// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const noexcept { return tape_ != nullptr; }
  std::size_t id() const noexcept { return id_; }
  Tape& tape() const noexcept { return *tape_; }

  const Matrix& value() const;
  // Zero-shaped until backward() reached this node.
  const Matrix& grad() const;
  bool requires_grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value) { return push(std::move(value), false, {}); }
  Var leaf(Matrix value) { return push(std::move(value), true, {}); }

  Var record(Matrix value, std::span<const Var> inputs, BackwardFn fn) {
    bool rg = false;
    for (const Var& v : inputs) rg = rg || nodes_[v.id()].requires_grad;
    return push(std::move(value), rg, rg ? std::move(fn) : BackwardFn{});
  }

  // Optional record of the side of 0 on which every ReLU-family input fell,
  // in recording order. Used to tell when a perturbation crossed a kink.
  void trace_kinks(bool on) noexcept { tracing_kinks_ = on; }
  bool tracing_kinks() const noexcept { return tracing_kinks_; }
  void note_kink_side(bool negative) { kink_sides_.push_back(negative); }
  const std::vector<bool>& kink_sides() const noexcept { return kink_sides_; }

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Adds g into the gradient of v (no-op for constants).
  void accumulate(const Var& v, const Matrix& g) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) return;
    if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
    for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
  }
  // Direct access for backward rules that scatter into a slice.
  Matrix* grad_buffer(const Var& v) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) return nullptr;
    if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
    return &n.grad;
  }

  void backward(const Var& loss) {
    const Matrix& lv = nodes_[loss.id()].value;
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ContractViolation("backward: loss must be 1x1, got " + lv.shape());
    }
    for (auto& n : nodes_) n.grad = Matrix();
    if (!nodes_[loss.id()].requires_grad) return;
    nodes_[loss.id()].grad = Matrix(1, 1, 1.0);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.empty()) continue;
      n.backward(*this, n.grad);
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Matrix value, bool requires_grad, BackwardFn fn) {
    nodes_.push_back({std::move(value), Matrix(), requires_grad, std::move(fn)});
    return Var(this, nodes_.size() - 1);
  }

  // deque keeps value() references valid while later nodes are recorded
  std::deque<Node> nodes_;
  bool tracing_kinks_ = false;
  std::vector<bool> kink_sides_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }
inline const Matrix& Var::grad() const { return tape_->grad(id_); }
inline bool Var::requires_grad() const { return tape_->requires_grad(id_); }

namespace detail {

inline void require_same_tape(const Var& a, const Var& b, const char* op) {
  if (&a.tape() != &b.tape()) throw ContractViolation(std::string(op) + ": operands on different tapes");
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ContractViolation(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
  }
}

// c += a * b  (a: m x k, b: k x n)
inline void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c.data().data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      const double* bp = b.data().data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c += a * b^T  (a: m x n, b: k x n, c: m x k)
inline void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t m = a.rows(), n = a.cols(), k = b.rows();
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.data().data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b.data().data() + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += ai[j] * bp[j];
      c(i, p) += s;
    }
  }
}

// c += a^T * b  (a: m x k, b: m x n, c: k x n)
inline void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    const double* bi = b.data().data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      if (aip == 0.0) continue;
      double* cp = c.data().data() + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
}

}  // namespace detail

inline Var matmul(const Var& a, const Var& b) {
  detail::require_same_tape(a, b, "matmul");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ContractViolation("matmul: inner dimensions disagree, " + av.shape() + " * " + bv.shape());
  }
  Matrix out(av.rows(), bv.cols());
  detail::gemm_nn(av, bv, out);
  const Var inputs[] = {a, b};
  return a.tape().record(std::move(out), inputs, [a, b](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(a)) detail::gemm_nt(g, b.value(), *ga);
    if (Matrix* gb = t.grad_buffer(b)) detail::gemm_tn(a.value(), g, *gb);
  });
}

inline Var add(const Var& a, const Var& b) {
  detail::require_same_tape(a, b, "add");
  detail::require_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const Var inputs[] = {a, b};
  return a.tape().record(std::move(out), inputs, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::require_same_tape(a, b, "sub");
  detail::require_same_shape(a.value(), b.value(), "sub");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const Var inputs[] = {a, b};
  return a.tape().record(std::move(out), inputs, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (Matrix* gb = t.grad_buffer(b))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
  });
}

inline Var scale(const Var& a, double s) {
  Matrix out = a.value();
  for (double& v : out.data()) v *= s;
  const Var inputs[] = {a};
  return a.tape().record(std::move(out), inputs, [a, s](Tape& t, const Matrix& g) {
    if (Matrix* ga = t.grad_buffer(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += s * g[i];
  });
}

// x (N x d) + bias (1 x d) broadcast over rows.
inline Var add_row_bias(const Var& x, const Var& bias) {
  detail::require_same_tape(x, bias, "add_row_bias");
  const Matrix& xv = x.value();
  const Matrix& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw ContractViolation("add_row_bias: bias " + bv.shape() + " does not fit " + xv.shape());
  }
  Matrix out = xv;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bv[j];
  const Var inputs[] = {x, bias};
  return x.tape().record(std::move(out), inputs, [x, bias](Tape& t, const Matrix& g) {
    t.accumulate(x, g);
    if (Matrix* gb = t.grad_buffer(bias))
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) (*gb)[j] += g(i, j);
  });
}

enum class Activation { Tanh, LeakyRelu, Relu };

inline constexpr double kLeakySlope = 0.01;
// Comparisons are written so that NaN passes through instead of being clipped to 0.

inline double activate(Activation kind, double v) noexcept {
  switch (kind) {
    case Activation::Tanh: return std::tanh(v);
    case Activation::LeakyRelu: return v < 0.0 ? kLeakySlope * v : v;
    case Activation::Relu: return v < 0.0 ? 0.0 : v;
  }
  return v;
}

// Kinks at 0 take the positive-side derivative.
inline Var activation(const Var& x, Activation kind) {
  if (kind != Activation::Tanh && x.tape().tracing_kinks())
    for (double v : x.value().data()) x.tape().note_kink_side(v < 0.0);
  Matrix out = x.value();
  for (double& v : out.data()) v = activate(kind, v);
  const Var inputs[] = {x};
  return x.tape().record(std::move(out), inputs, [x, kind](Tape& t, const Matrix& g) {
    Matrix* gx = t.grad_buffer(x);
    if (!gx) return;
    const Matrix& xv = x.value();
    for (std::size_t i = 0; i < g.size(); ++i) {
      double d = 1.0;
      switch (kind) {
        case Activation::Tanh: {
          const double y = std::tanh(xv[i]);
          d = 1.0 - y * y;
          break;
        }
        case Activation::LeakyRelu: d = xv[i] < 0.0 ? kLeakySlope : 1.0; break;
        case Activation::Relu: d = xv[i] < 0.0 ? 0.0 : 1.0; break;
      }
      (*gx)[i] += g[i] * d;
    }
  });
}

inline Var tanh(const Var& x) { return activation(x, Activation::Tanh); }
inline Var relu(const Var& x) { return activation(x, Activation::Relu); }
inline Var leaky_relu(const Var& x) { return activation(x, Activation::LeakyRelu); }

inline Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractViolation("concat_cols: no parts");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    detail::require_same_tape(parts[0], p, "concat_cols");
    if (p.rows() != rows) {
      throw ContractViolation("concat_cols: row mismatch " + parts[0].value().shape() + " vs " +
                              p.value().shape());
    }
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Matrix& pv = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      std::copy(pv.row(i).begin(), pv.row(i).end(), out.row(i).begin() + offset);
    offset += pv.cols();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(out), parts, [saved](Tape& t, const Matrix& g) {
    std::size_t off = 0;
    for (const Var& p : saved) {
      const std::size_t c = p.cols();
      if (Matrix* gp = t.grad_buffer(p)) {
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < c; ++j) (*gp)(i, j) += g(i, off + j);
      }
      off += c;
    }
  });
}

inline Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

// Rows [begin, begin + count) of x.
inline Var slice_rows(const Var& x, std::size_t begin, std::size_t count) {
  const Matrix& xv = x.value();
  if (begin + count > xv.rows()) {
    throw ContractViolation("slice_rows: [" + std::to_string(begin) + "," + std::to_string(begin + count) +
                            ") out of range for " + xv.shape());
  }
  const std::size_t c = xv.cols();
  Matrix out(count, c,
             std::vector<double>(xv.data().begin() + static_cast<std::ptrdiff_t>(begin * c),
                                 xv.data().begin() + static_cast<std::ptrdiff_t>((begin + count) * c)));
  const Var inputs[] = {x};
  return x.tape().record(std::move(out), inputs, [x, begin](Tape& t, const Matrix& g) {
    Matrix* gx = t.grad_buffer(x);
    if (!gx) return;
    const std::size_t off = begin * g.cols();
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[off + i] += g[i];
  });
}

// out[k] = x[indices[k]]
inline Var gather_rows(const Var& x, std::span<const NodeId> indices) {
  const Matrix& xv = x.value();
  Matrix out(indices.size(), xv.cols());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= xv.rows()) {
      throw ContractViolation("gather_rows: index " + std::to_string(indices[k]) +
                              " out of range for " + xv.shape());
    }
    std::copy(xv.row(indices[k]).begin(), xv.row(indices[k]).end(), out.row(k).begin());
  }
  std::vector<NodeId> idx(indices.begin(), indices.end());
  const Var inputs[] = {x};
  return x.tape().record(std::move(out), inputs, [x, idx = std::move(idx)](Tape& t, const Matrix& g) {
    Matrix* gx = t.grad_buffer(x);
    if (!gx) return;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      auto dst = gx->row(idx[k]);
      auto src = g.row(k);
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
    }
  });
}

// out[s] = sum over e with segments[e] == s of coefficients[e] * messages[e].
// Reduction order is the edge order, so results are deterministic.
inline Var segment_weighted_sum(const Var& messages, std::span<const NodeId> segments,
                                std::span<const double> coefficients, std::size_t num_segments) {
  const Matrix& mv = messages.value();
  if (segments.size() != mv.rows() || coefficients.size() != mv.rows()) {
    throw ContractViolation("segment_weighted_sum: " + std::to_string(mv.rows()) + " messages, " +
                            std::to_string(segments.size()) + " segment ids, " +
                            std::to_string(coefficients.size()) + " coefficients");
  }
  const std::size_t d = mv.cols();
  Matrix out(num_segments, d);
  for (std::size_t e = 0; e < segments.size(); ++e) {
    if (segments[e] >= num_segments) {
      throw ContractViolation("segment_weighted_sum: segment " + std::to_string(segments[e]) +
                              " >= " + std::to_string(num_segments));
    }
    const double c = coefficients[e];
    auto dst = out.row(segments[e]);
    auto src = mv.row(e);
    for (std::size_t j = 0; j < d; ++j) dst[j] += c * src[j];
  }
  std::vector<NodeId> seg(segments.begin(), segments.end());
  std::vector<double> coef(coefficients.begin(), coefficients.end());
  const Var inputs[] = {messages};
  return messages.tape().record(
      std::move(out), inputs,
      [messages, seg = std::move(seg), coef = std::move(coef)](Tape& t, const Matrix& g) {
        Matrix* gm = t.grad_buffer(messages);
        if (!gm) return;
        for (std::size_t e = 0; e < seg.size(); ++e) {
          auto dst = gm->row(e);
          auto src = g.row(seg[e]);
          for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += coef[e] * src[j];
        }
      });
}

// Per-row normalization with population variance, then gain/bias (1 x d).
inline Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Matrix& xv = x.value();
  const std::size_t n = xv.rows(), d = xv.cols();
  if (d == 0) throw ContractViolation("layer_norm: zero columns");
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    throw ContractViolation("layer_norm: gain/bias must be 1x" + std::to_string(d));
  }
  Matrix normed(n, d);
  std::vector<double> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = xv.row(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) normed(i, j) = (r[j] - mean) * inv_std[i];
  }
  Matrix out(n, d);
  const Matrix& gv = gain.value();
  const Matrix& bv = bias.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out(i, j) = normed(i, j) * gv[j] + bv[j];

  const Var inputs[] = {x, gain, bias};
  return x.tape().record(
      std::move(out), inputs,
      [x, gain, bias, normed = std::move(normed), inv_std = std::move(inv_std)](Tape& t,
                                                                                 const Matrix& g) {
        const std::size_t n = normed.rows(), d = normed.cols();
        if (Matrix* gg = t.grad_buffer(gain))
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) (*gg)[j] += g(i, j) * normed(i, j);
        if (Matrix* gb = t.grad_buffer(bias))
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < d; ++j) (*gb)[j] += g(i, j);
        Matrix* gx = t.grad_buffer(x);
        if (!gx) return;
        const Matrix& gv = gain.value();
        std::vector<double> dn(d);
        for (std::size_t i = 0; i < n; ++i) {
          double mean_dn = 0.0, mean_dn_n = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            dn[j] = g(i, j) * gv[j];
            mean_dn += dn[j];
            mean_dn_n += dn[j] * normed(i, j);
          }
          mean_dn /= static_cast<double>(d);
          mean_dn_n /= static_cast<double>(d);
          for (std::size_t j = 0; j < d; ++j)
            (*gx)(i, j) += inv_std[i] * (dn[j] - mean_dn - normed(i, j) * mean_dn_n);
        }
      });
}

inline Var softmax_rows(const Var& x) {
  const Matrix& xv = x.value();
  if (xv.cols() < 2) throw ContractViolation("softmax_rows: need at least 2 columns");
  Matrix out(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    auto r = xv.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) z += out(i, j) = std::exp(r[j] - mx);
    for (std::size_t j = 0; j < r.size(); ++j) out(i, j) /= z;
  }
  const Var inputs[] = {x};
  Matrix probs = out;
  return x.tape().record(std::move(out), inputs, [x, probs = std::move(probs)](Tape& t, const Matrix& g) {
    Matrix* gx = t.grad_buffer(x);
    if (!gx) return;
    for (std::size_t i = 0; i < probs.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < probs.cols(); ++j) dot += g(i, j) * probs(i, j);
      for (std::size_t j = 0; j < probs.cols(); ++j) (*gx)(i, j) += probs(i, j) * (g(i, j) - dot);
    }
  });
}

// Inverted dropout. Identity when not training or rate == 0.
template <class Rng>
Var dropout(const Var& x, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractViolation("dropout: rate must be in [0,1)");
  if (!training || rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const double s = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.value().size());
  for (double& m : mask) m = keep(rng) ? s : 0.0;
  Matrix out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  const Var inputs[] = {x};
  return x.tape().record(std::move(out), inputs, [x, mask = std::move(mask)](Tape& t, const Matrix& g) {
    if (Matrix* gx = t.grad_buffer(x))
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * mask[i];
  });
}

inline Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  const Var inputs[] = {x};
  return x.tape().record(Matrix(1, 1, s), inputs, [x](Tape& t, const Matrix& g) {
    if (Matrix* gx = t.grad_buffer(x))
      for (double& v : gx->data()) v += g[0];
  });
}

// mean over positions k of max(1 - scores[rows[k]] * targets[k], 0);
// scores is E x 1. Empty selection yields a constant 0 and a warning.
inline Var hinge_loss_mean(const Var& scores, std::span<const std::size_t> rows,
                           std::span<const int> targets) {
  if (rows.size() != targets.size()) throw ContractViolation("hinge_loss_mean: misaligned inputs");
  if (scores.cols() != 1) throw ContractViolation("hinge_loss_mean: scores must be a column");
  if (rows.empty()) {
    std::cerr << "warning: heterophily loss over an empty edge batch, using 0\n";
    return scores.tape().constant(Matrix(1, 1, 0.0));
  }
  const Matrix& sv = scores.value();
  const double inv = 1.0 / static_cast<double>(rows.size());
  double total = 0.0;
  std::vector<double> slope(rows.size(), 0.0);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= sv.rows()) throw ContractViolation("hinge_loss_mean: row out of range");
    const double margin = 1.0 - sv[rows[k]] * targets[k];
    if (margin > 0.0) {
      total += margin;
      slope[k] = -static_cast<double>(targets[k]) * inv;
    }
  }
  std::vector<std::size_t> r(rows.begin(), rows.end());
  const Var inputs[] = {scores};
  return scores.tape().record(
      Matrix(1, 1, total * inv), inputs,
      [scores, r = std::move(r), slope = std::move(slope)](Tape& t, const Matrix& g) {
        Matrix* gs = t.grad_buffer(scores);
        if (!gs) return;
        for (std::size_t k = 0; k < r.size(); ++k) (*gs)[r[k]] += g[0] * slope[k];
      });
}

inline constexpr double kLogClamp = 1e-12;

// -sum_k [(1-y) log(1-m) + y log(m)] with m = probs(rows[k], 1), logs
// clamped below at kLogClamp.
inline Var binary_cross_entropy_sum(const Var& probs, std::span<const NodeId> rows,
                                    std::span<const int> labels) {
  if (rows.size() != labels.size()) throw ContractViolation("binary_cross_entropy_sum: misaligned");
  if (rows.empty()) throw ContractViolation("binary_cross_entropy_sum: empty batch");
  const Matrix& pv = probs.value();
  if (pv.cols() != 2) throw ContractViolation("binary_cross_entropy_sum: probs must have 2 columns");
  double total = 0.0;
  std::vector<double> dm(rows.size(), 0.0);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double m = pv(rows[k], 1);
    if (labels[k] == 1) {
      if (m > kLogClamp) {
        total -= std::log(m);
        dm[k] = -1.0 / m;
      } else {
        total -= std::log(kLogClamp);
      }
    } else {
      const double q = 1.0 - m;
      if (q > kLogClamp) {
        total -= std::log(q);
        dm[k] = 1.0 / q;
      } else {
        total -= std::log(kLogClamp);
      }
    }
  }
  std::vector<NodeId> r(rows.begin(), rows.end());
  const Var inputs[] = {probs};
  return probs.tape().record(Matrix(1, 1, total), inputs,
                             [probs, r = std::move(r), dm = std::move(dm)](Tape& t, const Matrix& g) {
                               Matrix* gp = t.grad_buffer(probs);
                               if (!gp) return;
                               for (std::size_t k = 0; k < r.size(); ++k) (*gp)(r[k], 1) += g[0] * dm[k];
                             });
}

}  // namespace dhmp
