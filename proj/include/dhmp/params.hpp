#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dhmp/errors.hpp"
#include "dhmp/matrix.hpp"
#include "dhmp/tensor.hpp"

namespace dhmp {

// Named learnable matrices plus gradient and Adam moment buffers.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Matrix value;
    Matrix grad;
    Matrix first_moment;
    Matrix second_moment;
    bool decay = true;  // receives L2 weight decay
  };

  std::size_t add(std::string name, Matrix value, bool decay = true) {
    if (index_.contains(name)) throw ContractViolation("ParamStore: duplicate parameter '" + name + "'");
    const std::size_t id = entries_.size();
    index_.emplace(name, id);
    const auto r = value.rows(), c = value.cols();
    entries_.push_back({std::move(name), std::move(value), Matrix(r, c), Matrix(r, c), Matrix(r, c), decay});
    return id;
  }

  bool contains(const std::string& name) const { return index_.contains(name); }
  std::size_t index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractViolation("ParamStore: no parameter '" + name + "'");
    return it->second;
  }

  Entry& operator[](std::size_t i) { return entries_[i]; }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  Entry& at(const std::string& name) { return entries_[index_of(name)]; }
  const Entry& at(const std::string& name) const { return entries_[index_of(name)]; }

  std::size_t size() const noexcept { return entries_.size(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  std::uint64_t step() const noexcept { return step_; }
  void set_step(std::uint64_t s) noexcept { step_ = s; }

  // Records every parameter as a leaf on the tape; ids follow store order.
  std::vector<Var> bind(Tape& tape) const {
    std::vector<Var> vars;
    vars.reserve(entries_.size());
    for (const auto& e : entries_) vars.push_back(tape.leaf(e.value));
    return vars;
  }

  // Copies tape gradients into the store; unreached parameters get zero.
  void pull_gradients(const std::vector<Var>& bound) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      Entry& e = entries_[i];
      const Matrix& g = bound[i].grad();
      if (g.empty()) {
        std::fill(e.grad.data().begin(), e.grad.data().end(), 0.0);
      } else {
        e.grad = g;
      }
    }
  }

  void zero_moments() {
    for (auto& e : entries_) {
      std::fill(e.first_moment.data().begin(), e.first_moment.data().end(), 0.0);
      std::fill(e.second_moment.data().begin(), e.second_moment.data().end(), 0.0);
    }
    step_ = 0;
  }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
  std::uint64_t step_ = 0;
};

struct AdamConfig {
  double learning_rate = 0.01;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Classic Adam with coupled L2: g <- g + weight_decay * theta for entries
// marked decay, then bias-corrected moment update.
inline void adam_step(ParamStore& params, const AdamConfig& cfg) {
  params.set_step(params.step() + 1);
  const double t = static_cast<double>(params.step());
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& e : params) {
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      double g = e.grad[i];
      if (e.decay) g += cfg.weight_decay * e.value[i];
      double& m = e.first_moment[i];
      double& v = e.second_moment[i];
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
      e.value[i] -= cfg.learning_rate * (m / c1) / (std::sqrt(v / c2) + cfg.eps);
    }
  }
}

}  // namespace dhmp
