#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dhmp/params.hpp"
#include "dhmp/tensor.hpp"

namespace dhmp {

// Builds a scalar loss on the given tape from bound parameters. Must be
// deterministic (no dropout, frozen partitions and batches).
using LossClosure = std::function<Var(Tape&, const std::vector<Var>&)>;

struct ParamGradError {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // probes whose +/- perturbation crossed a ReLU kink
  double max_rel_error = 0.0;
  double max_abs_analytic = 0.0;
};

struct GradCheckReport {
  std::vector<ParamGradError> params;

  double max_error() const {
    double m = 0.0;
    for (const auto& p : params) m = std::max(m, p.max_rel_error);
    return m;
  }
  const ParamGradError* worst() const {
    if (params.empty()) return nullptr;
    return &*std::max_element(params.begin(), params.end(), [](const auto& a, const auto& b) {
      return a.max_rel_error < b.max_rel_error;
    });
  }
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

// Central differences on min(max_entries, size) random entries of every
// parameter, compared to the tape gradient. A probe whose perturbation moves
// any ReLU-family input across 0 measures a secant over a kink rather than
// the derivative, so it is counted under `skipped` instead of compared.
inline GradCheckReport grad_check(ParamStore& params, const LossClosure& loss_fn, double probe,
                                  std::uint64_t seed, std::size_t max_entries = 32) {
  std::vector<Matrix> analytic;
  std::vector<bool> base_sides;
  {
    Tape tape;
    tape.trace_kinks(true);
    auto bound = params.bind(tape);
    Var loss = loss_fn(tape, bound);
    base_sides = tape.kink_sides();
    tape.backward(loss);
    for (const Var& v : bound) {
      Matrix g = v.grad();
      if (g.empty()) g = Matrix(v.rows(), v.cols());
      analytic.push_back(std::move(g));
    }
  }
  bool crossed = false;
  auto evaluate = [&] {
    Tape tape;
    tape.trace_kinks(true);
    auto bound = params.bind(tape);
    const double v = loss_fn(tape, bound).value()[0];
    crossed = crossed || tape.kink_sides() != base_sides;
    return v;
  };

  std::mt19937_64 rng(seed);
  GradCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& entry = params[p];
    std::vector<std::size_t> idx(entry.value.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(idx.size(), max_entries));

    ParamGradError err{entry.name, 0, 0, 0.0, 0.0};
    for (std::size_t i : idx) {
      const double saved = entry.value[i];
      crossed = false;
      entry.value[i] = saved + probe;
      const double up = evaluate();
      entry.value[i] = saved - probe;
      const double down = evaluate();
      entry.value[i] = saved;
      if (crossed) {
        ++err.skipped;
        continue;
      }
      ++err.checked;
      const double numeric = (up - down) / (2.0 * probe);
      const double a = analytic[p][i];
      err.max_rel_error = std::max(err.max_rel_error, relative_error(a, numeric));
      err.max_abs_analytic = std::max(err.max_abs_analytic, std::abs(a));
    }
    report.params.push_back(std::move(err));
  }
  return report;
}

}  // namespace dhmp
