// Shared test oracles: random tensors, a central-difference gradient checker,
// and small dataset builders.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mindeeg/dataset.hpp"
#include "mindeeg/ops.hpp"
#include "mindeeg/parameters.hpp"
#include "mindeeg/tensor.hpp"

namespace testing {

using namespace mindeeg;

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = true) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) v = dist(rng);
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

struct GradReport {
  double max_rel = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::string worst;
};

// |analytic - numeric| / max(|analytic|, |numeric|, floor)
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t coords_per_tensor = 0;  // 0: every coordinate
  std::uint64_t seed = 99;
  // Called before and after each ± evaluation; returning false skips the
  // coordinate (used to drop points where a discrete choice flips).
  std::function<bool()> stable;
};

// `loss` rebuilds a scalar from the current values of `leaves`. Analytic
// gradients come from one taped evaluation; numeric ones from central
// differences on each checked coordinate.
inline GradReport check_gradients(const std::function<Tensor()>& loss, const std::vector<NamedTensor>& leaves,
                                  const GradCheckOptions& options = {}) {
  for (const auto& l : leaves) {
    Tensor t = l.tensor;
    t.zero_grad();
  }
  {
    Tape tape;
    TapeGuard guard(tape);
    Tensor out = loss();
    tape.backward(out);
  }
  std::vector<std::vector<double>> analytic;
  for (const auto& l : leaves) analytic.emplace_back(l.tensor.grad().begin(), l.tensor.grad().end());

  GradReport report;
  Rng rng(options.seed);
  NoGradGuard no_grad;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor t = leaves[li].tensor;
    std::vector<std::size_t> coords(t.numel());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (options.coords_per_tensor && coords.size() > options.coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.coords_per_tensor);
    }
    for (auto i : coords) {
      double& v = t.mutable_data()[i];
      const double saved = v;
      v = saved + options.step;
      const double up = loss().item();
      const bool stable_up = !options.stable || options.stable();
      v = saved - options.step;
      const double down = loss().item();
      const bool stable_down = !options.stable || options.stable();
      v = saved;
      if (!stable_up || !stable_down) {
        ++report.skipped;
        continue;
      }
      const double numeric = (up - down) / (2.0 * options.step);
      const double rel = relative_error(analytic[li][i], numeric);
      ++report.checked;
      if (rel > report.max_rel) {
        report.max_rel = rel;
        report.worst = leaves[li].name + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic[li][i]) +
                       " numeric " + std::to_string(numeric);
      }
    }
  }
  return report;
}

// Fixed random weights turn any tensor into a scalar with a generic adjoint.
inline Tensor weighted_sum(const Tensor& x, std::uint64_t seed = 5) {
  Rng rng(seed);
  Tensor w = random_tensor(x.shape(), rng, -1.0, 1.0, false);
  return sum(mul(x, w));
}

inline std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace testing
