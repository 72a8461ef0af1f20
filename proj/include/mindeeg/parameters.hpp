#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "mindeeg/tensor.hpp"

namespace mindeeg {

using Rng = std::mt19937_64;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

using ParameterList = std::vector<NamedTensor>;

// Trainable leaf drawn from uniform(-bound, bound).
Tensor uniform_parameter(Shape shape, double bound, Rng& rng);
// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor fan_in_parameter(Shape shape, std::size_t fan_in, Rng& rng);

std::size_t parameter_count(const ParameterList& params);
void zero_grads(const ParameterList& params);

// Affine map x·W + b over rows of x.
struct Linear {
  Tensor weight;  // in × out
  Tensor bias;    // 1 × out; undefined when constructed without bias

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);

  Tensor operator()(const Tensor& x) const;
  void collect(ParameterList& out, const std::string& prefix) const;
};

}  // namespace mindeeg
