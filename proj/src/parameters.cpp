#include "mindeeg/parameters.hpp"

#include <cmath>

#include "mindeeg/ops.hpp"

namespace mindeeg {

Tensor uniform_parameter(Shape shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) v = dist(rng);
  return Tensor(std::move(shape), std::move(data), true);
}

Tensor fan_in_parameter(Shape shape, std::size_t fan_in, Rng& rng) {
  return uniform_parameter(std::move(shape), 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
}

std::size_t parameter_count(const ParameterList& params) {
  std::size_t total = 0;
  for (const auto& p : params) total += p.tensor.numel();
  return total;
}

void zero_grads(const ParameterList& params) {
  for (const auto& p : params) {
    auto t = p.tensor;
    t.zero_grad();
  }
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng, bool with_bias)
    : weight(fan_in_parameter({in, out}, in, rng)) {
  if (with_bias) bias = fan_in_parameter({1, out}, in, rng);
}

Tensor Linear::operator()(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return bias.defined() ? add(y, bias) : y;
}

void Linear::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

}  // namespace mindeeg
