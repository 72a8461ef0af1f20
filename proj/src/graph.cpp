#include "mindeeg/graph.hpp"

#include <algorithm>
#include <vector>

#include "mindeeg/ops.hpp"

namespace mindeeg {

Tensor BandGraphs::band(std::size_t b) const {
  return reshape(slice(stacked, 0, b, 1), {nodes, nodes});
}

AdaptiveGraphEncoder::AdaptiveGraphEncoder(std::size_t nodes, std::size_t bands, Rng& rng, double shift)
    : spatial(fan_in_parameter({nodes, nodes}, nodes, rng)),
      bias(fan_in_parameter({nodes, bands}, nodes, rng)),
      band_mix(fan_in_parameter({bands, bands}, bands, rng)),
      projection(fan_in_parameter({bands, nodes * bands}, bands, rng)),
      nodes_(nodes),
      bands_(bands),
      shift_(shift) {}

BandGraphs AdaptiveGraphEncoder::encode(const Tensor& x) const {
  if (x.rank() != 2 || x.rows() != nodes_ || x.cols() != bands_) {
    throw ShapeError("adaptive graph encoder expects " + shape_string({nodes_, bands_}) + " input, got " +
                     shape_string(x.shape()));
  }
  Tensor mixed = matmul(matmul(add(matmul(spatial, x), bias), band_mix), projection);
  Tensor activated = non_negative_map(mixed, shift_);
  std::vector<Tensor> rows;
  rows.reserve(bands_);
  for (std::size_t b = 0; b < bands_; ++b) {
    rows.push_back(reshape(slice(activated, 1, b * nodes_, nodes_), {1, nodes_ * nodes_}));
  }
  return BandGraphs{nodes_, concat(rows, 0)};
}

void AdaptiveGraphEncoder::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".M", spatial});
  out.push_back({prefix + ".B", bias});
  out.push_back({prefix + ".N", band_mix});
  out.push_back({prefix + ".P", projection});
}

Tensor normalize_adjacency(const Tensor& adjacency) {
  if (adjacency.rank() != 2 || adjacency.rows() != adjacency.cols()) {
    throw ShapeError("normalize_adjacency expects a square matrix, got " + shape_string(adjacency.shape()));
  }
  Tensor inv_sqrt_degree = rsqrt_or_zero(sum(adjacency, 1));
  return mul(mul(adjacency, inv_sqrt_degree), transpose(inv_sqrt_degree));
}

Tensor non_negative_map(const Tensor& x, double shift) {
  Tensor activated = elu(x);
  return shift == 0.0 ? activated : add_scalar(activated, shift);
}

SqueezeExcitation::SqueezeExcitation(std::size_t bands, std::size_t reduction, Rng& rng)
    : squeeze(bands, std::max<std::size_t>(1, bands / std::max<std::size_t>(1, reduction)), rng),
      expand(squeeze.weight.cols(), bands, rng) {}

Tensor SqueezeExcitation::excitation(const BandGraphs& graphs) const {
  Tensor band_means = transpose(mean(graphs.stacked, 1));
  return sigmoid(expand(relu(squeeze(band_means))));
}

Tensor SqueezeExcitation::fuse(const BandGraphs& graphs) const {
  Tensor fused = matmul(excitation(graphs), graphs.stacked);
  return normalize_adjacency(reshape(fused, {graphs.nodes, graphs.nodes}));
}

void SqueezeExcitation::collect(ParameterList& out, const std::string& prefix) const {
  squeeze.collect(out, prefix + ".squeeze");
  expand.collect(out, prefix + ".expand");
}

}  // namespace mindeeg
