#include "mindeeg/magcn.hpp"

#include <algorithm>
#include <array>

#include "mindeeg/graph.hpp"
#include "mindeeg/ops.hpp"

namespace mindeeg {

GcnLayer::GcnLayer(std::size_t in, std::size_t out, Rng& rng, Activation act)
    : weight(fan_in_parameter({in, out}, in, rng)), activation(act) {}

Tensor GcnLayer::forward(const Tensor& features, const Tensor& propagation) const {
  if (propagation.rank() != 2 || propagation.rows() != propagation.cols() ||
      propagation.cols() != features.rows()) {
    throw ShapeError("gcn: propagation " + shape_string(propagation.shape()) + " incompatible with features " +
                     shape_string(features.shape()));
  }
  Tensor pre = matmul(matmul(propagation, features), weight);
  return activation == Activation::ReLU ? relu(pre) : pre;
}

namespace {
std::size_t bottleneck(std::size_t width, std::size_t reduction) {
  return std::max<std::size_t>(1, width / std::max<std::size_t>(1, reduction));
}
}  // namespace

CbamBlock::CbamBlock(std::size_t nodes, std::size_t features, std::size_t reduction, Rng& rng)
    : node_squeeze(nodes, bottleneck(nodes, reduction), rng),
      node_expand(bottleneck(nodes, reduction), nodes, rng),
      feature_proj(2 * features, features, rng) {}

Tensor CbamBlock::node_attention(const Tensor& h) const {
  auto shared = [&](const Tensor& pooled) { return node_expand(relu(node_squeeze(transpose(pooled)))); };
  Tensor score = add(shared(max(h, 1)), shared(mean(h, 1)));
  return transpose(sigmoid(score));
}

Tensor CbamBlock::feature_attention(const Tensor& h) const {
  std::array<Tensor, 2> pooled{max(h, 0), mean(h, 0)};
  return sigmoid(feature_proj(concat(pooled, 1)));
}

Tensor CbamBlock::forward(const Tensor& h) const {
  Tensor gated = mul(h, node_attention(h));
  return mul(gated, feature_attention(gated));
}

void CbamBlock::collect(ParameterList& out, const std::string& prefix) const {
  node_squeeze.collect(out, prefix + ".node_squeeze");
  node_expand.collect(out, prefix + ".node_expand");
  feature_proj.collect(out, prefix + ".feature_proj");
}

Tensor propagation_matrix(const Tensor& adjacency) {
  return normalize_adjacency(add(adjacency, Tensor::identity(adjacency.rows())));
}

MagcnStack::MagcnStack(std::size_t nodes, std::size_t in_dim, std::size_t out_dim, const MagcnOptions& options,
                       Rng& rng)
    : nodes_(nodes), out_dim_(out_dim), options_(options) {
  if (options.layers == 0) throw std::invalid_argument("MAGCN needs at least one layer");
  std::size_t width = in_dim;
  for (std::size_t l = 0; l < options.layers; ++l) {
    MagcnBlock block{GcnLayer(width, out_dim, rng, options.activation),
                     CbamBlock(nodes, out_dim, options.cbam_reduction, rng), Tensor()};
    if (width != out_dim) block.adapter = fan_in_parameter({width, out_dim}, width, rng);
    blocks_.push_back(std::move(block));
    width = out_dim;
  }
}

Tensor MagcnStack::forward(const Tensor& features, const Tensor& adjacency) const {
  if (features.rank() != 2 || features.rows() != nodes_) {
    throw ShapeError("MAGCN over " + std::to_string(nodes_) + " nodes got features " +
                     shape_string(features.shape()));
  }
  if (adjacency.rank() != 2 || adjacency.rows() != nodes_ || adjacency.cols() != nodes_) {
    throw ShapeError("MAGCN over " + std::to_string(nodes_) + " nodes got adjacency " +
                     shape_string(adjacency.shape()));
  }
  const Tensor propagation = propagation_matrix(adjacency);
  Tensor h = features;
  for (const auto& block : blocks_) {
    Tensor out = block.cbam.forward(block.gcn.forward(h, propagation));
    if (options_.residual) out = add(out, block.adapter.defined() ? matmul(h, block.adapter) : h);
    h = out;
  }
  return h;
}

void MagcnStack::collect(ParameterList& out, const std::string& prefix) const {
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const auto p = prefix + "." + std::to_string(l);
    out.push_back({p + ".gcn.weight", blocks_[l].gcn.weight});
    blocks_[l].cbam.collect(out, p + ".cbam");
    if (options_.residual && blocks_[l].adapter.defined()) out.push_back({p + ".adapter", blocks_[l].adapter});
  }
}

}  // namespace mindeeg
