// Attention-refined graph convolution stack: GCN layer, CBAM-style gating
// over nodes then features, and a residual path per block.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mindeeg/parameters.hpp"
#include "mindeeg/tensor.hpp"

namespace mindeeg {

enum class Activation { ReLU, Identity };

struct GcnLayer {
  Tensor weight;  // in × out
  Activation activation = Activation::ReLU;

  GcnLayer(std::size_t in, std::size_t out, Rng& rng, Activation act = Activation::ReLU);
  // σ(L̃·H·W)
  Tensor forward(const Tensor& features, const Tensor& propagation) const;
};

// Node attention: max and mean over each node's features pass through a
// shared n → n/r → n bottleneck, summed, then sigmoid (n × 1 gate).
// Feature attention: max and mean over nodes per feature, concatenated and
// projected 2f → f, then sigmoid (1 × f gate).
struct CbamBlock {
  Linear node_squeeze;
  Linear node_expand;
  Linear feature_proj;

  CbamBlock(std::size_t nodes, std::size_t features, std::size_t reduction, Rng& rng);

  Tensor node_attention(const Tensor& h) const;
  Tensor feature_attention(const Tensor& h) const;
  Tensor forward(const Tensor& h) const;

  void collect(ParameterList& out, const std::string& prefix) const;
};

struct MagcnOptions {
  std::size_t layers = 2;
  std::size_t cbam_reduction = 4;
  bool residual = true;
  Activation activation = Activation::ReLU;
};

struct MagcnBlock {
  GcnLayer gcn;
  CbamBlock cbam;
  Tensor adapter;  // in × out; undefined when in == out (identity)
};

// L̃ = normalize_adjacency(A + I).
Tensor propagation_matrix(const Tensor& adjacency);

class MagcnStack {
 public:
  MagcnStack(std::size_t nodes, std::size_t in_dim, std::size_t out_dim, const MagcnOptions& options, Rng& rng);

  // `adjacency` is the fused graph; one L̃ is built from it and reused by
  // every block.
  Tensor forward(const Tensor& features, const Tensor& adjacency) const;

  std::size_t nodes() const { return nodes_; }
  std::size_t out_dim() const { return out_dim_; }
  std::vector<MagcnBlock>& blocks() { return blocks_; }
  const std::vector<MagcnBlock>& blocks() const { return blocks_; }
  const MagcnOptions& options() const { return options_; }

  void collect(ParameterList& out, const std::string& prefix) const;

 private:
  std::size_t nodes_;
  std::size_t out_dim_;
  MagcnOptions options_;
  std::vector<MagcnBlock> blocks_;
};

}  // namespace mindeeg
