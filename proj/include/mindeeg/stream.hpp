// One graph-encoding stream: adaptive graph encoder → per-band codebook
// quantization → squeeze-and-excitation fusion → MAGCN. The global, each
// intra-regional, and the inter-regional encoder are all instances.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mindeeg/codebook.hpp"
#include "mindeeg/graph.hpp"
#include "mindeeg/magcn.hpp"

namespace mindeeg {

struct StreamOptions {
  std::size_t nodes = 62;
  std::size_t bands = 5;
  std::size_t feature_dim = 5;  // width of the node features fed to MAGCN
  std::size_t out_dim = 50;
  std::size_t se_reduction = 2;
  double adjacency_shift = 1.0;
  CodebookOptions codebook;
  MagcnOptions magcn;
};

struct StreamOutput {
  Tensor features;   // nodes × out_dim
  Tensor adjacency;  // fused, normalized nodes × nodes
  Tensor vq_loss;    // scalar, summed over bands
  std::vector<std::size_t> codes;
};

class GraphStream {
 public:
  GraphStream(const StreamOptions& options, Rng& rng);

  // `graph_input` (nodes × bands) builds the adjacency; `node_features`
  // (nodes × feature_dim) is propagated over it.
  StreamOutput forward(const Tensor& graph_input, const Tensor& node_features);
  StreamOutput forward(const Tensor& x) { return forward(x, x); }

  const StreamOptions& options() const { return options_; }

  AdaptiveGraphEncoder age;
  GraphCodebook codebook;
  SqueezeExcitation se;
  MagcnStack magcn;

  void collect(ParameterList& out, const std::string& prefix) const;

 private:
  StreamOptions options_;
};

}  // namespace mindeeg
