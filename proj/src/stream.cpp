#include "mindeeg/stream.hpp"

namespace mindeeg {

namespace {
CodebookOptions with_shift(CodebookOptions options, double shift) {
  options.adjacency_shift = shift;
  return options;
}
}  // namespace

GraphStream::GraphStream(const StreamOptions& options, Rng& rng)
    : age(options.nodes, options.bands, rng, options.adjacency_shift),
      codebook(options.nodes, with_shift(options.codebook, options.adjacency_shift), rng),
      se(options.bands, options.se_reduction, rng),
      magcn(options.nodes, options.feature_dim, options.out_dim, options.magcn, rng),
      options_(options) {}

StreamOutput GraphStream::forward(const Tensor& graph_input, const Tensor& node_features) {
  BandGraphs raw = age.encode(graph_input);
  QuantizedBands quantized = codebook.quantize_rows(raw.stacked);
  BandGraphs rebuilt{raw.nodes, quantized.reconstructed};
  Tensor fused = se.fuse(rebuilt);
  StreamOutput out;
  out.features = magcn.forward(node_features, fused);
  out.adjacency = fused;
  out.vq_loss = quantized.vq_loss;
  out.codes = std::move(quantized.indices);
  return out;
}

void GraphStream::collect(ParameterList& out, const std::string& prefix) const {
  age.collect(out, prefix + ".age");
  codebook.collect(out, prefix + ".codebook");
  se.collect(out, prefix + ".se");
  magcn.collect(out, prefix + ".magcn");
}

}  // namespace mindeeg
