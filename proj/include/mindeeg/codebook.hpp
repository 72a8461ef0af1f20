// Discrete graph codebooks: flattened adjacency matrices are projected down,
// snapped to their nearest embedding, and projected back up.
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mindeeg/parameters.hpp"
#include "mindeeg/tensor.hpp"

namespace mindeeg {

struct CodebookOptions {
  std::size_t entries = 32;   // K
  std::size_t width = 64;     // D
  double commitment = 0.25;   // weight of the encoder-side term
  bool cosine = false;        // nearest by cosine similarity instead of L2
  bool straight_through = true;
  double adjacency_shift = 1.0;
};

struct QuantizeResult {
  std::size_t index = 0;
  Tensor quantized_adjacency;  // n × n
  Tensor vq_loss;              // scalar
};

struct QuantizedBands {
  std::vector<std::size_t> indices;
  Tensor reconstructed;  // rows × (n·n), already mapped to positive entries
  Tensor vq_loss;        // summed over rows
};

// ||sg[encoded] - embedding||² + commitment·||encoded - sg[embedding]||².
Tensor vq_loss(const Tensor& encoded, const Tensor& embedding, double commitment);

class GraphCodebook {
 public:
  GraphCodebook(std::size_t nodes, const CodebookOptions& options, Rng& rng);

  // Each row of `flat` is one flattened n × n adjacency.
  QuantizedBands quantize_rows(const Tensor& flat);
  QuantizeResult quantize(const Tensor& adjacency);

  // Â rows: the down projection of each flattened adjacency scaled by
  // 1/sqrt(n), so the squared input norm grows like n rather than n².
  Tensor encode(const Tensor& flat) const;

  // Nearest embedding to a projected vector; ties go to the smallest index.
  std::size_t nearest(std::span<const double> encoded) const;

  std::size_t nodes() const { return nodes_; }
  std::size_t entries() const { return embeddings.rows(); }
  std::size_t width() const { return embeddings.cols(); }
  const CodebookOptions& options() const { return options_; }
  void set_straight_through(bool enabled) { options_.straight_through = enabled; }

  const std::vector<std::uint64_t>& usage() const { return usage_; }
  std::uint64_t total_usage() const;
  void reset_usage();

  // While capturing, every encoded row seen by quantize_rows is recorded.
  void set_capture(bool enabled);
  const std::vector<std::vector<double>>& captured() const { return captured_; }
  // k-means++ seeding of the embeddings from the captured rows; clears the
  // capture buffer. Does nothing when nothing was captured.
  void seed_from_captured(Rng& rng);

  Tensor embeddings;  // K × D
  Linear down;        // n·n → D
  Linear up;          // D → n·n

  void collect(ParameterList& out, const std::string& prefix) const;

 private:
  std::size_t nodes_;
  CodebookOptions options_;
  std::vector<std::uint64_t> usage_;
  bool capturing_ = false;
  std::vector<std::vector<double>> captured_;
};

struct UsageEntry {
  std::size_t index = 0;
  std::uint64_t count = 0;
  double percent = 0.0;
};

// Entries sorted by count descending (index ascending among equal counts).
// Empty when `total` is zero.
std::vector<UsageEntry> usage_histogram(std::span<const std::uint64_t> counts, std::uint64_t total);
std::vector<UsageEntry> usage_histogram(const GraphCodebook& codebook);

// CSV with header `index,count,percent`.
void write_usage_csv(std::ostream& os, std::span<const UsageEntry> histogram);

}  // namespace mindeeg
