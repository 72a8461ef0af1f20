// Brain-region partitioning, intra-regional encoders with attention fusion,
// and the inter-regional encoder over fused region nodes.
#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "mindeeg/stream.hpp"

namespace mindeeg {

struct Region {
  std::string name;
  std::vector<std::size_t> channels;
};

class RegionPartition {
 public:
  RegionPartition() = default;
  explicit RegionPartition(std::vector<Region> regions) : regions_(std::move(regions)) {}

  // Seven-region grouping of the 62-channel 10-20 montage (SEED order).
  static RegionPartition default_62();
  // One region holding channels 0..n-1 in order.
  static RegionPartition single(std::size_t channels);

  // Lines of `name: i,j,k`; blank lines and `#` comments skipped.
  static RegionPartition parse(std::istream& in);
  static RegionPartition load(const std::string& path);
  void write(std::ostream& out) const;

  // Throws ConfigError on empty regions, duplicate or out-of-range indices,
  // and (unless overlap is allowed) channels missing or shared by regions.
  void validate(std::size_t channels, bool allow_overlap = false) const;

  std::size_t size() const { return regions_.size(); }
  const Region& operator[](std::size_t i) const { return regions_[i]; }
  const std::vector<Region>& regions() const { return regions_; }
  std::size_t total_channels() const;

 private:
  std::vector<Region> regions_;
};

// Row-gathered sub-matrices of x, one per region, in region order.
std::vector<Tensor> partition(const Tensor& x, const RegionPartition& regions);

// a = (X·W)(X·W)ᵀ; C = row sums of a; returns softmax(C)·X (1 × f).
Tensor region_attention_fuse(const Tensor& region_features, const Tensor& weight);

struct RegionalOptions {
  StreamOptions stream;  // nodes is overridden per region
  bool encode = true;    // false: fuse raw region features without encoders
  bool shared_fuse_weight = false;
};

struct IntraRegionalOutput {
  std::vector<Tensor> region_features;  // n_i × f
  Tensor fused;                         // Q × f
  std::vector<Tensor> region_losses;
  Tensor vq_loss;                       // sum of region_losses
  std::vector<std::vector<std::size_t>> codes;
};

class IntraRegionalEncoder {
 public:
  IntraRegionalEncoder(RegionPartition partition, const RegionalOptions& options, Rng& rng);

  IntraRegionalOutput forward(const Tensor& x);

  std::size_t out_dim() const;
  const RegionPartition& partition() const { return partition_; }
  std::vector<GraphStream>& streams() { return streams_; }
  const std::vector<GraphStream>& streams() const { return streams_; }
  std::vector<Tensor>& fuse_weights() { return fuse_weights_; }

  // Streams are always built; collect() skips them when encoding is off.
  void collect(ParameterList& out, const std::string& prefix) const;
  void collect_all(ParameterList& out, const std::string& prefix) const;

 private:
  RegionPartition partition_;
  RegionalOptions options_;
  std::vector<GraphStream> streams_;
  std::vector<Tensor> fuse_weights_;
};

struct InterRegionalOutput {
  Tensor features;  // Q × out_dim
  Tensor vq_loss;
  std::vector<std::size_t> codes;
};

// Fused region rows are first projected to `stream.bands` band-like columns
// so the adaptive graph encoder sees the same n × d layout as the global
// stream; MAGCN then propagates the unprojected rows.
class InterRegionalEncoder {
 public:
  InterRegionalEncoder(std::size_t regions, std::size_t in_dim, const StreamOptions& stream, Rng& rng);

  InterRegionalOutput forward(const Tensor& fused);

  Linear band_projection;
  GraphStream stream;

  void collect(ParameterList& out, const std::string& prefix) const;
};

}  // namespace mindeeg
