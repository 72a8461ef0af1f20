// The full multi-granularity model: global stream, intra- and inter-regional
// streams, row-attention head, and the integrative training loss.
#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mindeeg/config.hpp"
#include "mindeeg/regional.hpp"
#include "mindeeg/stream.hpp"

namespace mindeeg {

struct ForwardResult {
  Tensor logits;  // 1 × C
  Tensor global_vq;
  Tensor intra_vq;
  Tensor inter_vq;
  std::size_t stacked_rows = 0;
};

// Rows of `stacked` are scored as in region fusion (row sums of
// (S·W)(S·W)ᵀ), softmaxed, and each row is scaled by R·weight_r so uniform
// scores leave the matrix unchanged.
Tensor row_attention(const Tensor& stacked, const Tensor& weight);

class MindEegModel {
 public:
  explicit MindEegModel(const ModelConfig& config);
  MindEegModel(const ModelConfig& config, RegionPartition partition);

  ForwardResult forward(const Tensor& x);

  const ModelConfig& config() const { return config_; }
  const RegionPartition& partition() const { return partition_; }
  // Stable, name-ordered list of every trainable tensor of the active streams.
  const ParameterList& parameters() const { return parameters_; }
  // Every constructed tensor, including those of ablated streams.
  ParameterList all_parameters() const;

  // Codebooks of the active streams, labelled `global`, `intra.<i>`, `inter`.
  std::vector<std::pair<std::string, GraphCodebook*>> codebooks();
  void reset_codebook_usage();
  // Seeds every active codebook from encoder outputs on `samples` (k-means++
  // over the projected adjacencies). Upstream codebooks are seeded first so
  // the inter-regional encoder sees its final inputs. Usage counters are reset.
  void seed_codebooks(const std::vector<Tensor>& samples, std::uint64_t seed);
  void set_straight_through(bool enabled);

  // Always constructed; the config's ablation flags decide which ones run.
  std::optional<GraphStream> global;
  std::optional<IntraRegionalEncoder> intra;
  std::optional<InterRegionalEncoder> inter;
  std::optional<Linear> regional_projection;  // regional rows → head width
  Tensor head_attention;
  Linear fc1;
  Linear fc2;
  Linear fc3;

 private:
  void build(Rng& rng);

  ModelConfig config_;
  RegionPartition partition_;
  ParameterList parameters_;
};

// L_C + α·L_BG + β·L_BR1 + γ·L_BR2 with L_C the softmax cross-entropy.
Tensor integrative_loss(const Tensor& logits, std::size_t label, const Tensor& global_vq, const Tensor& intra_vq,
                        const Tensor& inter_vq, double alpha, double beta, double gamma);
Tensor integrative_loss(const ForwardResult& result, std::size_t label, const ModelConfig& config);

// p ← p − lr·∇p for every tensor, then zeroes the gradients.
void sgd_step(const ParameterList& params, double lr);

// Binary checkpoint: "MEEG", u32 version, u64-length-prefixed config text,
// u32 parameter count, then per parameter u32 name length, name bytes,
// u32 rank, u64 extents, little-endian f64 values.
void save_checkpoint(const MindEegModel& model, const std::string& path);
std::unique_ptr<MindEegModel> load_checkpoint(const std::string& path);

}  // namespace mindeeg
