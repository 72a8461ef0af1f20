#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>

namespace mindeeg {

// Every architectural and training knob. Defaults follow the published
// settings where they exist (codebook sizes, loss weights, SGD lr and batch).
struct ModelConfig {
  std::size_t nodes = 62;
  std::size_t bands = 5;
  std::size_t classes = 4;

  std::size_t k_global = 32;
  std::size_t k_intra = 64;
  std::size_t k_inter = 128;
  std::size_t codebook_dim = 64;
  double commitment_weight = 0.25;

  double loss_weight_global = 0.2;  // α
  double loss_weight_intra = 0.5;   // β
  double loss_weight_inter = 1.0;   // γ

  double lr = 1e-2;
  std::size_t batch = 32;
  std::size_t epochs = 200;
  std::uint64_t seed = 1;

  std::size_t magcn_layers = 2;
  std::size_t global_out = 50;
  std::size_t intra_out = 50;
  std::size_t inter_out = 60;
  std::size_t inter_bands = 5;
  std::size_t head_hidden1 = 256;
  std::size_t head_hidden2 = 64;
  std::size_t se_reduction = 2;
  std::size_t cbam_reduction = 4;

  double adjacency_shift = 1.0;
  bool allow_overlap = false;
  bool cosine_codebook = false;
  bool straight_through = true;
  // Seed codebook embeddings from encoder outputs on the training split
  // before training (false: keep the uniform(±1/K) initialization).
  bool seed_codebooks = true;
  bool residual = true;
  bool shared_fuse_weight = false;
  std::string partition_file;  // empty: built-in 7-region table

  bool global_removed = false;
  bool intra_removed = false;
  bool inter_removed = false;
  bool regional_removed = false;

  bool global_active() const { return !global_removed; }
  bool regional_active() const { return !regional_removed && !(intra_removed && inter_removed); }
  bool intra_active() const { return regional_active() && !intra_removed; }
  bool inter_active() const { return regional_active() && !inter_removed; }

  // Throws ConfigError for zero counts, negative weights, or every stream ablated.
  void validate() const;

  // Flat `key = value` text, one line per field.
  std::string to_text() const;
  static ModelConfig parse(std::istream& in);
  static ModelConfig parse(const std::string& text);
  static ModelConfig load(const std::string& path);
  // Applies one `key = value` assignment; unknown keys are errors.
  void set(const std::string& key, const std::string& value);
};

}  // namespace mindeeg
