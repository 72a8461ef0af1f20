// Per-sample adjacency construction: the adaptive graph encoder, symmetric
// degree normalization, and squeeze-and-excitation fusion of band graphs.
#pragma once

#include <cstddef>
#include <string>

#include "mindeeg/parameters.hpp"
#include "mindeeg/tensor.hpp"

namespace mindeeg {

// d adjacency matrices of order n, stored as the rows of a d × (n·n) tensor
// (row b is band b's matrix in row-major order).
struct BandGraphs {
  std::size_t nodes = 0;
  Tensor stacked;

  std::size_t bands() const { return stacked.rows(); }
  Tensor band(std::size_t b) const;
};

// Builds ELU((M·X + B)·N·P) + shift and splits the n × (n·d) result into d
// column blocks of n × n. The shift keeps every entry strictly positive so
// degrees never vanish.
class AdaptiveGraphEncoder {
 public:
  AdaptiveGraphEncoder(std::size_t nodes, std::size_t bands, Rng& rng, double shift = 1.0);

  BandGraphs encode(const Tensor& x) const;

  std::size_t nodes() const { return nodes_; }
  std::size_t bands() const { return bands_; }
  double shift() const { return shift_; }

  Tensor spatial;     // M, n × n
  Tensor bias;        // B, n × d
  Tensor band_mix;    // N, d × d
  Tensor projection;  // P, d × (n·d)

  void collect(ParameterList& out, const std::string& prefix) const;

 private:
  std::size_t nodes_;
  std::size_t bands_;
  double shift_;
};

// D^(-1/2)·A·D^(-1/2) with D_ii the row sums of A. Isolated nodes (D_ii = 0)
// get zero rows and columns.
Tensor normalize_adjacency(const Tensor& adjacency);

// ELU(x) + shift; maps reals onto (shift - 1, inf).
Tensor non_negative_map(const Tensor& x, double shift);

class SqueezeExcitation {
 public:
  SqueezeExcitation(std::size_t bands, std::size_t reduction, Rng& rng);

  // Per-band weights in (0, 1), shape 1 × d, from band-mean statistics.
  Tensor excitation(const BandGraphs& graphs) const;
  // normalize_adjacency(sum_b w_b · A_b).
  Tensor fuse(const BandGraphs& graphs) const;

  Linear squeeze;  // d → d/r
  Linear expand;   // d/r → d

  void collect(ParameterList& out, const std::string& prefix) const;
};

}  // namespace mindeeg
