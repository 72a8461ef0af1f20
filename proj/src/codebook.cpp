#include "mindeeg/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <numeric>
#include <ostream>

#include "mindeeg/graph.hpp"
#include "mindeeg/ops.hpp"

namespace mindeeg {

Tensor vq_loss(const Tensor& encoded, const Tensor& embedding, double commitment) {
  if (encoded.numel() != embedding.numel()) {
    throw ShapeError("vq_loss: shapes " + shape_string(encoded.shape()) + " and " +
                     shape_string(embedding.shape()) + " differ");
  }
  Tensor codebook_term = squared_norm(sub(stop_gradient(encoded), embedding));
  Tensor commitment_term = squared_norm(sub(encoded, stop_gradient(embedding)));
  return add(codebook_term, scale(commitment_term, commitment));
}

GraphCodebook::GraphCodebook(std::size_t nodes, const CodebookOptions& options, Rng& rng)
    : nodes_(nodes), options_(options) {
  if (options.entries == 0) throw ConfigError("codebook needs at least one embedding (K = 0)");
  if (options.width == 0) throw ConfigError("codebook embedding width must be positive");
  const double bound = 1.0 / static_cast<double>(options.entries);
  embeddings = uniform_parameter({options.entries, options.width}, bound, rng);
  down = Linear(nodes * nodes, options.width, rng);
  up = Linear(options.width, nodes * nodes, rng);
  usage_.assign(options.entries, 0);
}

std::size_t GraphCodebook::nearest(std::span<const double> encoded) const {
  const std::size_t K = entries(), D = width();
  const auto table = embeddings.data();
  std::size_t best = 0;
  if (options_.cosine) {
    double query_norm = 0.0;
    for (double v : encoded) query_norm += v * v;
    query_norm = std::sqrt(query_norm);
    double best_sim = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k) {
      double dot = 0.0, norm = 0.0;
      for (std::size_t j = 0; j < D; ++j) {
        dot += encoded[j] * table[k * D + j];
        norm += table[k * D + j] * table[k * D + j];
      }
      const double denom = query_norm * std::sqrt(norm);
      const double sim = denom > 0.0 ? dot / denom : 0.0;
      if (sim > best_sim) {
        best_sim = sim;
        best = k;
      }
    }
    return best;
  }
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    double dist = 0.0;
    for (std::size_t j = 0; j < D; ++j) {
      const double diff = encoded[j] - table[k * D + j];
      dist += diff * diff;
    }
    if (dist < best_dist) {
      best_dist = dist;
      best = k;
    }
  }
  return best;
}

Tensor GraphCodebook::encode(const Tensor& flat) const {
  return down(scale(flat, 1.0 / std::sqrt(static_cast<double>(nodes_))));
}

QuantizedBands GraphCodebook::quantize_rows(const Tensor& flat) {
  if (flat.rank() != 2 || flat.cols() != nodes_ * nodes_) {
    throw ShapeError("codebook for " + std::to_string(nodes_) + " nodes expects rows of " +
                     std::to_string(nodes_ * nodes_) + " values, got " + shape_string(flat.shape()));
  }
  Tensor encoded = encode(flat);
  const std::size_t rows = encoded.rows(), D = width();
  QuantizedBands out;
  out.indices.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t index = nearest(encoded.data().subspan(r * D, D));
    out.indices.push_back(index);
    ++usage_[index];
    if (capturing_) {
      const auto row = encoded.data().subspan(r * D, D);
      captured_.emplace_back(row.begin(), row.end());
    }
  }
  Tensor selected = gather_rows(embeddings, out.indices);
  out.vq_loss = vq_loss(encoded, selected, options_.commitment);
  Tensor decoder_input = options_.straight_through ? straight_through(encoded, selected) : selected;
  out.reconstructed = non_negative_map(up(decoder_input), options_.adjacency_shift);
  return out;
}

QuantizeResult GraphCodebook::quantize(const Tensor& adjacency) {
  QuantizedBands bands = quantize_rows(reshape(adjacency, {1, adjacency.numel()}));
  return QuantizeResult{bands.indices.front(), reshape(bands.reconstructed, {nodes_, nodes_}), bands.vq_loss};
}

std::uint64_t GraphCodebook::total_usage() const {
  return std::accumulate(usage_.begin(), usage_.end(), std::uint64_t{0});
}

void GraphCodebook::reset_usage() { std::fill(usage_.begin(), usage_.end(), 0); }

void GraphCodebook::set_capture(bool enabled) {
  capturing_ = enabled;
  if (!enabled) return;
  captured_.clear();
}

void GraphCodebook::seed_from_captured(Rng& rng) {
  capturing_ = false;
  if (captured_.empty()) return;
  const std::size_t K = entries(), D = width(), N = captured_.size();
  auto table = embeddings.mutable_data();
  auto dist2 = [&](std::size_t row, std::size_t k) {
    double s = 0.0;
    for (std::size_t j = 0; j < D; ++j) {
      const double diff = captured_[row][j] - table[k * D + j];
      s += diff * diff;
    }
    return s;
  };
  std::uniform_int_distribution<std::size_t> pick(0, N - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> nearest_d2(N, std::numeric_limits<double>::infinity());
  std::size_t chosen = pick(rng);
  for (std::size_t k = 0; k < K; ++k) {
    std::copy(captured_[chosen].begin(), captured_[chosen].end(), table.begin() + static_cast<std::ptrdiff_t>(k * D));
    double total = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      nearest_d2[i] = std::min(nearest_d2[i], dist2(i, k));
      total += nearest_d2[i];
    }
    if (total <= 0.0) {
      chosen = pick(rng);
      continue;
    }
    double target = unit(rng) * total;
    chosen = N - 1;
    for (std::size_t i = 0; i < N; ++i) {
      target -= nearest_d2[i];
      if (target <= 0.0 && nearest_d2[i] > 0.0) {
        chosen = i;
        break;
      }
    }
  }
  captured_.clear();
}

void GraphCodebook::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + ".embeddings", embeddings});
  down.collect(out, prefix + ".down");
  up.collect(out, prefix + ".up");
}

std::vector<UsageEntry> usage_histogram(std::span<const std::uint64_t> counts, std::uint64_t total) {
  std::vector<UsageEntry> hist;
  if (total == 0) return hist;
  hist.reserve(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    hist.push_back({i, counts[i], 100.0 * static_cast<double>(counts[i]) / static_cast<double>(total)});
  }
  std::stable_sort(hist.begin(), hist.end(), [](const UsageEntry& a, const UsageEntry& b) { return a.count > b.count; });
  return hist;
}

std::vector<UsageEntry> usage_histogram(const GraphCodebook& codebook) {
  return usage_histogram(codebook.usage(), codebook.total_usage());
}

void write_usage_csv(std::ostream& os, std::span<const UsageEntry> histogram) {
  os << "index,count,percent\n";
  for (const auto& e : histogram) {
    os << e.index << ',' << e.count << ',' << std::fixed << std::setprecision(6) << e.percent << '\n';
  }
}

}  // namespace mindeeg
