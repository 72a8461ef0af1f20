#include "mindeeg/regional.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "mindeeg/ops.hpp"

namespace mindeeg {

namespace {

std::vector<std::size_t> range(std::size_t first, std::size_t last) {
  std::vector<std::size_t> out;
  for (std::size_t i = first; i <= last; ++i) out.push_back(i);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RegionPartition RegionPartition::default_62() {
  // FP1 FPZ FP2 AF3 AF4 F7..F8 | FT7 FT8 T7 T8 TP7 TP8 | FC5..FC6 | C5..C6 |
  // CP5..CP6 | P7..P8 | PO7..CB2
  return RegionPartition({
      {"frontal", range(0, 13)},
      {"temporal", {14, 22, 23, 31, 32, 40}},
      {"fronto_central", range(15, 21)},
      {"central", range(24, 30)},
      {"centro_parietal", range(33, 39)},
      {"parietal", range(41, 49)},
      {"occipital", range(50, 61)},
  });
}

RegionPartition RegionPartition::single(std::size_t channels) {
  return RegionPartition({{"all", range(0, channels - 1)}});
}

RegionPartition RegionPartition::parse(std::istream& in) {
  std::vector<Region> regions;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("partition line " + std::to_string(line_no) + ": expected `name: i,j,...`");
    }
    Region region{trim(line.substr(0, colon)), {}};
    std::stringstream list(line.substr(colon + 1));
    std::string item;
    while (std::getline(list, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      std::size_t used = 0;
      unsigned long value = 0;
      try {
        value = std::stoul(item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != item.size() || item.front() == '-') {
        throw ConfigError("partition line " + std::to_string(line_no) + ": bad channel index `" + item + "`");
      }
      region.channels.push_back(value);
    }
    regions.push_back(std::move(region));
  }
  return RegionPartition(std::move(regions));
}

RegionPartition RegionPartition::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open partition file " + path);
  return parse(in);
}

void RegionPartition::write(std::ostream& out) const {
  for (const auto& r : regions_) {
    out << r.name << ':';
    for (std::size_t i = 0; i < r.channels.size(); ++i) out << (i ? "," : " ") << r.channels[i];
    out << '\n';
  }
}

void RegionPartition::validate(std::size_t channels, bool allow_overlap) const {
  if (regions_.empty()) throw ConfigError("partition has no regions");
  std::vector<std::size_t> seen(channels, 0);
  for (const auto& r : regions_) {
    if (r.channels.empty()) throw ConfigError("region `" + r.name + "` is empty");
    std::set<std::size_t> unique;
    for (auto c : r.channels) {
      if (c >= channels) {
        throw ConfigError("region `" + r.name + "` index " + std::to_string(c) + " out of range for " +
                          std::to_string(channels) + " channels");
      }
      if (!unique.insert(c).second) {
        throw ConfigError("region `" + r.name + "` repeats channel " + std::to_string(c));
      }
      ++seen[c];
    }
  }
  for (std::size_t c = 0; c < channels; ++c) {
    if (seen[c] == 0) throw ConfigError("channel " + std::to_string(c) + " is not in any region");
    if (seen[c] > 1 && !allow_overlap) {
      throw ConfigError("channel " + std::to_string(c) + " appears in several regions (allow_overlap is off)");
    }
  }
}

std::size_t RegionPartition::total_channels() const {
  std::size_t total = 0;
  for (const auto& r : regions_) total += r.channels.size();
  return total;
}

std::vector<Tensor> partition(const Tensor& x, const RegionPartition& regions) {
  std::vector<Tensor> out;
  out.reserve(regions.size());
  for (const auto& r : regions.regions()) {
    if (r.channels.empty()) throw ConfigError("region `" + r.name + "` is empty");
    out.push_back(gather_rows(x, r.channels));
  }
  return out;
}

Tensor region_attention_fuse(const Tensor& region_features, const Tensor& weight) {
  if (weight.rank() != 2 || weight.rows() != region_features.cols() || weight.cols() != region_features.cols()) {
    throw ShapeError("region fusion weight " + shape_string(weight.shape()) + " does not fit features " +
                     shape_string(region_features.shape()));
  }
  Tensor projected = matmul(region_features, weight);
  Tensor affinity = matmul(projected, transpose(projected));
  Tensor strength = transpose(sum(affinity, 1));
  return matmul(softmax(strength, 1), region_features);
}

IntraRegionalEncoder::IntraRegionalEncoder(RegionPartition partition, const RegionalOptions& options, Rng& rng)
    : partition_(std::move(partition)), options_(options) {
  const std::size_t width = out_dim();
  for (const auto& r : partition_.regions()) {
    StreamOptions so = options_.stream;
    so.nodes = r.channels.size();
    streams_.emplace_back(so, rng);
  }
  const std::size_t weights = options_.shared_fuse_weight ? 1 : partition_.size();
  for (std::size_t i = 0; i < weights; ++i) fuse_weights_.push_back(fan_in_parameter({width, width}, width, rng));
}

std::size_t IntraRegionalEncoder::out_dim() const {
  return options_.encode ? options_.stream.out_dim : options_.stream.feature_dim;
}

IntraRegionalOutput IntraRegionalEncoder::forward(const Tensor& x) {
  IntraRegionalOutput out;
  std::vector<Tensor> slices = mindeeg::partition(x, partition_);
  std::vector<Tensor> fused_rows;
  Tensor loss;
  for (std::size_t i = 0; i < slices.size(); ++i) {
    Tensor features = slices[i];
    if (options_.encode) {
      StreamOutput so = streams_[i].forward(slices[i]);
      features = so.features;
      out.region_losses.push_back(so.vq_loss);
      out.codes.push_back(std::move(so.codes));
      loss = loss.defined() ? add(loss, so.vq_loss) : so.vq_loss;
    }
    out.region_features.push_back(features);
    const Tensor& w = fuse_weights_[options_.shared_fuse_weight ? 0 : i];
    fused_rows.push_back(region_attention_fuse(features, w));
  }
  out.fused = concat(fused_rows, 0);
  out.vq_loss = loss.defined() ? loss : Tensor::scalar(0.0);
  return out;
}

void IntraRegionalEncoder::collect(ParameterList& out, const std::string& prefix) const {
  if (options_.encode) {
    for (std::size_t i = 0; i < streams_.size(); ++i) streams_[i].collect(out, prefix + "." + std::to_string(i));
  }
  for (std::size_t i = 0; i < fuse_weights_.size(); ++i) {
    out.push_back({prefix + ".fuse." + std::to_string(i), fuse_weights_[i]});
  }
}

void IntraRegionalEncoder::collect_all(ParameterList& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < streams_.size(); ++i) streams_[i].collect(out, prefix + "." + std::to_string(i));
  for (std::size_t i = 0; i < fuse_weights_.size(); ++i) {
    out.push_back({prefix + ".fuse." + std::to_string(i), fuse_weights_[i]});
  }
}

namespace {
StreamOptions inter_options(std::size_t regions, std::size_t in_dim, StreamOptions so) {
  so.nodes = regions;
  so.feature_dim = in_dim;
  return so;
}
}  // namespace

InterRegionalEncoder::InterRegionalEncoder(std::size_t regions, std::size_t in_dim, const StreamOptions& stream_options,
                                           Rng& rng)
    : band_projection(in_dim, stream_options.bands, rng),
      stream(inter_options(regions, in_dim, stream_options), rng) {}

InterRegionalOutput InterRegionalEncoder::forward(const Tensor& fused) {
  StreamOutput so = stream.forward(band_projection(fused), fused);
  return InterRegionalOutput{so.features, so.vq_loss, std::move(so.codes)};
}

void InterRegionalEncoder::collect(ParameterList& out, const std::string& prefix) const {
  band_projection.collect(out, prefix + ".band_projection");
  stream.collect(out, prefix + ".stream");
}

}  // namespace mindeeg
