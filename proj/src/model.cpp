#include "mindeeg/model.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include "mindeeg/ops.hpp"

namespace mindeeg {

namespace {

constexpr char kCheckpointMagic[4] = {'M', 'E', 'E', 'G'};
constexpr std::uint32_t kCheckpointVersion = 1;

StreamOptions base_stream(const ModelConfig& c) {
  StreamOptions so;
  so.bands = c.bands;
  so.feature_dim = c.bands;
  so.se_reduction = c.se_reduction;
  so.adjacency_shift = c.adjacency_shift;
  so.codebook.width = c.codebook_dim;
  so.codebook.commitment = c.commitment_weight;
  so.codebook.cosine = c.cosine_codebook;
  so.codebook.straight_through = c.straight_through;
  so.magcn.layers = c.magcn_layers;
  so.magcn.cbam_reduction = c.cbam_reduction;
  so.magcn.residual = c.residual;
  return so;
}

RegionPartition partition_for(const ModelConfig& c) {
  if (!c.partition_file.empty()) return RegionPartition::load(c.partition_file);
  if (c.nodes == 62) return RegionPartition::default_62();
  return RegionPartition::single(c.nodes);
}

}  // namespace

Tensor row_attention(const Tensor& stacked, const Tensor& weight) {
  Tensor projected = matmul(stacked, weight);
  Tensor scores = transpose(sum(matmul(projected, transpose(projected)), 1));
  Tensor weights = scale(transpose(softmax(scores, 1)), static_cast<double>(stacked.rows()));
  return mul(stacked, weights);
}

MindEegModel::MindEegModel(const ModelConfig& config) : MindEegModel(config, partition_for(config)) {}

MindEegModel::MindEegModel(const ModelConfig& config, RegionPartition partition)
    : config_(config), partition_(std::move(partition)) {
  config_.validate();
  if (config_.regional_active()) partition_.validate(config_.nodes, config_.allow_overlap);
  Rng rng(config_.seed);
  build(rng);
}

void MindEegModel::build(Rng& rng) {
  const ModelConfig& c = config_;
  const std::size_t width = c.global_out;

  // Every stream is constructed so ablated ones keep their (unused) tensors;
  // only the active streams contribute to parameters().
  StreamOptions gso = base_stream(c);
  gso.nodes = c.nodes;
  gso.out_dim = c.global_out;
  gso.codebook.entries = c.k_global;
  global.emplace(gso, rng);

  RegionalOptions ro;
  ro.stream = base_stream(c);
  ro.stream.out_dim = c.intra_out;
  ro.stream.codebook.entries = c.k_intra;
  ro.encode = !c.intra_removed;
  ro.shared_fuse_weight = c.shared_fuse_weight;
  intra.emplace(partition_, ro, rng);

  StreamOptions iso = base_stream(c);
  iso.bands = c.inter_bands;
  iso.out_dim = c.inter_out;
  iso.codebook.entries = c.k_inter;
  inter.emplace(partition_.size(), intra->out_dim(), iso, rng);

  const std::size_t regional_width = c.inter_active() ? c.inter_out : intra->out_dim();
  if (regional_width != width) regional_projection.emplace(regional_width, width, rng);

  std::size_t rows = 0;
  if (c.global_active()) rows += c.nodes;
  if (c.regional_active()) rows += partition_.size();
  head_attention = fan_in_parameter({width, width}, width, rng);
  fc1 = Linear(rows * width, c.head_hidden1, rng);
  fc2 = Linear(c.head_hidden1, c.head_hidden2, rng);
  fc3 = Linear(c.head_hidden2, c.classes, rng);

  if (c.global_active()) global->collect(parameters_, "global");
  if (c.regional_active()) intra->collect(parameters_, "intra");
  if (c.inter_active()) inter->collect(parameters_, "inter");
  if (c.regional_active() && regional_projection) regional_projection->collect(parameters_, "regional_projection");
  parameters_.push_back({"head.attention", head_attention});
  fc1.collect(parameters_, "head.fc1");
  fc2.collect(parameters_, "head.fc2");
  fc3.collect(parameters_, "head.fc3");
}

ParameterList MindEegModel::all_parameters() const {
  ParameterList out;
  global->collect(out, "global");
  intra->collect_all(out, "intra");
  inter->collect(out, "inter");
  if (regional_projection) regional_projection->collect(out, "regional_projection");
  out.push_back({"head.attention", head_attention});
  fc1.collect(out, "head.fc1");
  fc2.collect(out, "head.fc2");
  fc3.collect(out, "head.fc3");
  return out;
}

ForwardResult MindEegModel::forward(const Tensor& x) {
  if (x.rank() != 2 || x.rows() != config_.nodes || x.cols() != config_.bands) {
    throw ShapeError("model expects a " + shape_string({config_.nodes, config_.bands}) + " sample, got " +
                     shape_string(x.shape()));
  }
  ForwardResult out;
  std::vector<Tensor> stack;
  out.global_vq = Tensor::scalar(0.0);
  out.intra_vq = Tensor::scalar(0.0);
  out.inter_vq = Tensor::scalar(0.0);
  if (config_.global_active()) {
    StreamOutput g = global->forward(x);
    stack.push_back(g.features);
    out.global_vq = g.vq_loss;
  }
  if (config_.regional_active()) {
    IntraRegionalOutput r = intra->forward(x);
    out.intra_vq = r.vq_loss;
    Tensor regional = r.fused;
    if (config_.inter_active()) {
      InterRegionalOutput ir = inter->forward(r.fused);
      out.inter_vq = ir.vq_loss;
      regional = ir.features;
    }
    if (regional_projection) regional = (*regional_projection)(regional);
    stack.push_back(regional);
  }
  Tensor stacked = concat(stack, 0);
  out.stacked_rows = stacked.rows();
  Tensor attended = row_attention(stacked, head_attention);
  Tensor flat = reshape(attended, {1, attended.numel()});
  out.logits = fc3(relu(fc2(relu(fc1(flat)))));
  return out;
}

std::vector<std::pair<std::string, GraphCodebook*>> MindEegModel::codebooks() {
  std::vector<std::pair<std::string, GraphCodebook*>> out;
  if (config_.global_active()) out.emplace_back("global", &global->codebook);
  if (config_.intra_active()) {
    auto& streams = intra->streams();
    for (std::size_t i = 0; i < streams.size(); ++i) out.emplace_back("intra." + std::to_string(i), &streams[i].codebook);
  }
  if (config_.inter_active()) out.emplace_back("inter", &inter->stream.codebook);
  return out;
}

void MindEegModel::reset_codebook_usage() {
  for (auto& [name, cb] : codebooks()) cb->reset_usage();
}

void MindEegModel::seed_codebooks(const std::vector<Tensor>& samples, std::uint64_t seed) {
  if (samples.empty()) return;
  NoGradGuard no_grad;
  Rng rng(seed);
  auto books = codebooks();
  // Two passes: the inter-regional codebook consumes intra-regional outputs.
  for (int pass = 0; pass < 2; ++pass) {
    for (auto& [name, cb] : books) {
      if (pass == 0 || name == "inter") cb->set_capture(true);
    }
    for (const auto& x : samples) forward(x);
    for (auto& [name, cb] : books) {
      if (pass == 0 || name == "inter") cb->seed_from_captured(rng);
    }
  }
  reset_codebook_usage();
}

void MindEegModel::set_straight_through(bool enabled) {
  for (auto& [name, cb] : codebooks()) cb->set_straight_through(enabled);
  config_.straight_through = enabled;
}

Tensor integrative_loss(const Tensor& logits, std::size_t label, const Tensor& global_vq, const Tensor& intra_vq,
                        const Tensor& inter_vq, double alpha, double beta, double gamma) {
  Tensor loss = cross_entropy(logits, label);
  if (alpha != 0.0) loss = add(loss, scale(global_vq, alpha));
  if (beta != 0.0) loss = add(loss, scale(intra_vq, beta));
  if (gamma != 0.0) loss = add(loss, scale(inter_vq, gamma));
  return loss;
}

Tensor integrative_loss(const ForwardResult& result, std::size_t label, const ModelConfig& config) {
  return integrative_loss(result.logits, label, result.global_vq, result.intra_vq, result.inter_vq,
                          config.loss_weight_global, config.loss_weight_intra, config.loss_weight_inter);
}

void sgd_step(const ParameterList& params, double lr) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    if (!t.has_grad()) continue;
    auto data = t.mutable_data();
    const auto grad = t.grad();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= lr * grad[i];
    t.zero_grad();
  }
}

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) throw DataError("truncated checkpoint " + path);
  return value;
}

std::string get_string(std::istream& is, std::size_t length, const std::string& path) {
  std::string s(length, '\0');
  if (length && !is.read(s.data(), static_cast<std::streamsize>(length))) {
    throw DataError("truncated checkpoint " + path);
  }
  return s;
}

}  // namespace

void save_checkpoint(const MindEegModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint " + path);
  os.write(kCheckpointMagic, 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  const std::string config = model.config().to_text();
  put<std::uint64_t>(os, config.size());
  os.write(config.data(), static_cast<std::streamsize>(config.size()));
  const auto& params = model.parameters();
  put<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.tensor.rank()));
    for (auto e : p.tensor.shape()) put<std::uint64_t>(os, e);
    const auto data = p.tensor.data();
    os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  if (!os) throw DataError("failed writing checkpoint " + path);
}

std::unique_ptr<MindEegModel> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw DataError(path + " is not a checkpoint (bad magic)");
  }
  const auto version = get<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto config_len = get<std::uint64_t>(is, path);
  auto model = std::make_unique<MindEegModel>(ModelConfig::parse(get_string(is, config_len, path)));

  std::map<std::string, Tensor> by_name;
  for (const auto& p : model->parameters()) by_name.emplace(p.name, p.tensor);
  const auto count = get<std::uint32_t>(is, path);
  if (count != by_name.size()) {
    throw DataError("checkpoint holds " + std::to_string(count) + " tensors, config expects " +
                    std::to_string(by_name.size()));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = get_string(is, get<std::uint32_t>(is, path), path);
    const auto rank = get<std::uint32_t>(is, path);
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(get<std::uint64_t>(is, path));
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint tensor `" + name + "` not in model");
    Tensor target = it->second;
    if (target.shape() != shape) {
      throw DataError("checkpoint tensor `" + name + "` has shape " + shape_string(shape) + ", config expects " +
                      shape_string(target.shape()));
    }
    auto data = target.mutable_data();
    if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)))) {
      throw DataError("truncated checkpoint " + path);
    }
  }
  return model;
}

}  // namespace mindeeg
