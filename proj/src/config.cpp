#include "mindeeg/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <sstream>
#include <type_traits>

#include "mindeeg/errors.hpp"

namespace mindeeg {

namespace {

template <typename Config, typename F>
void visit_fields(Config& c, F&& f) {
  f("nodes", c.nodes);
  f("bands", c.bands);
  f("classes", c.classes);
  f("k_global", c.k_global);
  f("k_intra", c.k_intra);
  f("k_inter", c.k_inter);
  f("codebook_dim", c.codebook_dim);
  f("commitment_weight", c.commitment_weight);
  f("loss_weight_global", c.loss_weight_global);
  f("loss_weight_intra", c.loss_weight_intra);
  f("loss_weight_inter", c.loss_weight_inter);
  f("lr", c.lr);
  f("batch", c.batch);
  f("epochs", c.epochs);
  f("seed", c.seed);
  f("magcn_layers", c.magcn_layers);
  f("global_out", c.global_out);
  f("intra_out", c.intra_out);
  f("inter_out", c.inter_out);
  f("inter_bands", c.inter_bands);
  f("head_hidden1", c.head_hidden1);
  f("head_hidden2", c.head_hidden2);
  f("se_reduction", c.se_reduction);
  f("cbam_reduction", c.cbam_reduction);
  f("adjacency_shift", c.adjacency_shift);
  f("allow_overlap", c.allow_overlap);
  f("cosine_codebook", c.cosine_codebook);
  f("straight_through", c.straight_through);
  f("seed_codebooks", c.seed_codebooks);
  f("residual", c.residual);
  f("shared_fuse_weight", c.shared_fuse_weight);
  f("partition_file", c.partition_file);
  f("global_removed", c.global_removed);
  f("intra_removed", c.intra_removed);
  f("inter_removed", c.inter_removed);
  f("regional_removed", c.regional_removed);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
void assign(const std::string& key, const std::string& text, T& field) {
  auto bad = [&] { return ConfigError("config key `" + key + "`: cannot parse `" + text + "`"); };
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1") field = true;
    else if (text == "false" || text == "0") field = false;
    else throw bad();
  } else if constexpr (std::is_same_v<T, std::string>) {
    field = text;
  } else if constexpr (std::is_floating_point_v<T>) {
    std::size_t used = 0;
    try {
      field = std::stod(text, &used);
    } catch (const std::exception&) {
      throw bad();
    }
    if (used != text.size()) throw bad();
  } else {
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, field);
    if (ec != std::errc() || ptr != end) throw bad();
  }
}

}  // namespace

void ModelConfig::set(const std::string& key, const std::string& value) {
  bool found = false;
  visit_fields(*this, [&](const char* name, auto& field) {
    if (key == name) {
      assign(key, value, field);
      found = true;
    }
  });
  if (!found) throw ConfigError("unknown config key `" + key + "`");
}

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  visit_fields(*this, [&](const char* name, const auto& field) {
    using T = std::decay_t<decltype(field)>;
    os << name << " = ";
    if constexpr (std::is_same_v<T, bool>) os << (field ? "true" : "false");
    else os << field;
    os << '\n';
  });
  return os.str();
}

ModelConfig ModelConfig::parse(std::istream& in) {
  ModelConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected `key = value`");
    }
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

ModelConfig ModelConfig::parse(const std::string& text) {
  std::istringstream in(text);
  return parse(in);
}

ModelConfig ModelConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse(in);
}

void ModelConfig::validate() const {
  auto positive = [](const char* name, std::size_t v) {
    if (v == 0) throw ConfigError(std::string("config `") + name + "` must be positive");
  };
  positive("nodes", nodes);
  positive("bands", bands);
  positive("classes", classes);
  positive("k_global", k_global);
  positive("k_intra", k_intra);
  positive("k_inter", k_inter);
  positive("codebook_dim", codebook_dim);
  positive("batch", batch);
  positive("magcn_layers", magcn_layers);
  positive("global_out", global_out);
  positive("intra_out", intra_out);
  positive("inter_out", inter_out);
  positive("inter_bands", inter_bands);
  positive("head_hidden1", head_hidden1);
  positive("head_hidden2", head_hidden2);
  for (double w : {commitment_weight, loss_weight_global, loss_weight_intra, loss_weight_inter, lr}) {
    if (!(w >= 0.0)) throw ConfigError("config weights and learning rate must be non-negative");
  }
  if (!global_active() && !regional_active()) {
    throw ConfigError("every feature stream is ablated; at least one of global/regional must remain");
  }
}

}  // namespace mindeeg
