#include "mindeeg/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "mindeeg/errors.hpp"
#include "mindeeg/parameters.hpp"

namespace mindeeg {

namespace {

constexpr char kFeatureMagic[4] = {'M', 'E', 'F', 'X'};
constexpr std::uint32_t kFeatureVersion = 1;

static_assert(std::endian::native == std::endian::little, "feature I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& origin, const char* what) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw DataError(origin + ": truncated while reading " + what);
  }
  return value;
}

}  // namespace

Tensor Dataset::features(std::size_t i) const { return Tensor({nodes, bands}, samples.at(i).features); }

void Dataset::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.features.size() != nodes * bands) {
      throw DataError("sample " + std::to_string(i) + " has " + std::to_string(s.features.size()) +
                      " features, expected " + std::to_string(nodes * bands));
    }
    for (double v : s.features) {
      if (!std::isfinite(v)) throw DataError("sample " + std::to_string(i) + " has a non-finite feature");
    }
    if (s.label >= classes) {
      throw DataError("sample " + std::to_string(i) + " label " + std::to_string(s.label) + " out of range for " +
                      std::to_string(classes) + " classes");
    }
  }
}

void write_features(const Dataset& data, std::ostream& os) {
  os.write(kFeatureMagic, 4);
  put<std::uint32_t>(os, kFeatureVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(data.nodes));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(data.bands));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(data.classes));
  put<std::uint64_t>(os, data.samples.size());
  for (const auto& s : data.samples) {
    put(os, s.subject);
    put(os, s.session);
    put(os, s.trial);
    put(os, s.label);
    os.write(reinterpret_cast<const char*>(s.features.data()),
             static_cast<std::streamsize>(s.features.size() * sizeof(double)));
  }
}

void write_features(const Dataset& data, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write feature file " + path);
  write_features(data, os);
  if (!os) throw DataError("failed writing feature file " + path);
}

Dataset read_features(std::istream& is, const std::string& origin) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kFeatureMagic, 4) != 0) {
    throw DataError(origin + ": malformed header (missing MEFX magic)");
  }
  const auto version = get<std::uint32_t>(is, origin, "version");
  if (version != kFeatureVersion) {
    throw DataError(origin + ": malformed header (unsupported version " + std::to_string(version) + ")");
  }
  Dataset data;
  data.nodes = get<std::uint32_t>(is, origin, "node count");
  data.bands = get<std::uint32_t>(is, origin, "band count");
  data.classes = get<std::uint32_t>(is, origin, "class count");
  if (data.nodes == 0 || data.bands == 0 || data.classes == 0) {
    throw DataError(origin + ": malformed header (zero dimension)");
  }
  const auto count = get<std::uint64_t>(is, origin, "sample count");
  const std::size_t width = data.nodes * data.bands;
  data.samples.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    EEGSample s;
    s.subject = get<std::uint32_t>(is, origin, "subject id");
    s.session = get<std::uint32_t>(is, origin, "session id");
    s.trial = get<std::uint32_t>(is, origin, "trial id");
    s.label = get<std::uint32_t>(is, origin, "label");
    s.features.resize(width);
    if (!is.read(reinterpret_cast<char*>(s.features.data()), static_cast<std::streamsize>(width * sizeof(double)))) {
      throw DataError(origin + ": truncated in sample " + std::to_string(i));
    }
    for (double v : s.features) {
      if (!std::isfinite(v)) throw DataError(origin + ": NaN or Inf feature in sample " + std::to_string(i));
    }
    if (s.label >= data.classes) {
      throw DataError(origin + ": label " + std::to_string(s.label) + " out of range in sample " + std::to_string(i));
    }
    data.samples.push_back(std::move(s));
  }
  return data;
}

Dataset read_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open feature file " + path);
  return read_features(is, path);
}

void write_features_csv(const Dataset& data, std::ostream& os) {
  os << "subject,session,trial,label";
  for (std::size_t i = 0; i < data.nodes * data.bands; ++i) os << ",f" << i;
  os << '\n';
  os.precision(17);
  for (const auto& s : data.samples) {
    os << s.subject << ',' << s.session << ',' << s.trial << ',' << s.label;
    for (double v : s.features) os << ',' << v;
    os << '\n';
  }
}

Dataset read_features_csv(std::istream& is, std::size_t nodes, std::size_t bands, std::size_t classes) {
  Dataset data;
  data.nodes = nodes;
  data.bands = bands;
  data.classes = classes;
  std::string line;
  if (!std::getline(is, line) || line.rfind("subject,session,trial,label", 0) != 0) {
    throw DataError("csv: malformed header");
  }
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw DataError("csv row " + std::to_string(row) + ": cannot parse `" + cell + "`");
      }
    }
    if (values.size() != 4 + nodes * bands) {
      throw DataError("csv row " + std::to_string(row) + ": expected " + std::to_string(4 + nodes * bands) +
                      " fields, got " + std::to_string(values.size()));
    }
    EEGSample s;
    s.subject = static_cast<std::uint32_t>(values[0]);
    s.session = static_cast<std::uint32_t>(values[1]);
    s.trial = static_cast<std::uint32_t>(values[2]);
    s.label = static_cast<std::uint32_t>(values[3]);
    s.features.assign(values.begin() + 4, values.end());
    data.samples.push_back(std::move(s));
  }
  data.validate();
  return data;
}

Normalizer Normalizer::fit(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DataError("cannot fit normalization on an empty split");
  const std::size_t width = data.nodes * data.bands;
  Normalizer norm;
  norm.mean.assign(width, 0.0);
  norm.stddev.assign(width, 0.0);
  for (auto i : indices) {
    const auto& f = data.samples.at(i).features;
    for (std::size_t k = 0; k < width; ++k) norm.mean[k] += f[k];
  }
  const double count = static_cast<double>(indices.size());
  for (auto& m : norm.mean) m /= count;
  for (auto i : indices) {
    const auto& f = data.samples[i].features;
    for (std::size_t k = 0; k < width; ++k) {
      const double d = f[k] - norm.mean[k];
      norm.stddev[k] += d * d;
    }
  }
  for (auto& s : norm.stddev) {
    s = std::sqrt(s / count);
    if (s == 0.0) s = 1.0;
  }
  return norm;
}

void Normalizer::apply(EEGSample& sample) const {
  if (sample.features.size() != mean.size()) {
    throw DataError("normalizer expects " + std::to_string(mean.size()) + " features, sample has " +
                    std::to_string(sample.features.size()));
  }
  for (std::size_t k = 0; k < sample.features.size(); ++k) {
    sample.features[k] = (sample.features[k] - mean[k]) / stddev[k];
  }
}

Dataset Normalizer::apply(const Dataset& data) const {
  Dataset out = data;
  for (auto& s : out.samples) apply(s);
  return out;
}

void Normalizer::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write normalizer " + path);
  os.precision(17);
  os << "mean";
  for (double v : mean) os << ' ' << v;
  os << "\nstddev";
  for (double v : stddev) os << ' ' << v;
  os << '\n';
  if (!os) throw DataError("failed writing normalizer " + path);
}

Normalizer Normalizer::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open normalizer " + path);
  Normalizer norm;
  for (auto* target : {&norm.mean, &norm.stddev}) {
    std::string line, tag;
    if (!std::getline(is, line)) throw DataError(path + ": truncated normalizer file");
    std::istringstream row(line);
    row >> tag;
    double v;
    while (row >> v) target->push_back(v);
  }
  if (norm.mean.empty() || norm.mean.size() != norm.stddev.size()) {
    throw DataError(path + ": mean and stddev lengths differ");
  }
  for (double s : norm.stddev) {
    if (!(s > 0.0)) throw DataError(path + ": non-positive stddev");
  }
  return norm;
}

Dataset synth_generate(const SynthOptions& o) {
  if (o.subjects == 0 || o.classes == 0 || o.per_class == 0 || o.sessions == 0 || o.trials_per_class == 0 ||
      o.nodes == 0 || o.bands == 0) {
    throw ConfigError("synthetic generator needs positive counts");
  }
  if (o.trials_per_class > o.per_class) {
    throw ConfigError("synthetic generator: more trials per class than samples per class");
  }
  Rng rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = o.nodes, d = o.bands, rank = std::max<std::size_t>(1, o.template_rank);

  std::vector<std::vector<double>> class_mean(o.classes, std::vector<double>(n * d));
  std::vector<std::vector<double>> class_factor(o.classes, std::vector<double>(n * rank));
  for (std::size_t c = 0; c < o.classes; ++c) {
    for (auto& v : class_mean[c]) v = o.class_separation * normal(rng);
    for (auto& v : class_factor[c]) v = normal(rng) / std::sqrt(static_cast<double>(rank));
  }

  Dataset data;
  data.nodes = n;
  data.bands = d;
  data.classes = o.classes;
  const std::size_t trials = o.classes * o.trials_per_class;
  for (std::size_t s = 0; s < o.subjects; ++s) {
    std::vector<double> gain(d), offset(n * d);
    for (auto& g : gain) g = 1.0 + 0.5 * o.subject_shift * normal(rng);
    for (auto& t : offset) t = o.subject_shift * normal(rng);
    for (std::size_t session = 0; session < o.sessions; ++session) {
      for (std::size_t t = 0; t < trials; ++t) {
        const std::size_t c = t % o.classes;
        const std::size_t k = t / o.classes;  // k-th trial of this class
        const std::size_t count = o.per_class / o.trials_per_class + (k < o.per_class % o.trials_per_class ? 1 : 0);
        for (std::size_t i = 0; i < count; ++i) {
          EEGSample sample;
          sample.subject = static_cast<std::uint32_t>(s);
          sample.session = static_cast<std::uint32_t>(session);
          sample.trial = static_cast<std::uint32_t>(t);
          sample.label = static_cast<std::uint32_t>(c);
          sample.features.resize(n * d);
          std::vector<double> latent(rank);
          for (std::size_t b = 0; b < d; ++b) {
            for (auto& z : latent) z = normal(rng);
            for (std::size_t node = 0; node < n; ++node) {
              double structured = 0.0;
              for (std::size_t r = 0; r < rank; ++r) structured += class_factor[c][node * rank + r] * latent[r];
              const double clean = class_mean[c][node * d + b] + o.noise * (structured + 0.5 * normal(rng));
              sample.features[node * d + b] = gain[b] * clean + offset[node * d + b];
            }
          }
          data.samples.push_back(std::move(sample));
        }
      }
    }
  }
  return data;
}

}  // namespace mindeeg
