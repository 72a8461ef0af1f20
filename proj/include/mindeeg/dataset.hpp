// EEG feature datasets: binary and CSV I/O, train-split z-scoring, and the
// synthetic class-conditional generator.
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mindeeg/tensor.hpp"

namespace mindeeg {

struct EEGSample {
  std::vector<double> features;  // nodes·bands, row-major (node, band)
  std::uint32_t label = 0;
  std::uint32_t subject = 0;
  std::uint32_t session = 0;
  std::uint32_t trial = 0;
};

struct Dataset {
  std::size_t nodes = 62;
  std::size_t bands = 5;
  std::size_t classes = 4;
  std::vector<EEGSample> samples;

  std::size_t size() const { return samples.size(); }
  Tensor features(std::size_t i) const;
  // Throws DataError on wrong feature length, non-finite values, or labels ≥ classes.
  void validate() const;
};

// Binary layout: "MEFX", u32 version, u32 n, u32 d, u32 C, u64 count, then per
// sample u32 subject, session, trial, label and n·d little-endian f64 values.
void write_features(const Dataset& data, const std::string& path);
Dataset read_features(const std::string& path);
void write_features(const Dataset& data, std::ostream& os);
Dataset read_features(std::istream& is, const std::string& origin = "<stream>");

// CSV: header `subject,session,trial,label,f0,...` then one row per sample.
void write_features_csv(const Dataset& data, std::ostream& os);
Dataset read_features_csv(std::istream& is, std::size_t nodes, std::size_t bands, std::size_t classes);

// Per-dimension z-score statistics fitted on a subset of samples.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Normalizer fit(const Dataset& data, std::span<const std::size_t> indices);
  void apply(EEGSample& sample) const;
  Dataset apply(const Dataset& data) const;

  // Text file: a `mean` line and a `stddev` line of space-separated values.
  void save(const std::string& path) const;
  static Normalizer load(const std::string& path);
};

struct SynthOptions {
  std::uint64_t seed = 7;
  std::size_t subjects = 1;
  std::size_t classes = 4;
  std::size_t per_class = 20;          // samples per class, per subject and session
  std::size_t trials_per_class = 1;    // samples of a class are spread over this many trials
  std::size_t sessions = 1;
  std::size_t nodes = 62;
  std::size_t bands = 5;
  std::size_t template_rank = 4;       // rank of each class's node-covariance factor
  double class_separation = 1.0;       // scale of class-specific band mean offsets
  double subject_shift = 0.3;          // scale of per-subject affine perturbation
  double noise = 1.0;                  // scale of class-covariance noise
};

// Per class: a band-specific mean offset and a low-rank node-covariance
// template. Per subject: a random gain and offset. Trial ids are numbered per
// session in class-interleaved order (trial t has class t mod C).
Dataset synth_generate(const SynthOptions& options);

}  // namespace mindeeg
