// Train/test split protocols and evaluation metrics.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mindeeg/dataset.hpp"

namespace mindeeg {

struct SplitPlan {
  std::string name;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

enum class Protocol {
  LastTwoPerClass,  // per session: last two trials of every class are test
  LastQuarter,      // per session: the last quarter of trials (21/7 of 28) are test
  ThreeFold,        // per session: first / middle / last thirds of trials, one fold each
};

Protocol parse_protocol(const std::string& name);

// One plan per subject (per subject × fold for ThreeFold). Throws DataError
// when a session has too few trials for the protocol.
std::vector<SplitPlan> split_subject_dependent(const Dataset& data, Protocol protocol);

// One plan per subject holding out all of that subject's sessions.
std::vector<SplitPlan> split_loso(const Dataset& data);

enum class SplitGranularity { Trial, Subject };

// Throws DataError describing the first leak found: overlapping indices, out
// of range indices, an empty test set, or a (subject, session, trial) /
// subject key on both sides.
void audit_split(const Dataset& data, const SplitPlan& plan, SplitGranularity granularity);

struct MetricsReport {
  std::size_t classes = 0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  double accuracy = 0.0;                            // percent
  double macro_f1 = 0.0;                            // percent

  std::size_t total() const;
};

MetricsReport compute_metrics(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                              std::size_t classes);

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // population (divide by N)
};

Aggregate aggregate(const std::vector<double>& values);
// Two decimals each, e.g. `92.21±9.05`.
std::string format_mean_std(const Aggregate& a);

}  // namespace mindeeg
