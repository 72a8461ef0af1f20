#include "mindeeg/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <tuple>

#include "mindeeg/errors.hpp"

namespace mindeeg {

Protocol parse_protocol(const std::string& name) {
  if (name == "dep" || name == "last-two") return Protocol::LastTwoPerClass;
  if (name == "mped" || name == "last-quarter") return Protocol::LastQuarter;
  if (name == "threefold") return Protocol::ThreeFold;
  throw ConfigError("unknown protocol `" + name + "`");
}

namespace {

using TrialKey = std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>;  // subject, session, trial

struct SessionTrials {
  std::vector<std::uint32_t> trials;            // ascending
  std::map<std::uint32_t, std::uint32_t> label;  // trial → class
};

std::map<std::uint32_t, std::map<std::uint32_t, SessionTrials>> index_sessions(const Dataset& data) {
  std::map<std::uint32_t, std::map<std::uint32_t, SessionTrials>> out;
  for (const auto& s : data.samples) {
    auto& st = out[s.subject][s.session];
    auto [it, inserted] = st.label.emplace(s.trial, s.label);
    if (!inserted && it->second != s.label) {
      throw DataError("trial " + std::to_string(s.trial) + " of subject " + std::to_string(s.subject) +
                      " mixes labels");
    }
  }
  for (auto& [subject, sessions] : out) {
    for (auto& [session, st] : sessions) {
      for (const auto& [trial, label] : st.label) st.trials.push_back(trial);
    }
  }
  return out;
}

// Test trials of one session under `protocol` (fold selects the third for ThreeFold).
std::set<std::uint32_t> test_trials(const SessionTrials& st, Protocol protocol, std::size_t fold,
                                    std::uint32_t subject, std::uint32_t session) {
  const auto where = " (subject " + std::to_string(subject) + ", session " + std::to_string(session) + ")";
  std::set<std::uint32_t> test;
  const std::size_t T = st.trials.size();
  switch (protocol) {
    case Protocol::LastTwoPerClass: {
      std::map<std::uint32_t, std::vector<std::uint32_t>> by_class;
      for (auto t : st.trials) by_class[st.label.at(t)].push_back(t);
      for (const auto& [label, trials] : by_class) {
        if (trials.size() < 3) {
          throw DataError("insufficient trials for last-two protocol: class " + std::to_string(label) + " has " +
                          std::to_string(trials.size()) + where);
        }
        test.insert(trials.end() - 2, trials.end());
      }
      break;
    }
    case Protocol::LastQuarter: {
      if (T < 4) throw DataError("insufficient trials for last-quarter protocol: " + std::to_string(T) + where);
      test.insert(st.trials.end() - static_cast<std::ptrdiff_t>(T / 4), st.trials.end());
      break;
    }
    case Protocol::ThreeFold: {
      if (T < 3) throw DataError("insufficient trials for three-fold protocol: " + std::to_string(T) + where);
      const std::size_t lo = fold * T / 3, hi = (fold + 1) * T / 3;
      test.insert(st.trials.begin() + static_cast<std::ptrdiff_t>(lo),
                  st.trials.begin() + static_cast<std::ptrdiff_t>(hi));
      break;
    }
  }
  return test;
}

}  // namespace

std::vector<SplitPlan> split_subject_dependent(const Dataset& data, Protocol protocol) {
  const auto sessions = index_sessions(data);
  const std::size_t folds = protocol == Protocol::ThreeFold ? 3 : 1;
  std::vector<SplitPlan> plans;
  for (const auto& [subject, subject_sessions] : sessions) {
    for (std::size_t fold = 0; fold < folds; ++fold) {
      std::map<std::uint32_t, std::set<std::uint32_t>> held_out;
      for (const auto& [session, st] : subject_sessions) {
        held_out[session] = test_trials(st, protocol, fold, subject, session);
      }
      SplitPlan plan;
      plan.name = "subject" + std::to_string(subject) + (folds > 1 ? "_fold" + std::to_string(fold) : "");
      for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const auto& s = data.samples[i];
        if (s.subject != subject) continue;
        (held_out[s.session].count(s.trial) ? plan.test : plan.train).push_back(i);
      }
      plans.push_back(std::move(plan));
    }
  }
  return plans;
}

std::vector<SplitPlan> split_loso(const Dataset& data) {
  std::set<std::uint32_t> subjects;
  for (const auto& s : data.samples) subjects.insert(s.subject);
  if (subjects.size() < 2) throw DataError("leave-one-subject-out needs at least two subjects");
  std::vector<SplitPlan> plans;
  for (auto held : subjects) {
    SplitPlan plan;
    plan.name = "loso_subject" + std::to_string(held);
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
      (data.samples[i].subject == held ? plan.test : plan.train).push_back(i);
    }
    plans.push_back(std::move(plan));
  }
  return plans;
}

void audit_split(const Dataset& data, const SplitPlan& plan, SplitGranularity granularity) {
  if (plan.test.empty()) throw DataError(plan.name + ": empty test set");
  std::set<std::size_t> train(plan.train.begin(), plan.train.end());
  if (train.size() != plan.train.size()) throw DataError(plan.name + ": duplicate train index");
  std::set<std::size_t> test(plan.test.begin(), plan.test.end());
  if (test.size() != plan.test.size()) throw DataError(plan.name + ": duplicate test index");
  std::set<TrialKey> train_trials;
  std::set<std::uint32_t> train_subjects;
  for (auto i : plan.train) {
    if (i >= data.size()) throw DataError(plan.name + ": train index out of range");
    const auto& s = data.samples[i];
    train_trials.emplace(s.subject, s.session, s.trial);
    train_subjects.insert(s.subject);
  }
  for (auto i : plan.test) {
    if (i >= data.size()) throw DataError(plan.name + ": test index out of range");
    if (train.count(i)) throw DataError(plan.name + ": sample " + std::to_string(i) + " on both sides");
    const auto& s = data.samples[i];
    if (granularity == SplitGranularity::Trial && train_trials.count({s.subject, s.session, s.trial})) {
      throw DataError(plan.name + ": trial " + std::to_string(s.trial) + " leaks across the split");
    }
    if (granularity == SplitGranularity::Subject && train_subjects.count(s.subject)) {
      throw DataError(plan.name + ": subject " + std::to_string(s.subject) + " leaks across the split");
    }
  }
}

std::size_t MetricsReport::total() const {
  std::size_t t = 0;
  for (const auto& row : confusion)
    for (auto v : row) t += v;
  return t;
}

MetricsReport compute_metrics(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                              std::size_t classes) {
  if (truth.empty()) throw DataError("cannot evaluate an empty test set");
  if (truth.size() != predicted.size()) throw DataError("prediction count does not match ground truth");
  MetricsReport r;
  r.classes = classes;
  r.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= classes || predicted[i] >= classes) throw DataError("class id out of range in metrics");
    ++r.confusion[truth[i]][predicted[i]];
  }
  std::size_t correct = 0;
  for (std::size_t c = 0; c < classes; ++c) correct += r.confusion[c][c];
  r.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(truth.size());
  double f1_sum = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t tp = r.confusion[c][c], fp = 0, fn = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      if (k == c) continue;
      fp += r.confusion[k][c];
      fn += r.confusion[c][k];
    }
    const double denom = static_cast<double>(2 * tp + fp + fn);
    f1_sum += denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
  }
  r.macro_f1 = 100.0 * f1_sum / static_cast<double>(classes);
  return r;
}

Aggregate aggregate(const std::vector<double>& values) {
  Aggregate a;
  if (values.empty()) return a;
  for (double v : values) a.mean += v;
  a.mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.stddev = std::sqrt(ss / static_cast<double>(values.size()));
  return a;
}

std::string format_mean_std(const Aggregate& a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f±%.2f", a.mean, a.stddev);
  return buf;
}

}  // namespace mindeeg
