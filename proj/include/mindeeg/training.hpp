// Minibatch SGD training, evaluation, and the per-plan experiment runner.
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mindeeg/codebook.hpp"
#include "mindeeg/dataset.hpp"
#include "mindeeg/model.hpp"
#include "mindeeg/protocol.hpp"

namespace mindeeg {

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;  // percent, from the training forwards of this epoch
};

struct TrainOptions {
  std::size_t epochs = 200;
  std::size_t batch = 32;
  double lr = 1e-2;
  std::uint64_t shuffle_seed = 1;
  std::function<void(const EpochLog&)> on_epoch;  // optional
};

TrainOptions train_options_from(const ModelConfig& config);

// Shuffled minibatches; each sample's loss is back-propagated with weight
// 1/|batch| so the step follows the batch-mean gradient. Throws NumericError
// naming the first operation with a non-finite output when the loss is NaN/Inf.
std::vector<EpochLog> train(MindEegModel& model, const Dataset& data, const std::vector<std::size_t>& indices,
                            const TrainOptions& options);

std::size_t predict(MindEegModel& model, const Tensor& x);
std::vector<std::size_t> predict_all(MindEegModel& model, const Dataset& data,
                                     const std::vector<std::size_t>& indices);
MetricsReport evaluate(MindEegModel& model, const Dataset& data, const std::vector<std::size_t>& indices);

struct CodebookHistogram {
  std::string label;
  std::vector<UsageEntry> entries;
};

std::vector<CodebookHistogram> codebook_histograms(MindEegModel& model);

struct RunResult {
  std::unique_ptr<MindEegModel> model;
  Normalizer normalizer;
  std::vector<EpochLog> log;
  MetricsReport train_metrics;
  MetricsReport test_metrics;
  std::vector<CodebookHistogram> histograms;  // usage over the test pass
};

// Fits normalization on the plan's training samples, trains a fresh model,
// then evaluates train and test sets. Codebook usage is reset before the
// test pass so the histograms describe test-time assignments only.
RunResult run_training(const ModelConfig& config, const Dataset& data, const SplitPlan& plan,
                       const TrainOptions& options);
RunResult run_training(const ModelConfig& config, const Dataset& data, const SplitPlan& plan);

}  // namespace mindeeg
