#include "mindeeg/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mindeeg/errors.hpp"

namespace mindeeg {

TrainOptions train_options_from(const ModelConfig& config) {
  TrainOptions o;
  o.epochs = config.epochs;
  o.batch = config.batch;
  o.lr = config.lr;
  o.shuffle_seed = config.seed;
  return o;
}

namespace {

std::size_t argmax(const Tensor& logits) {
  const auto& v = logits.data();
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

std::vector<EpochLog> train(MindEegModel& model, const Dataset& data, const std::vector<std::size_t>& indices,
                            const TrainOptions& options) {
  if (indices.empty()) throw DataError("cannot train on an empty split");
  if (options.batch == 0) throw ConfigError("batch size must be positive");
  Rng rng(options.shuffle_seed);
  std::vector<std::size_t> order = indices;
  std::vector<EpochLog> logs;
  const auto& params = model.parameters();
  zero_grads(params);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch) {
      const std::size_t end = std::min(order.size(), start + options.batch);
      const double weight = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const auto& sample = data.samples[order[k]];
        Tape tape;
        TapeGuard guard(tape);
        ForwardResult result = model.forward(data.features(order[k]));
        Tensor loss = integrative_loss(result, sample.label, model.config());
        if (!std::isfinite(loss.item())) {
          const auto op = tape.first_non_finite();
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) + "; first non-finite op: " +
                             op.value_or("<none recorded>"));
        }
        loss_sum += loss.item();
        if (argmax(result.logits) == sample.label) ++correct;
        tape.backward(loss, weight);
      }
      sgd_step(params, options.lr);
    }
    EpochLog log{epoch + 1, loss_sum / static_cast<double>(order.size()),
                 100.0 * static_cast<double>(correct) / static_cast<double>(order.size())};
    if (options.on_epoch) options.on_epoch(log);
    logs.push_back(log);
  }
  return logs;
}

std::size_t predict(MindEegModel& model, const Tensor& x) {
  NoGradGuard guard;
  return argmax(model.forward(x).logits);
}

std::vector<std::size_t> predict_all(MindEegModel& model, const Dataset& data,
                                     const std::vector<std::size_t>& indices) {
  std::vector<std::size_t> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(predict(model, data.features(i)));
  return out;
}

MetricsReport evaluate(MindEegModel& model, const Dataset& data, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw DataError("cannot evaluate an empty test set");
  std::vector<std::size_t> truth;
  truth.reserve(indices.size());
  for (auto i : indices) truth.push_back(data.samples.at(i).label);
  return compute_metrics(truth, predict_all(model, data, indices), data.classes);
}

std::vector<CodebookHistogram> codebook_histograms(MindEegModel& model) {
  std::vector<CodebookHistogram> out;
  for (auto& [label, cb] : model.codebooks()) out.push_back({label, usage_histogram(*cb)});
  return out;
}

RunResult run_training(const ModelConfig& config, const Dataset& data, const SplitPlan& plan,
                       const TrainOptions& options) {
  config.validate();
  if (data.nodes != config.nodes || data.bands != config.bands || data.classes != config.classes) {
    throw ConfigError("dataset dimensions do not match the model config");
  }
  if (plan.test.empty()) throw DataError(plan.name + ": empty test set");
  RunResult r;
  r.normalizer = Normalizer::fit(data, plan.train);
  const Dataset normalized = r.normalizer.apply(data);
  r.model = std::make_unique<MindEegModel>(config);
  if (config.seed_codebooks) {
    std::vector<Tensor> inputs;
    inputs.reserve(plan.train.size());
    for (auto i : plan.train) inputs.push_back(normalized.features(i));
    r.model->seed_codebooks(inputs, config.seed);
  }
  r.log = train(*r.model, normalized, plan.train, options);
  r.train_metrics = evaluate(*r.model, normalized, plan.train);
  r.model->reset_codebook_usage();
  r.test_metrics = evaluate(*r.model, normalized, plan.test);
  r.histograms = codebook_histograms(*r.model);
  return r;
}

RunResult run_training(const ModelConfig& config, const Dataset& data, const SplitPlan& plan) {
  return run_training(config, data, plan, train_options_from(config));
}

}  // namespace mindeeg
