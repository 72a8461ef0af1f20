#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mindeeg/config.hpp"
#include "mindeeg/dataset.hpp"
#include "mindeeg/errors.hpp"
#include "mindeeg/model.hpp"
#include "mindeeg/protocol.hpp"
#include "mindeeg/training.hpp"

namespace fs = std::filesystem;
using namespace mindeeg;

namespace {

struct DataArgs {
  std::string data = "synth";
  SynthOptions synth;
};

void add_synth_flags(CLI::App* cmd, SynthOptions& s) {
  cmd->add_option("--seed", s.seed, "Generator seed");
  cmd->add_option("--subjects", s.subjects, "Subjects to generate");
  cmd->add_option("--classes", s.classes, "Class count");
  cmd->add_option("--per-class", s.per_class, "Samples per class, subject and session");
  cmd->add_option("--trials-per-class", s.trials_per_class, "Trials each class is spread over");
  cmd->add_option("--sessions", s.sessions, "Sessions per subject");
  cmd->add_option("--separation", s.class_separation, "Class mean separation");
  cmd->add_option("--subject-shift", s.subject_shift, "Per-subject perturbation scale");
}

bool is_csv(const std::string& path) { return fs::path(path).extension() == ".csv"; }

Dataset load_data(const DataArgs& args, const ModelConfig& config) {
  if (args.data == "synth") {
    SynthOptions s = args.synth;
    s.nodes = config.nodes;
    s.bands = config.bands;
    s.classes = config.classes;
    return synth_generate(s);
  }
  if (is_csv(args.data)) {
    std::ifstream in(args.data);
    if (!in) throw DataError("cannot open " + args.data);
    return read_features_csv(in, config.nodes, config.bands, config.classes);
  }
  return read_features(args.data);
}

ModelConfig build_config(const std::string& path, const std::vector<std::string>& overrides) {
  ModelConfig c = path.empty() ? ModelConfig{} : ModelConfig::load(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got `" + kv + "`");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  c.validate();
  return c;
}

std::vector<SplitPlan> make_plans(const Dataset& data, const std::string& protocol) {
  if (protocol == "loso") return split_loso(data);
  return split_subject_dependent(data, parse_protocol(protocol));
}

void write_histograms(const std::vector<CodebookHistogram>& histograms, const fs::path& stem) {
  for (const auto& h : histograms) {
    std::ofstream os(stem.string() + "_codebook_" + h.label + ".csv");
    write_usage_csv(os, h.entries);
  }
}

int run_train(const ModelConfig& config, const DataArgs& data_args, const std::string& protocol,
              const std::string& out_dir, bool verbose) {
  const Dataset data = load_data(data_args, config);
  data.validate();
  const auto plans = make_plans(data, protocol);
  const auto granularity = protocol == "loso" ? SplitGranularity::Subject : SplitGranularity::Trial;
  fs::create_directories(out_dir);
  {
    std::ofstream cfg(fs::path(out_dir) / "config.txt");
    cfg << config.to_text();
  }
  std::ofstream summary(fs::path(out_dir) / "summary.csv");
  summary << "plan,train_size,test_size,train_acc,test_acc,test_macro_f1\n";
  std::vector<double> accs, f1s;
  for (const auto& plan : plans) {
    audit_split(data, plan, granularity);
    const fs::path stem = fs::path(out_dir) / plan.name;
    std::ofstream log(stem.string() + "_train_log.csv");
    log << "epoch,loss,train_acc\n";
    TrainOptions opts = train_options_from(config);
    opts.on_epoch = [&](const EpochLog& e) {
      log << e.epoch << ',' << e.mean_loss << ',' << e.train_accuracy << '\n';
      if (verbose) std::printf("%s epoch %zu loss %.6f acc %.2f\n", plan.name.c_str(), e.epoch, e.mean_loss,
                               e.train_accuracy);
    };
    RunResult r = run_training(config, data, plan, opts);
    save_checkpoint(*r.model, stem.string() + ".ckpt");
    r.normalizer.save(stem.string() + ".norm");
    write_histograms(r.histograms, stem);
    accs.push_back(r.test_metrics.accuracy);
    f1s.push_back(r.test_metrics.macro_f1);
    summary << plan.name << ',' << plan.train.size() << ',' << plan.test.size() << ',' << r.train_metrics.accuracy
            << ',' << r.test_metrics.accuracy << ',' << r.test_metrics.macro_f1 << '\n';
    std::printf("%-20s train %6.2f  test %6.2f  f1 %6.2f  (params %zu)\n", plan.name.c_str(),
                r.train_metrics.accuracy, r.test_metrics.accuracy, r.test_metrics.macro_f1,
                parameter_count(r.model->parameters()));
  }
  std::printf("ACC %s  F1 %s over %zu plans\n", format_mean_std(aggregate(accs)).c_str(),
              format_mean_std(aggregate(f1s)).c_str(), plans.size());
  return 0;
}

Dataset prepare_eval_data(const MindEegModel& model, const DataArgs& args, const std::string& normalizer_path) {
  Dataset data = load_data(args, model.config());
  data.validate();
  if (!normalizer_path.empty()) return Normalizer::load(normalizer_path).apply(data);
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::fprintf(stderr, "no --normalizer given: z-scoring with statistics of the evaluated data\n");
  return Normalizer::fit(data, all).apply(data);
}

std::vector<std::size_t> all_indices(const Dataset& data) {
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-granularity graph codebook network for EEG emotion recognition"};
  app.require_subcommand(1);

  std::string config_path, protocol = "dep", out_dir = "run", checkpoint, normalizer, out_csv, drop;
  std::vector<std::string> overrides;
  DataArgs data_args;
  bool verbose = false;

  auto* train = app.add_subcommand("train", "Train and evaluate under a split protocol");
  train->add_option("--config", config_path, "Config file (key = value)");
  train->add_option("--set", overrides, "Config override key=value (repeatable)");
  train->add_option("--data", data_args.data, "Feature file (.mefx or .csv) or `synth`");
  train->add_option("--protocol", protocol, "dep | loso | threefold | mped")
      ->check(CLI::IsMember({"dep", "loso", "threefold", "mped"}));
  train->add_option("--out", out_dir, "Output directory");
  train->add_flag("-v,--verbose", verbose, "Print every epoch");
  add_synth_flags(train, data_args.synth);

  auto* ablate = app.add_subcommand("ablate", "Train with one stream removed");
  ablate->add_option("--drop", drop, "global | intra | inter | regional")
      ->required()
      ->check(CLI::IsMember({"global", "intra", "inter", "regional"}));
  ablate->add_option("--config", config_path, "Config file (key = value)");
  ablate->add_option("--set", overrides, "Config override key=value (repeatable)");
  ablate->add_option("--data", data_args.data, "Feature file (.mefx or .csv) or `synth`");
  ablate->add_option("--protocol", protocol, "dep | loso | threefold | mped")
      ->check(CLI::IsMember({"dep", "loso", "threefold", "mped"}));
  ablate->add_option("--out", out_dir, "Output directory");
  ablate->add_flag("-v,--verbose", verbose, "Print every epoch");
  add_synth_flags(ablate, data_args.synth);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a feature file");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", data_args.data, "Feature file (.mefx or .csv) or `synth`")->required();
  eval->add_option("--normalizer", normalizer, "Normalizer written next to the checkpoint by train");
  add_synth_flags(eval, data_args.synth);

  auto* stats = app.add_subcommand("codebook-stats", "Export codebook usage histograms");
  stats->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  stats->add_option("--data", data_args.data, "Feature file (.mefx or .csv) or `synth`")->required();
  stats->add_option("--out", out_csv, "CSV for the global codebook; other codebooks go to <stem>_<label>.csv")
      ->required();
  stats->add_option("--normalizer", normalizer, "Normalizer written next to the checkpoint by train");
  add_synth_flags(stats, data_args.synth);

  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write a synthetic feature file (.mefx binary or .csv)");
  add_synth_flags(synth, data_args.synth);
  synth->add_option("--nodes", data_args.synth.nodes, "Channels");
  synth->add_option("--bands", data_args.synth.bands, "Frequency bands");
  synth->add_option("--out", synth_out, "Output path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_train(build_config(config_path, overrides), data_args, protocol, out_dir, verbose);
    if (*ablate) {
      overrides.push_back(drop + "_removed=true");
      const ModelConfig config = build_config(config_path, overrides);
      std::printf("dropping %s: %zu trainable parameters (full model %zu)\n", drop.c_str(),
                  parameter_count(MindEegModel(config).parameters()),
                  parameter_count(MindEegModel(build_config(config_path, {})).parameters()));
      return run_train(config, data_args, protocol, out_dir, verbose);
    }
    if (*eval) {
      auto model = load_checkpoint(checkpoint);
      const Dataset data = prepare_eval_data(*model, data_args, normalizer);
      const MetricsReport m = evaluate(*model, data, all_indices(data));
      std::printf("samples %zu  ACC %.2f  macro-F1 %.2f\nconfusion (rows: true class)\n", m.total(), m.accuracy,
                  m.macro_f1);
      for (const auto& row : m.confusion) {
        for (auto v : row) std::printf("%6zu", v);
        std::printf("\n");
      }
      return 0;
    }
    if (*stats) {
      auto model = load_checkpoint(checkpoint);
      const Dataset data = prepare_eval_data(*model, data_args, normalizer);
      model->reset_codebook_usage();
      predict_all(*model, data, all_indices(data));
      const fs::path out(out_csv);
      const fs::path stem = out.parent_path() / out.stem();
      for (const auto& h : codebook_histograms(*model)) {
        const std::string path = h.label == "global" ? out.string() : stem.string() + "_" + h.label + ".csv";
        std::ofstream os(path);
        if (!os) throw DataError("cannot write " + path);
        write_usage_csv(os, h.entries);
        std::size_t used = 0;
        for (const auto& e : h.entries) used += e.count > 0;
        std::printf("%-8s %4zu / %4zu embeddings used -> %s\n", h.label.c_str(), used, h.entries.size(),
                    path.c_str());
      }
      return 0;
    }
    if (*synth) {
      const Dataset data = synth_generate(data_args.synth);
      if (is_csv(synth_out)) {
        std::ofstream os(synth_out);
        if (!os) throw DataError("cannot write " + synth_out);
        write_features_csv(data, os);
      } else {
        write_features(data, synth_out);
      }
      std::printf("wrote %zu samples to %s\n", data.size(), synth_out.c_str());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
