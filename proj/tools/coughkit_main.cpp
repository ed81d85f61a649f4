// coughkit — interpretable cough-sound + symptom classification toolkit.
//
// Subcommands: extract, synth, train, eval, explain, correlate.
// Exit codes: 0 success, 1 input or data error, 2 usage error.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <iostream>
#include <thread>

#include "coughkit/checkpoint.hpp"
#include "coughkit/config.hpp"
#include "coughkit/errors.hpp"
#include "coughkit/interpret.hpp"
#include "coughkit/pipeline.hpp"
#include "coughkit/synth.hpp"
#include "coughkit/train.hpp"

namespace fs = std::filesystem;
using namespace coughkit;

namespace {

struct GlobalArgs {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
  int workers = 1;
};

ToolConfig resolve_config(const GlobalArgs& args) {
  ToolConfig cfg;
  if (!args.config_path.empty()) cfg = load_tool_config(args.config_path);
  if (args.seed_set) cfg.train.seed = args.seed;
  return cfg;
}

// ---- extract ---------------------------------------------------------------

struct ExtractArgs {
  std::string input_dir;
  std::string wav_file;
  std::string manifest;
  std::string out_csv;
};

int run_extract(const ExtractArgs& args, const GlobalArgs& global) {
  ToolConfig cfg = resolve_config(global);

  struct Job {
    std::string path;
    std::string stem;
    std::string label;
  };
  std::vector<Job> jobs;

  if (!args.wav_file.empty()) {
    jobs.push_back({args.wav_file, fs::path(args.wav_file).stem().string(), "unknown"});
  } else {
    std::map<std::string, std::string> labels;
    if (!args.manifest.empty()) {
      const fs::path base = fs::path(args.manifest).parent_path();
      for (const auto& item : read_manifest_csv(args.manifest)) {
        fs::path wav = fs::path(item.wav_path).is_absolute() ? fs::path(item.wav_path)
                                                             : base / item.wav_path;
        labels[fs::path(item.wav_path).stem().string()] = item.label;
        jobs.push_back({wav.string(), fs::path(item.wav_path).stem().string(), item.label});
      }
    } else {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(args.input_dir))
        if (entry.path().extension() == ".wav") files.push_back(entry.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) jobs.push_back({f.string(), f.stem().string(), "unknown"});
    }
  }
  if (jobs.empty()) {
    std::cerr << "extract: no input WAV files\n";
    return 1;
  }

  std::vector<ExtractionResult> results(jobs.size());
  std::vector<std::string> errors(jobs.size());
  auto work = [&](size_t index) {
    try {
      results[index] =
          extract_file(jobs[index].path, jobs[index].stem, jobs[index].label, cfg.preprocess);
    } catch (const std::exception& e) {
      errors[index] = e.what();
    }
  };
  if (global.workers <= 1) {
    for (size_t i = 0; i < jobs.size(); ++i) work(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < global.workers; ++w)
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) work(i);
      });
    for (auto& t : pool) t.join();
  }

  std::vector<FeatureRow> rows;
  bool any_failed = false;
  for (size_t i = 0; i < jobs.size(); ++i) {
    if (!errors[i].empty()) {
      any_failed = true;
      std::cerr << "error: " << jobs[i].path << ": " << errors[i] << "\n";
      continue;
    }
    for (const auto& warning : results[i].warnings) std::cerr << "warning: " << warning << "\n";
    rows.insert(rows.end(), results[i].rows.begin(), results[i].rows.end());
  }
  write_features_csv(args.out_csv, rows);
  std::cerr << "extract: wrote " << rows.size() << " feature rows to " << args.out_csv << "\n";
  return any_failed ? 1 : 0;
}

// ---- synth -----------------------------------------------------------------

struct SynthArgs {
  std::string out_dir;
  int n_per_class = 50;
  std::string profiles_path;
};

int run_synth(const SynthArgs& args, const GlobalArgs& global) {
  ToolConfig cfg = resolve_config(global);
  std::vector<CoughClassProfile> profiles;
  if (args.profiles_path.empty()) {
    profiles = default_profiles();
  } else {
    std::ifstream in(args.profiles_path);
    if (!in) fail(Errc::file_not_found, "no such profiles file: " + args.profiles_path);
    nlohmann::json j;
    in >> j;
    profiles = profiles_from_json(j);
  }
  auto items = gen_dataset(args.out_dir, args.n_per_class, profiles, cfg.train.seed,
                           std::max(1, global.workers));
  std::cerr << "synth: wrote " << items.size() << " items to " << args.out_dir << "\n";
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string task;
  std::string manifest;
  std::string features_csv;
  std::string out_dir;
};

struct TrainOverrides {
  CLI::Option* epochs = nullptr;
  CLI::Option* batch_size = nullptr;
  CLI::Option* learning_rate = nullptr;
  CLI::Option* alpha = nullptr;
  CLI::Option* split = nullptr;
  int epochs_v = 0;
  int batch_v = 0;
  double lr_v = 0.0;
  double alpha_v = 0.0;
  double split_v = 0.0;
};

int run_train(const TrainArgs& args, const TrainOverrides& over, const GlobalArgs& global) {
  ToolConfig cfg = resolve_config(global);
  cfg.train.task = task_from_string(args.task);
  if (over.epochs->count()) cfg.train.epochs = over.epochs_v;
  if (over.batch_size->count()) cfg.train.batch_size = over.batch_v;
  if (over.learning_rate->count()) cfg.train.learning_rate = over.lr_v;
  if (over.alpha->count()) cfg.train.alpha = over.alpha_v;
  if (over.split->count()) cfg.train.split_fraction = over.split_v;

  RunPaths paths;
  paths.manifest = args.manifest;
  paths.features_csv = args.features_csv;
  paths.out_dir = args.out_dir;
  RunTaskResult result = run_task(paths, cfg.train, cfg.preprocess);

  std::cerr << "train: task " << args.task << ", test accuracy "
            << result.report.fraction_correct() << ", artifacts in " << args.out_dir << "\n";
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint_path;
  std::string manifest;
  std::string features_csv;
  std::string out_json;
  std::string out_csv;
};

int run_eval(const EvalArgs& args, const GlobalArgs& global) {
  ToolConfig cfg = resolve_config(global);
  Checkpoint ckpt = load_checkpoint(args.checkpoint_path);
  Dataset data = load_task_dataset(task_from_string(ckpt.task), args.manifest, args.features_csv,
                                   cfg.preprocess, ckpt.class_names);
  MetricsReport report = evaluate(ckpt, data);
  write_metrics_json(args.out_json, report);
  if (!args.out_csv.empty()) write_metrics_csv(args.out_csv, report);
  std::cerr << "eval: accuracy " << report.fraction_correct() << " over " << data.samples.size()
            << " samples\n";
  return 0;
}

// ---- explain ---------------------------------------------------------------

struct ExplainArgs {
  std::string checkpoint_path;
  std::string record_csv;
  std::string out_csv;
};

int run_explain(const ExplainArgs& args) {
  Checkpoint ckpt = load_checkpoint(args.checkpoint_path);
  if (!task_uses_symptoms(task_from_string(ckpt.task)))
    fail(Errc::invalid_argument, "explain: checkpoint has no symptoms branch");
  auto records = read_symptoms_csv(args.record_csv);
  if (records.size() != 1)
    fail(Errc::invalid_argument, "explain: record CSV must contain exactly one row");
  auto weights = explain_sample(ckpt, records[0]);
  write_importance_csv(args.out_csv, weights);
  std::cerr << "explain: wrote per-field attention weights to " << args.out_csv << "\n";
  return 0;
}

// ---- correlate ---------------------------------------------------------------

struct CorrelateArgs {
  std::string symptoms_csv;
  std::string out_csv;
};

int run_correlate(const CorrelateArgs& args) {
  auto records = read_symptoms_csv(args.symptoms_csv);
  auto corr = symptom_correlation(records);
  write_correlation_csv(args.out_csv, corr);
  for (const auto& flag : corr.flags) std::cerr << "warning: " << flag << "\n";
  std::cerr << "correlate: wrote " << corr.fields.size() << "x" << corr.fields.size()
            << " matrix to " << args.out_csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coughkit: interpretable cough-sound + symptom classification toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalArgs global;
  app.add_option("--config", global.config_path, "JSON config file (flags override it)");
  auto* seed_opt = app.add_option("--seed", global.seed, "Seed for all stochastic steps");
  app.add_option("--workers", global.workers, "Worker threads for extract/synth")
      ->check(CLI::Range(1, 64));

  ExtractArgs extract_args;
  auto* extract = app.add_subcommand("extract", "Extract cough feature CSV from WAV files");
  auto* in_dir = extract->add_option("--input", extract_args.input_dir, "Directory of WAV files");
  auto* in_wav = extract->add_option("--wav", extract_args.wav_file, "Single WAV file");
  extract->add_option("--manifest", extract_args.manifest, "Manifest CSV supplying labels");
  extract->add_option("--out", extract_args.out_csv, "Output feature CSV")->required();
  in_dir->excludes(in_wav);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic cough dataset");
  synth->add_option("--out", synth_args.out_dir, "Output directory")->required();
  synth->add_option("--n-per-class", synth_args.n_per_class, "Items per class")
      ->check(CLI::PositiveNumber);
  synth->add_option("--profiles", synth_args.profiles_path, "Profile JSON (default: built-ins)");

  TrainArgs train_args;
  TrainOverrides over;
  auto* train_cmd = app.add_subcommand("train", "Train a task and export report + checkpoint");
  train_cmd
      ->add_option("--task", train_args.task,
                   "cough_only | symptoms_only | both_binary | both_multiclass")
      ->required();
  train_cmd->add_option("--manifest", train_args.manifest, "Manifest CSV")->required();
  train_cmd->add_option("--features", train_args.features_csv,
                        "Precomputed feature CSV (default: extract from WAVs)");
  train_cmd->add_option("--out-dir", train_args.out_dir, "Output directory")->required();
  over.epochs = train_cmd->add_option("--epochs", over.epochs_v, "Training epochs");
  over.batch_size = train_cmd->add_option("--batch-size", over.batch_v, "Mini-batch size");
  over.learning_rate = train_cmd->add_option("--learning-rate", over.lr_v, "Adam learning rate");
  over.alpha = train_cmd->add_option("--alpha", over.alpha_v, "Sparsity loss weight");
  over.split = train_cmd->add_option("--split", over.split_v, "Train fraction of the split");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint_path, "Checkpoint JSON")->required();
  eval_cmd->add_option("--manifest", eval_args.manifest, "Manifest CSV")->required();
  eval_cmd->add_option("--features", eval_args.features_csv, "Precomputed feature CSV");
  eval_cmd->add_option("--out", eval_args.out_json, "Metrics report JSON")->required();
  eval_cmd->add_option("--out-csv", eval_args.out_csv, "Metrics report CSV");

  ExplainArgs explain_args;
  auto* explain_cmd = app.add_subcommand("explain", "Attention weights for one symptom record");
  explain_cmd->add_option("--checkpoint", explain_args.checkpoint_path, "Checkpoint JSON")
      ->required();
  explain_cmd->add_option("--record", explain_args.record_csv, "Symptoms CSV with one row")
      ->required();
  explain_cmd->add_option("--out", explain_args.out_csv, "Output importance CSV")->required();

  CorrelateArgs correlate_args;
  auto* correlate_cmd = app.add_subcommand("correlate", "Pearson correlation of symptom fields");
  correlate_cmd->add_option("--symptoms", correlate_args.symptoms_csv, "Symptoms CSV")->required();
  correlate_cmd->add_option("--out", correlate_args.out_csv, "Output matrix CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // help text, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  global.seed_set = seed_opt->count() > 0;

  try {
    if (extract->parsed()) {
      if (extract_args.input_dir.empty() && extract_args.wav_file.empty()) {
        std::cerr << "extract: one of --input or --wav is required\n";
        return 2;
      }
      return run_extract(extract_args, global);
    }
    if (synth->parsed()) return run_synth(synth_args, global);
    if (train_cmd->parsed()) return run_train(train_args, over, global);
    if (eval_cmd->parsed()) return run_eval(eval_args, global);
    if (explain_cmd->parsed()) return run_explain(explain_args);
    if (correlate_cmd->parsed()) return run_correlate(correlate_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
