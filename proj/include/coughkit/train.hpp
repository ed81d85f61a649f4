#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coughkit/audio.hpp"
#include "coughkit/checkpoint.hpp"
#include "coughkit/fusion.hpp"
#include "coughkit/graph.hpp"
#include "coughkit/metrics.hpp"
#include "coughkit/records.hpp"
#include "coughkit/tabnet.hpp"

namespace coughkit {

/// The four classification tasks: cough features only, symptoms only, both
/// (binary covid vs rest), and both with the four cough classes.
enum class Task { cough_only, symptoms_only, both_binary, both_multiclass };

std::string task_to_string(Task task);
Task task_from_string(const std::string& name);

inline bool task_uses_cough(Task t) { return t != Task::symptoms_only; }
inline bool task_uses_symptoms(Task t) { return t != Task::cough_only; }
inline bool task_is_binary(Task t) { return t != Task::both_multiclass; }

struct Sample {
  bool has_cough = false;
  std::array<double, 44> cough{};
  bool has_symptoms = false;
  SymptomRecord symptoms;
  int label = 0;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> class_names;
};

struct TrainConfig {
  Task task = Task::both_multiclass;
  double learning_rate = 1e-3;
  int epochs = 30;
  int batch_size = 32;
  double alpha = 0.01;        // forced to 0 for cough_only
  uint64_t seed = 0;
  double split_fraction = 0.8;  // train share of a run_task split
  EncoderConfig encoder;
  FusionConfig fusion;          // num_classes/binary are derived from the task

  void validate() const;
};

struct EpochLoss {
  double ce = 0.0;
  double se = 0.0;
  double total = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLoss> history;
};

/// Adaptive-moment gradient descent, one shared timestep across tensors.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(NamedTensorStore& params, const std::map<std::string, Tensor>& grads);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, Tensor> m_, v_;
};

/// Builds the loss graph via `loss_builder`, runs backward, and returns one
/// gradient tensor per parameter touched by the graph. Errors on a
/// non-finite loss.
std::map<std::string, Tensor> gradient(const std::function<ad::Var(ad::Graph&)>& loss_builder);

/// Deterministic stratified split: returns (train indices, test indices).
std::pair<std::vector<size_t>, std::vector<size_t>> stratified_split(
    const std::vector<int>& labels, double train_fraction, uint64_t seed);

/// Mini-batch training over the given (already split) dataset. Deterministic
/// for a fixed seed.
TrainResult train(const Dataset& dataset, const TrainConfig& cfg);

/// Inference predictions for every sample.
std::vector<Prediction> predict(const Checkpoint& ckpt, const Dataset& data);

/// One-vs-rest metrics of the checkpoint on a test set.
MetricsReport evaluate(const Checkpoint& ckpt, const Dataset& test_set);

void write_history_csv(const std::string& path, const std::vector<EpochLoss>& history);

struct RunPaths {
  std::string manifest;      // manifest CSV (wav paths resolved relative to it)
  std::string features_csv;  // optional precomputed features; empty = extract
  std::string out_dir;       // report.json/report.csv/checkpoint.json/history.csv/importance.csv
};

struct RunTaskResult {
  MetricsReport report;
  Checkpoint checkpoint;
  std::vector<EpochLoss> history;
  std::vector<std::pair<std::string, double>> global_importance;  // empty for cough_only
  Dataset train_split;
  Dataset test_split;
};

/// Wires the full pipeline for one task: load manifest -> features ->
/// stratified split -> train -> evaluate -> interpretability export.
RunTaskResult run_task(const RunPaths& paths, const TrainConfig& cfg,
                       const PreprocessConfig& preprocess_cfg);

/// Loads the manifest (+features) into a task-shaped dataset without
/// splitting; used by the eval subcommand.
Dataset load_task_dataset(Task task, const std::string& manifest_path,
                          const std::string& features_csv, const PreprocessConfig& preprocess_cfg,
                          const std::vector<std::string>& class_names);

/// Class-name list for a task over the labels present in a manifest:
/// sorted unique labels for the multi-class task, {covid_negative,
/// covid_positive} otherwise.
std::vector<std::string> task_class_names(Task task, const std::vector<ManifestItem>& items);

}  // namespace coughkit
