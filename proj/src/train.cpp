#include "coughkit/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <set>

#include "coughkit/csv.hpp"
#include "coughkit/errors.hpp"
#include "coughkit/interpret.hpp"
#include "coughkit/pipeline.hpp"
#include "coughkit/rng.hpp"

namespace coughkit {

namespace fs = std::filesystem;
using ad::Graph;
using ad::Mode;
using ad::Var;

std::string task_to_string(Task task) {
  switch (task) {
    case Task::cough_only: return "cough_only";
    case Task::symptoms_only: return "symptoms_only";
    case Task::both_binary: return "both_binary";
    case Task::both_multiclass: return "both_multiclass";
  }
  fail(Errc::invalid_argument, "invalid task value");
}

Task task_from_string(const std::string& name) {
  if (name == "cough_only") return Task::cough_only;
  if (name == "symptoms_only") return Task::symptoms_only;
  if (name == "both_binary") return Task::both_binary;
  if (name == "both_multiclass") return Task::both_multiclass;
  fail(Errc::invalid_argument, "unknown task: '" + name + "'");
}

void TrainConfig::validate() const {
  if (learning_rate < 0.0) fail(Errc::invalid_argument, "train: negative learning rate");
  if (epochs < 1) fail(Errc::invalid_argument, "train: epochs must be >= 1");
  if (batch_size < 1) fail(Errc::invalid_argument, "train: batch_size must be >= 1");
  if (alpha < 0.0 || alpha >= 1.0) fail(Errc::invalid_argument, "train: alpha must be in [0, 1)");
  if (split_fraction <= 0.0 || split_fraction >= 1.0)
    fail(Errc::invalid_argument, "train: split fraction must be in (0, 1)");
  encoder.validate();
}

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(NamedTensorStore& params, const std::map<std::string, Tensor>& grads) {
  ++t_;
  const double bias1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& [name, grad] : grads) {
    auto it = params.find(name);
    if (it == params.end()) fail(Errc::invalid_argument, "adam: gradient for unknown tensor " + name);
    Tensor& p = it->second;
    Tensor& m = m_.try_emplace(name, Tensor(p.rows, p.cols)).first->second;
    Tensor& v = v_.try_emplace(name, Tensor(p.rows, p.cols)).first->second;
    for (size_t i = 0; i < p.size(); ++i) {
      const double gi = grad.data[i];
      m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * gi;
      v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * gi * gi;
      const double m_hat = m.data[i] / bias1;
      const double v_hat = v.data[i] / bias2;
      p.data[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

std::map<std::string, Tensor> gradient(const std::function<ad::Var(ad::Graph&)>& loss_builder) {
  Graph g;
  Var loss = loss_builder(g);
  g.backward(loss);
  return g.param_grads();
}

std::pair<std::vector<size_t>, std::vector<size_t>> stratified_split(
    const std::vector<int>& labels, double train_fraction, uint64_t seed) {
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    fail(Errc::invalid_argument, "stratified_split: fraction must be in (0, 1)");
  std::map<int, std::vector<size_t>> by_class;
  for (size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  Rng rng = Rng::stream(seed, 0xC1A55);
  std::vector<size_t> train_idx, test_idx;
  for (auto& [label, indices] : by_class) {
    rng.shuffle(indices);
    size_t train_count = static_cast<size_t>(std::llround(indices.size() * train_fraction));
    train_count = std::min(train_count, indices.size());
    if (indices.size() >= 2) {
      train_count = std::max<size_t>(1, std::min(train_count, indices.size() - 1));
    }
    for (size_t i = 0; i < indices.size(); ++i)
      (i < train_count ? train_idx : test_idx).push_back(indices[i]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {train_idx, test_idx};
}

namespace {

FeatureStats compute_feature_stats(const Dataset& ds, Task task) {
  FeatureStats stats;
  const size_t n = ds.samples.size();
  if (task_uses_symptoms(task)) {
    double mean = 0.0, var = 0.0;
    for (const Sample& s : ds.samples) mean += s.symptoms.age;
    mean /= static_cast<double>(n);
    for (const Sample& s : ds.samples) var += (s.symptoms.age - mean) * (s.symptoms.age - mean);
    var /= static_cast<double>(n);
    stats.age_mean = mean;
    stats.age_std = std::max(std::sqrt(var), 1e-8);
  }
  if (task_uses_cough(task)) {
    stats.cough_mean.assign(44, 0.0);
    stats.cough_std.assign(44, 0.0);
    for (const Sample& s : ds.samples)
      for (int j = 0; j < 44; ++j) stats.cough_mean[j] += s.cough[j];
    for (int j = 0; j < 44; ++j) stats.cough_mean[j] /= static_cast<double>(n);
    for (const Sample& s : ds.samples)
      for (int j = 0; j < 44; ++j) {
        double d = s.cough[j] - stats.cough_mean[j];
        stats.cough_std[j] += d * d;
      }
    for (int j = 0; j < 44; ++j)
      stats.cough_std[j] = std::max(std::sqrt(stats.cough_std[j] / static_cast<double>(n)), 1e-8);
  }
  return stats;
}

struct ModelForward {
  Var logits;
  std::optional<TabNetForward> tab;
};

ModelForward build_forward(Graph& g, NamedTensorStore& store, Task task,
                           const EncoderConfig& enc, const FusionConfig& fus,
                           const FeatureStats& stats, const Sample* batch, size_t count,
                           Mode mode) {
  ModelForward out;
  Var embeddings;

  if (task_uses_symptoms(task)) {
    std::vector<SymptomRecord> records;
    records.reserve(count);
    for (size_t i = 0; i < count; ++i) records.push_back(batch[i].symptoms);
    Var encoded = embed_and_normalize(g, store, records, stats, enc, mode);
    out.tab = forward_steps(g, store, enc, encoded, mode);
    embeddings = out.tab->s_e;
  }
  if (task_uses_cough(task)) {
    std::vector<std::array<double, 44>> rows;
    rows.reserve(count);
    for (size_t i = 0; i < count; ++i) rows.push_back(batch[i].cough);
    Var c_e = cough_encoder(g, store, g.constant(standardize_cough(rows, stats)), fus);
    embeddings = embeddings.valid() ? ad::concat_cols(embeddings, c_e) : c_e;
  }
  out.logits = classifier_logits(g, store, embeddings);
  return out;
}

struct LossVars {
  Var ce;
  Var se;  // invalid when the symptoms branch is off
  Var total;
};

LossVars build_loss(Graph& g, Task task, const TrainConfig& cfg, const ModelForward& fwd,
                    const Sample* batch, size_t count, int num_classes) {
  LossVars out;
  if (task_is_binary(task)) {
    Tensor targets(static_cast<int>(count), 1);
    for (size_t i = 0; i < count; ++i) targets.at(static_cast<int>(i), 0) = batch[i].label;
    out.ce = binary_ce(g, ad::sigmoid(fwd.logits), targets);
  } else {
    Tensor onehot(static_cast<int>(count), num_classes);
    for (size_t i = 0; i < count; ++i) onehot.at(static_cast<int>(i), batch[i].label) = 1.0;
    out.ce = categorical_ce(g, ad::softmax_rows(fwd.logits), onehot);
  }
  const double alpha = task == Task::cough_only ? 0.0 : cfg.alpha;
  if (fwd.tab) {
    out.se = sparsity_loss(fwd.tab->masks, cfg.encoder.epsilon);
    out.total = total_loss(out.ce, out.se, alpha);
  } else {
    out.total = out.ce;
  }
  return out;
}

void validate_dataset(const Dataset& dataset, Task task) {
  if (dataset.samples.empty()) fail(Errc::invalid_argument, "train: empty dataset");
  const int classes = static_cast<int>(dataset.class_names.size());
  if (task_is_binary(task) && classes != 2)
    fail(Errc::invalid_argument, "train: binary tasks need exactly two classes");
  if (!task_is_binary(task) && classes < 2)
    fail(Errc::invalid_argument, "train: multi-class task needs >= 2 classes");
  for (const Sample& s : dataset.samples) {
    if (s.label < 0 || s.label >= classes)
      fail(Errc::invalid_argument, "train: sample label out of range");
    if (task_uses_cough(task) && !s.has_cough)
      fail(Errc::invalid_argument, "train: task needs cough features but a sample has none");
    if (task_uses_symptoms(task) && !s.has_symptoms)
      fail(Errc::invalid_argument, "train: task needs symptom records but a sample has none");
  }
}

}  // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  validate_dataset(dataset, cfg.task);

  FusionConfig fus = cfg.fusion;
  fus.binary = task_is_binary(cfg.task);
  fus.num_classes = fus.binary ? 1 : static_cast<int>(dataset.class_names.size());
  fus.out_dim = cfg.encoder.out_dim;
  fus.alpha = cfg.task == Task::cough_only ? 0.0 : cfg.alpha;
  fus.validate();

  FeatureStats stats = compute_feature_stats(dataset, cfg.task);

  NamedTensorStore params;
  Rng rng = Rng::stream(cfg.seed, 0x1417);
  int embedding_width = 0;
  if (task_uses_symptoms(cfg.task)) {
    init_tabnet_params(params, cfg.encoder, cfg.encoder.encoded_dim(), rng);
    embedding_width += cfg.encoder.out_dim;
  }
  if (task_uses_cough(cfg.task)) {
    init_cough_encoder_params(params, fus, rng);
    embedding_width += fus.out_dim;
  }
  init_classifier_params(params, fus, embedding_width, rng);

  Adam optimizer(cfg.learning_rate);
  const size_t n = dataset.samples.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;

  TrainResult result;
  const int num_classes = static_cast<int>(dataset.class_names.size());
  std::vector<Sample> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    EpochLoss epoch_loss;
    for (size_t start = 0; start < n; start += cfg.batch_size) {
      const size_t end = std::min(n, start + cfg.batch_size);
      batch.assign(0, Sample{});
      batch.clear();
      for (size_t i = start; i < end; ++i) batch.push_back(dataset.samples[order[i]]);

      Graph g;
      ModelForward fwd = build_forward(g, params, cfg.task, cfg.encoder, fus, stats,
                                       batch.data(), batch.size(), Mode::train);
      LossVars loss = build_loss(g, cfg.task, cfg, fwd, batch.data(), batch.size(), num_classes);
      g.backward(loss.total);
      optimizer.step(params, g.param_grads());

      const double weight = static_cast<double>(batch.size()) / static_cast<double>(n);
      epoch_loss.ce += weight * ad::scalar(loss.ce);
      epoch_loss.se += weight * (loss.se.valid() ? ad::scalar(loss.se) : 0.0);
      epoch_loss.total += weight * ad::scalar(loss.total);
    }
    result.history.push_back(epoch_loss);
  }

  result.checkpoint.schema_version = 1;
  result.checkpoint.task = task_to_string(cfg.task);
  result.checkpoint.encoder_config = cfg.encoder;
  result.checkpoint.fusion_config = fus;
  result.checkpoint.feature_statistics = stats;
  result.checkpoint.class_names = dataset.class_names;
  result.checkpoint.tensors = params;
  return result;
}

std::vector<Prediction> predict(const Checkpoint& ckpt, const Dataset& data) {
  const Task task = task_from_string(ckpt.task);
  validate_dataset(data, task);
  NamedTensorStore store = ckpt.tensors;  // inference never mutates the checkpoint

  std::vector<Prediction> predictions;
  predictions.reserve(data.samples.size());
  constexpr size_t kChunk = 256;
  for (size_t start = 0; start < data.samples.size(); start += kChunk) {
    const size_t count = std::min(kChunk, data.samples.size() - start);
    Graph g;
    ModelForward fwd = build_forward(g, store, task, ckpt.encoder_config, ckpt.fusion_config,
                                     ckpt.feature_statistics, data.samples.data() + start, count,
                                     Mode::infer);
    auto chunk = predictions_from_logits(fwd.logits.value(), ckpt.fusion_config.binary);
    predictions.insert(predictions.end(), chunk.begin(), chunk.end());
  }
  return predictions;
}

MetricsReport evaluate(const Checkpoint& ckpt, const Dataset& test_set) {
  if (test_set.samples.empty()) fail(Errc::invalid_argument, "evaluate: empty test set");
  auto predictions = predict(ckpt, test_set);
  std::vector<int> actual, predicted;
  actual.reserve(test_set.samples.size());
  predicted.reserve(test_set.samples.size());
  for (size_t i = 0; i < test_set.samples.size(); ++i) {
    actual.push_back(test_set.samples[i].label);
    predicted.push_back(predictions[i].predicted_class);
  }
  return compute_metrics(actual, predicted, test_set.class_names);
}

void write_history_csv(const std::string& path, const std::vector<EpochLoss>& history) {
  CsvTable table;
  table.header = {"epoch", "loss_ce", "loss_se", "loss_total"};
  for (size_t e = 0; e < history.size(); ++e)
    table.rows.push_back({std::to_string(e + 1), format_double(history[e].ce),
                          format_double(history[e].se), format_double(history[e].total)});
  write_csv(path, table);
}

std::vector<std::string> task_class_names(Task task, const std::vector<ManifestItem>& items) {
  if (task_is_binary(task)) return {"covid_negative", "covid_positive"};
  std::set<std::string> labels;
  for (const auto& item : items) labels.insert(item.label);
  return {labels.begin(), labels.end()};
}

namespace {

int label_index(Task task, const std::string& label, const std::vector<std::string>& class_names) {
  if (task_is_binary(task)) return label == "covid_positive" ? 1 : 0;
  auto it = std::find(class_names.begin(), class_names.end(), label);
  if (it == class_names.end())
    fail(Errc::invalid_argument, "unknown class label '" + label + "'");
  return static_cast<int>(it - class_names.begin());
}

std::string wav_stem(const std::string& wav_path) { return fs::path(wav_path).stem().string(); }

Dataset assemble_dataset(Task task, const std::vector<ManifestItem>& items,
                         const std::string& manifest_path, const std::string& features_csv,
                         const PreprocessConfig& pre,
                         const std::vector<std::string>& class_names) {
  Dataset ds;
  ds.class_names = class_names;

  if (!task_uses_cough(task)) {
    for (const auto& item : items) {
      Sample s;
      s.has_symptoms = true;
      s.symptoms = item.symptoms;
      s.label = label_index(task, item.label, class_names);
      ds.samples.push_back(std::move(s));
    }
    return ds;
  }

  // Cough-feature rows, keyed back to manifest items by wav stem.
  std::map<std::string, size_t> by_stem;
  for (size_t i = 0; i < items.size(); ++i) by_stem[wav_stem(items[i].wav_path)] = i;

  std::vector<FeatureRow> rows;
  if (!features_csv.empty()) {
    rows = read_features_csv(features_csv);
  } else {
    const fs::path base = fs::path(manifest_path).parent_path();
    for (const auto& item : items) {
      fs::path wav = fs::path(item.wav_path).is_absolute() ? fs::path(item.wav_path)
                                                           : base / item.wav_path;
      ExtractionResult extracted =
          extract_file(wav.string(), wav_stem(item.wav_path), item.label, pre);
      for (const auto& w : extracted.warnings) std::cerr << "warning: " << w << "\n";
      rows.insert(rows.end(), extracted.rows.begin(), extracted.rows.end());
    }
  }

  for (const auto& row : rows) {
    const std::string stem = row.segment_id.substr(0, row.segment_id.find('#'));
    auto it = by_stem.find(stem);
    if (it == by_stem.end())
      fail(Errc::invalid_argument, "feature row '" + row.segment_id + "' has no manifest entry");
    const ManifestItem& item = items[it->second];
    Sample s;
    s.has_cough = true;
    s.cough = row.values;
    if (task_uses_symptoms(task)) {
      s.has_symptoms = true;
      s.symptoms = item.symptoms;
    }
    s.label = label_index(task, item.label, class_names);
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) fail(Errc::invalid_argument, "no usable samples in dataset");
  return ds;
}

}  // namespace

Dataset load_task_dataset(Task task, const std::string& manifest_path,
                          const std::string& features_csv, const PreprocessConfig& preprocess_cfg,
                          const std::vector<std::string>& class_names) {
  auto items = read_manifest_csv(manifest_path);
  return assemble_dataset(task, items, manifest_path, features_csv, preprocess_cfg, class_names);
}

RunTaskResult run_task(const RunPaths& paths, const TrainConfig& cfg,
                       const PreprocessConfig& preprocess_cfg) {
  auto items = read_manifest_csv(paths.manifest);
  if (items.empty()) fail(Errc::invalid_argument, "run_task: empty manifest");
  const auto class_names = task_class_names(cfg.task, items);
  Dataset full = assemble_dataset(cfg.task, items, paths.manifest, paths.features_csv,
                                  preprocess_cfg, class_names);

  std::vector<int> labels;
  labels.reserve(full.samples.size());
  for (const Sample& s : full.samples) labels.push_back(s.label);
  auto [train_idx, test_idx] = stratified_split(labels, cfg.split_fraction, cfg.seed);

  RunTaskResult result;
  result.train_split.class_names = class_names;
  result.test_split.class_names = class_names;
  for (size_t i : train_idx) result.train_split.samples.push_back(full.samples[i]);
  for (size_t i : test_idx) result.test_split.samples.push_back(full.samples[i]);

  TrainResult trained = train(result.train_split, cfg);
  result.checkpoint = std::move(trained.checkpoint);
  result.history = std::move(trained.history);
  result.report = evaluate(result.checkpoint, result.test_split);

  if (task_uses_symptoms(cfg.task)) {
    std::vector<SymptomRecord> records;
    for (const Sample& s : result.test_split.samples) records.push_back(s.symptoms);
    result.global_importance = explain_batch(result.checkpoint, records);
  }

  if (!paths.out_dir.empty()) {
    fs::create_directories(paths.out_dir);
    const fs::path out(paths.out_dir);
    write_metrics_json((out / "report.json").string(), result.report);
    write_metrics_csv((out / "report.csv").string(), result.report);
    write_history_csv((out / "history.csv").string(), result.history);
    save_checkpoint((out / "checkpoint.json").string(), result.checkpoint);
    if (!result.global_importance.empty())
      write_importance_csv((out / "importance.csv").string(), result.global_importance);
  }
  return result;
}

}  // namespace coughkit
