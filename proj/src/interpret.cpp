#include "coughkit/interpret.hpp"

#include <algorithm>
#include <cmath>

#include "coughkit/csv.hpp"
#include "coughkit/errors.hpp"

namespace coughkit {

std::vector<std::string> encoded_column_names(const EncoderConfig& cfg) {
  std::vector<std::string> names;
  names.push_back("age");
  for (const auto& f : flag_field_names()) names.push_back(f);
  for (int e = 0; e < cfg.embed_dim; ++e) names.push_back("gender_" + std::to_string(e));
  return names;
}

ImportanceReport aggregate_masks(const std::vector<Mask>& masks, const Tensor* step_weights,
                                 std::vector<std::string> feature_names) {
  if (masks.empty()) fail(Errc::invalid_argument, "aggregate_masks: empty mask list");
  const int batch = masks.front().values.rows;
  const int dim = masks.front().values.cols;
  const int steps = static_cast<int>(masks.size());
  for (const Mask& m : masks)
    if (m.values.rows != batch || m.values.cols != dim)
      fail(Errc::shape_mismatch, "aggregate_masks: inconsistent mask shapes");
  if (static_cast<int>(feature_names.size()) != dim)
    fail(Errc::shape_mismatch, "aggregate_masks: name list does not match mask width");
  if (step_weights && (step_weights->rows != batch || step_weights->cols != steps))
    fail(Errc::shape_mismatch, "aggregate_masks: step weights must be batch x steps");

  ImportanceReport report;
  report.feature_names = std::move(feature_names);
  report.per_sample = Tensor(batch, dim);
  report.global_importance.assign(dim, 0.0);

  for (int b = 0; b < batch; ++b) {
    double weight_total = 0.0;
    if (step_weights)
      for (int s = 0; s < steps; ++s) weight_total += step_weights->at(b, s);
    const bool uniform = !step_weights || weight_total <= 0.0;

    for (int s = 0; s < steps; ++s) {
      const double w = uniform ? 1.0 : step_weights->at(b, s);
      for (int j = 0; j < dim; ++j)
        report.per_sample.at(b, j) += w * masks[s].values.at(b, j);
    }
    double row_sum = 0.0;
    for (int j = 0; j < dim; ++j) row_sum += report.per_sample.at(b, j);
    if (row_sum <= 0.0) {
      for (int j = 0; j < dim; ++j) report.per_sample.at(b, j) = 1.0 / dim;
    } else {
      for (int j = 0; j < dim; ++j) report.per_sample.at(b, j) /= row_sum;
    }
    for (int j = 0; j < dim; ++j) report.global_importance[j] += report.per_sample.at(b, j);
  }

  double total = 0.0;
  for (double v : report.global_importance) total += v;
  for (double& v : report.global_importance) v /= total;
  return report;
}

std::vector<std::pair<std::string, double>> field_importance(
    const std::vector<double>& column_importance, const EncoderConfig& cfg) {
  if (static_cast<int>(column_importance.size()) != cfg.encoded_dim())
    fail(Errc::shape_mismatch, "field_importance: width does not match encoded dim");
  const auto& fields = symptom_field_names();
  auto spans = encoded_column_spans(cfg);
  std::vector<std::pair<std::string, double>> out;
  for (size_t f = 0; f < fields.size(); ++f) {
    double acc = 0.0;
    for (int c = spans[f].first; c < spans[f].second; ++c) acc += column_importance[c];
    out.emplace_back(fields[f], acc);
  }
  return out;
}

namespace {

ImportanceReport column_importance_for(const Checkpoint& ckpt,
                                       const std::vector<SymptomRecord>& records) {
  if (records.empty()) fail(Errc::invalid_argument, "explain: empty record batch");
  NamedTensorStore store = ckpt.tensors;  // local copy; running stats stay untouched on disk
  ad::Graph g;
  ad::Var features = embed_and_normalize(g, store, records, ckpt.feature_statistics,
                                         ckpt.encoder_config, ad::Mode::infer);
  TabNetForward fwd = forward_steps(g, store, ckpt.encoder_config, features, ad::Mode::infer);
  Tensor weights = step_weights_from(fwd);
  return aggregate_masks(masks_from(fwd), &weights, encoded_column_names(ckpt.encoder_config));
}

}  // namespace

std::vector<std::pair<std::string, double>> explain_batch(
    const Checkpoint& ckpt, const std::vector<SymptomRecord>& records) {
  ImportanceReport report = column_importance_for(ckpt, records);
  return field_importance(report.global_importance, ckpt.encoder_config);
}

std::vector<std::pair<std::string, double>> explain_sample(const Checkpoint& ckpt,
                                                           const SymptomRecord& record) {
  return explain_batch(ckpt, {record});
}

CorrelationMatrix symptom_correlation(const std::vector<SymptomRecord>& records) {
  if (records.size() < 2) fail(Errc::invalid_argument, "symptom_correlation: need >= 2 records");
  const size_t n = records.size();

  CorrelationMatrix corr;
  corr.fields.push_back("age");
  for (const auto& f : flag_field_names()) corr.fields.push_back(f);
  const int dim = static_cast<int>(corr.fields.size());

  // Column-major value table: age then flags.
  std::vector<std::vector<double>> cols(dim, std::vector<double>(n));
  for (size_t i = 0; i < n; ++i) {
    cols[0][i] = records[i].age;
    auto flags = records[i].flags();
    for (int f = 0; f < 12; ++f) cols[1 + f][i] = flags[f];
  }

  std::vector<double> mean(dim, 0.0), sd(dim, 0.0);
  for (int c = 0; c < dim; ++c) {
    for (double v : cols[c]) mean[c] += v;
    mean[c] /= static_cast<double>(n);
    for (double v : cols[c]) sd[c] += (v - mean[c]) * (v - mean[c]);
    sd[c] = std::sqrt(sd[c] / static_cast<double>(n));
    if (sd[c] <= 0.0) corr.flags.push_back(corr.fields[c] + ": constant field");
  }

  corr.values = Tensor(dim, dim);
  for (int a = 0; a < dim; ++a) {
    corr.values.at(a, a) = 1.0;
    for (int b = a + 1; b < dim; ++b) {
      double value = 0.0;
      if (sd[a] > 0.0 && sd[b] > 0.0) {
        double cov = 0.0;
        for (size_t i = 0; i < n; ++i) cov += (cols[a][i] - mean[a]) * (cols[b][i] - mean[b]);
        cov /= static_cast<double>(n);
        value = cov / (sd[a] * sd[b]);
      }
      corr.values.at(a, b) = value;
      corr.values.at(b, a) = value;
    }
  }
  return corr;
}

void write_importance_csv(const std::string& path,
                          const std::vector<std::pair<std::string, double>>& weights) {
  auto sorted = weights;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  CsvTable table;
  table.header = {"feature", "weight"};
  for (const auto& [name, w] : sorted) table.rows.push_back({name, format_double(w)});
  write_csv(path, table);
}

void write_correlation_csv(const std::string& path, const CorrelationMatrix& corr) {
  CsvTable table;
  table.header.push_back("field");
  for (const auto& f : corr.fields) table.header.push_back(f);
  for (size_t a = 0; a < corr.fields.size(); ++a) {
    std::vector<std::string> row;
    row.push_back(corr.fields[a]);
    for (size_t b = 0; b < corr.fields.size(); ++b)
      row.push_back(format_double(corr.values.at(static_cast<int>(a), static_cast<int>(b))));
    table.rows.push_back(std::move(row));
  }
  write_csv(path, table);
}

}  // namespace coughkit
