#include "coughkit/metrics.hpp"

#include <fstream>

#include "coughkit/csv.hpp"
#include "coughkit/errors.hpp"

namespace coughkit {

double MetricsReport::fraction_correct() const {
  long correct = 0, total = 0;
  for (size_t i = 0; i < confusion.size(); ++i)
    for (size_t j = 0; j < confusion[i].size(); ++j) {
      total += confusion[i][j];
      if (i == j) correct += confusion[i][j];
    }
  return total ? static_cast<double>(correct) / total : 0.0;
}

MetricsReport compute_metrics(const std::vector<int>& actual, const std::vector<int>& predicted,
                              const std::vector<std::string>& class_names) {
  if (actual.empty()) fail(Errc::invalid_argument, "compute_metrics: empty test set");
  if (actual.size() != predicted.size())
    fail(Errc::invalid_argument, "compute_metrics: label/prediction count mismatch");
  const int num_classes = static_cast<int>(class_names.size());

  MetricsReport report;
  report.class_names = class_names;
  report.confusion.assign(num_classes, std::vector<long>(num_classes, 0));
  for (size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] < 0 || actual[i] >= num_classes || predicted[i] < 0 ||
        predicted[i] >= num_classes)
      fail(Errc::invalid_argument, "compute_metrics: class index out of range");
    ++report.confusion[actual[i]][predicted[i]];
  }

  const long total = static_cast<long>(actual.size());
  auto rate = [&](long num, long den, const std::string& what, int cls) {
    if (den == 0) {
      report.flags.push_back(class_names[cls] + ": " + what + " has zero denominator");
      return 0.0;
    }
    return static_cast<double>(num) / den;
  };

  for (int c = 0; c < num_classes; ++c) {
    long tp = report.confusion[c][c];
    long fn = 0, fp = 0;
    for (int j = 0; j < num_classes; ++j) {
      if (j == c) continue;
      fn += report.confusion[c][j];
      fp += report.confusion[j][c];
    }
    long tn = total - tp - fn - fp;

    ClassMetrics m;
    m.precision = rate(tp, tp + fp, "precision", c);
    m.sensitivity = rate(tp, tp + fn, "sensitivity", c);
    m.specificity = rate(tn, tn + fp, "specificity", c);
    m.accuracy = rate(tp + tn, total, "accuracy", c);
    if (m.precision + m.sensitivity > 0.0)
      m.f1 = 2.0 * m.precision * m.sensitivity / (m.precision + m.sensitivity);
    else {
      m.f1 = 0.0;
      report.flags.push_back(class_names[c] + ": f1 has zero denominator");
    }
    report.per_class.push_back(m);
  }

  for (const ClassMetrics& m : report.per_class) {
    report.overall.f1 += m.f1;
    report.overall.precision += m.precision;
    report.overall.sensitivity += m.sensitivity;
    report.overall.specificity += m.specificity;
    report.overall.accuracy += m.accuracy;
  }
  report.overall.f1 /= num_classes;
  report.overall.precision /= num_classes;
  report.overall.sensitivity /= num_classes;
  report.overall.specificity /= num_classes;
  report.overall.accuracy /= num_classes;
  return report;
}

namespace {

nlohmann::json class_metrics_to_json(const ClassMetrics& m) {
  return {{"f1", m.f1},
          {"precision", m.precision},
          {"sensitivity", m.sensitivity},
          {"specificity", m.specificity},
          {"accuracy", m.accuracy}};
}

}  // namespace

nlohmann::json metrics_to_json(const MetricsReport& report) {
  nlohmann::json per_class = nlohmann::json::object();
  for (size_t c = 0; c < report.per_class.size(); ++c)
    per_class[report.class_names[c]] = class_metrics_to_json(report.per_class[c]);
  return {{"class_names", report.class_names},
          {"per_class", per_class},
          {"overall", class_metrics_to_json(report.overall)},
          {"confusion_matrix", report.confusion},
          {"fraction_correct", report.fraction_correct()},
          {"flags", report.flags}};
}

void write_metrics_json(const std::string& path, const MetricsReport& report) {
  std::ofstream out(path);
  if (!out) fail(Errc::io_error, "cannot write metrics: " + path);
  out << metrics_to_json(report).dump(2) << "\n";
}

void write_metrics_csv(const std::string& path, const MetricsReport& report) {
  CsvTable table;
  table.header = {"class", "f1", "precision", "sensitivity", "specificity", "accuracy"};
  auto row = [](const std::string& name, const ClassMetrics& m) {
    return std::vector<std::string>{name,
                                    format_double(m.f1),
                                    format_double(m.precision),
                                    format_double(m.sensitivity),
                                    format_double(m.specificity),
                                    format_double(m.accuracy)};
  };
  for (size_t c = 0; c < report.per_class.size(); ++c)
    table.rows.push_back(row(report.class_names[c], report.per_class[c]));
  table.rows.push_back(row("overall", report.overall));
  write_csv(path, table);
}

}  // namespace coughkit
