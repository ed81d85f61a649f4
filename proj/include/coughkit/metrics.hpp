#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace coughkit {

struct ClassMetrics {
  double f1 = 0.0;
  double precision = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double accuracy = 0.0;
};

/// Per-class one-vs-rest metrics plus unweighted macro averages. Rates with
/// a zero denominator are reported as 0 and flagged.
struct MetricsReport {
  std::vector<std::string> class_names;
  std::vector<ClassMetrics> per_class;
  ClassMetrics overall;                        // macro averages
  std::vector<std::vector<long>> confusion;    // rows actual, cols predicted
  std::vector<std::string> flags;              // zero-denominator notes

  /// Fraction of correctly classified samples (confusion trace / total).
  double fraction_correct() const;
};

MetricsReport compute_metrics(const std::vector<int>& actual, const std::vector<int>& predicted,
                              const std::vector<std::string>& class_names);

nlohmann::json metrics_to_json(const MetricsReport& report);
void write_metrics_json(const std::string& path, const MetricsReport& report);
void write_metrics_csv(const std::string& path, const MetricsReport& report);

}  // namespace coughkit
