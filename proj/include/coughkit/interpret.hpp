#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "coughkit/checkpoint.hpp"
#include "coughkit/records.hpp"
#include "coughkit/tabnet.hpp"

namespace coughkit {

/// Aggregated attention over the encoded feature columns.
struct ImportanceReport {
  std::vector<std::string> feature_names;
  std::vector<double> global_importance;  // nonnegative, sums to 1
  Tensor per_sample;                      // rows sum to 1
};

/// Display names of the encoded columns: age, the 12 flags, then one name
/// per gender embedding column.
std::vector<std::string> encoded_column_names(const EncoderConfig& cfg);

/// Weighted sum of the per-step masks, normalized per sample; global
/// importance is the normalized mean over the batch. step_weights is B x
/// n_steps (nullptr selects uniform weights); rows whose weights are all
/// zero fall back to uniform weighting.
ImportanceReport aggregate_masks(const std::vector<Mask>& masks, const Tensor* step_weights,
                                 std::vector<std::string> feature_names);

/// Collapses column importance to the 14 symptom fields by summing each
/// field's embedding columns.
std::vector<std::pair<std::string, double>> field_importance(
    const std::vector<double>& column_importance, const EncoderConfig& cfg);

/// Forward pass over a batch of records with decision-contribution step
/// weights, aggregated to field-level global importance.
std::vector<std::pair<std::string, double>> explain_batch(
    const Checkpoint& ckpt, const std::vector<SymptomRecord>& records);

/// Single-record attention distribution over the named symptom fields.
std::vector<std::pair<std::string, double>> explain_sample(const Checkpoint& ckpt,
                                                           const SymptomRecord& record);

struct CorrelationMatrix {
  std::vector<std::string> fields;
  Tensor values;                    // symmetric, diagonal 1
  std::vector<std::string> flags;   // constant-field notes
};

/// Pearson correlation between every pair of numeric/binary fields (age and
/// the 12 flags; gender is categorical and excluded). Needs >= 2 records.
CorrelationMatrix symptom_correlation(const std::vector<SymptomRecord>& records);

/// feature,weight rows sorted by weight descending.
void write_importance_csv(const std::string& path,
                          const std::vector<std::pair<std::string, double>>& weights);

/// Square matrix with a header row and a leading name column.
void write_correlation_csv(const std::string& path, const CorrelationMatrix& corr);

}  // namespace coughkit
