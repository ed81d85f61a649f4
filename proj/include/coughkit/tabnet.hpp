#pragma once

#include <span>
#include <string>
#include <vector>

#include "coughkit/graph.hpp"
#include "coughkit/records.hpp"
#include "coughkit/rng.hpp"
#include "coughkit/tensor.hpp"

namespace coughkit {

/// Tabular encoder configuration. Every width has to agree with the tensors
/// created by init_tabnet_params.
struct EncoderConfig {
  int n_steps = 3;              // sequential decision steps
  int n_d = 8;                  // decision layer width
  int n_a = 8;                  // attention bottleneck width
  double gamma = 1.3;           // prior relaxation factor (gamma >= 1)
  int virtual_batch_size = 128; // ghost batch norm chunk (clamped to batch)
  double epsilon = 1e-8;        // sparsity-loss log guard
  int embed_dim = 4;            // embedding width per categorical field
  int out_dim = 16;             // F: width of the symptoms embedding S_e

  void validate() const;
  /// Width D of the encoded feature space: age + 12 flags + gender embedding.
  int encoded_dim() const { return 13 + embed_dim; }
};

/// Per-step attention mask; rows live on the probability simplex.
struct Mask {
  Tensor values;  // B x D
  int step_index = 0;
};

/// Standardization statistics computed on the training split and stored in
/// the checkpoint.
struct FeatureStats {
  double age_mean = 0.0;
  double age_std = 1.0;
  std::vector<double> cough_mean;  // 44 entries when the cough branch is active
  std::vector<double> cough_std;
};

/// Euclidean projection of a score vector onto the probability simplex.
/// Errors on non-finite input.
std::vector<double> sparsemax(std::span<const double> scores);

/// Row-wise sparsemax as a differentiable graph op.
ad::Var sparsemax_rows(ad::Var scores);

/// Euclidean projection onto the capped simplex {m : 0 <= m <= cap,
/// sum m = 1}. caps must be nonnegative and sum to at least 1.
std::vector<double> capped_sparsemax(std::span<const double> scores,
                                     std::span<const double> caps);
ad::Var capped_sparsemax_rows(ad::Var scores, ad::Var caps);


/// Creates every encoder tensor (weights, biases, batch-norm parameters and
/// running statistics) for an input of width input_dim.
void init_tabnet_params(NamedTensorStore& store, const EncoderConfig& cfg, int input_dim,
                        Rng& rng);

/// Standardized numerics + gender embedding, concatenated and batch-normalized
/// across the whole batch. Rejects empty batches and invalid records.
ad::Var embed_and_normalize(ad::Graph& g, NamedTensorStore& store,
                            const std::vector<SymptomRecord>& records,
                            const FeatureStats& stats, const EncoderConfig& cfg, ad::Mode mode);

/// Column index ranges of each symptom field in the encoded feature space:
/// (field index into symptom_field_names(), first column, last column + 1).
std::vector<std::pair<int, int>> encoded_column_spans(const EncoderConfig& cfg);

/// Epsilon of the pre-activation ghost batch norms (GLU blocks and the
/// attentive transformer). Virtual batches are small, so a larger floor than
/// the input normalization keeps the map well conditioned.
constexpr double kGluBnEpsilon = 1e-2;

/// Epsilon of the whole-batch input normalization.
constexpr double kInputBnEpsilon = 1e-6;

/// FC -> ghost batch norm -> gated linear unit. Output width is half the FC
/// width. Parameters live under `prefix` in the store.
ad::Var glu_block(ad::Graph& g, NamedTensorStore& store, const std::string& prefix, ad::Var x,
                  int virtual_batch_size, ad::Mode mode);

/// Four GLU blocks (two shared, two step-specific), residual sums scaled by
/// sqrt(0.5). step 0 is the initial splitter that produces a[0] from the
/// unmasked features.
ad::Var feature_transformer(ad::Graph& g, NamedTensorStore& store, const EncoderConfig& cfg,
                            int step, ad::Var x, ad::Mode mode);

/// FC(n_a -> D) -> ghost batch norm -> multiply by prior -> sparsemax rows.
/// When cap is valid the projection lands on the capped simplex, which is
/// what makes a fully used feature (gamma = 1) structurally excluded from
/// later steps rather than just down-weighted.
ad::Var attentive_transformer(ad::Graph& g, NamedTensorStore& store, const EncoderConfig& cfg,
                              int step, ad::Var a_prev, ad::Var prior, ad::Mode mode,
                              ad::Var cap = {});

struct TabNetForward {
  ad::Var d_out;                  // B x n_d, sum of ReLU(d[i])
  ad::Var s_e;                    // B x F
  std::vector<ad::Var> masks;     // step order, each B x D
  std::vector<ad::Var> step_relu; // ReLU(d[i]) per step, B x n_d
};

/// Runs the n_steps decision steps over an encoded batch and maps the summed
/// decision output through the final linear layer to S_e.
TabNetForward forward_steps(ad::Graph& g, NamedTensorStore& store, const EncoderConfig& cfg,
                            ad::Var features, ad::Mode mode);

/// Mean over steps and batch of the entrywise -M*log(M + eps).
ad::Var sparsity_loss(const std::vector<ad::Var>& masks, double epsilon);

/// Per-sample decision contribution of each step (row sums of ReLU(d[i])),
/// B x n_steps; the default step weighting for mask aggregation.
Tensor step_weights_from(const TabNetForward& fwd);

std::vector<Mask> masks_from(const TabNetForward& fwd);

}  // namespace coughkit
