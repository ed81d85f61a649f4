#pragma once

#include <array>
#include <vector>

#include "coughkit/graph.hpp"
#include "coughkit/rng.hpp"
#include "coughkit/tabnet.hpp"

namespace coughkit {

/// Cough encoder + classification head configuration.
struct FusionConfig {
  int h1 = 64;            // first hidden width of the cough encoder
  int h2 = 32;            // second hidden width
  int out_dim = 16;       // F: cough embedding width, matches S_e
  int num_classes = 4;    // 1 output logit when binary
  bool binary = false;    // sigmoid head instead of softmax
  double alpha = 0.01;    // loss balance (Eq. 8 analog): (1-a)*ce + a*se

  void validate() const;
};

struct Prediction {
  std::vector<double> logits;
  std::vector<double> probabilities;  // simplex row, or a single sigmoid value
  int predicted_class = 0;            // argmax; ties go to the lowest class index
};

void init_cough_encoder_params(NamedTensorStore& store, const FusionConfig& cfg, Rng& rng);
void init_classifier_params(NamedTensorStore& store, const FusionConfig& cfg,
                            int embedding_width, Rng& rng);

/// Standardizes a batch of 44-wide cough feature rows with the stored
/// training statistics.
Tensor standardize_cough(const std::vector<std::array<double, 44>>& rows,
                         const FeatureStats& stats);

/// Three linear layers, ReLU on the first two; the final layer is linear so
/// embeddings span the full space.
ad::Var cough_encoder(ad::Graph& g, NamedTensorStore& store, ad::Var standardized,
                      const FusionConfig& cfg);

/// FC layer over the (possibly concatenated) embedding block.
ad::Var classifier_logits(ad::Graph& g, NamedTensorStore& store, ad::Var embeddings);

/// Mean over the batch of -sum_i y_i log(p_i) with probabilities clamped to
/// [1e-12, 1].
ad::Var categorical_ce(ad::Graph& g, ad::Var probabilities, const Tensor& onehot_targets);

/// Mean over the batch of -[y log p + (1-y) log(1-p)], probabilities clamped
/// into (0, 1).
ad::Var binary_ce(ad::Graph& g, ad::Var probabilities, const Tensor& targets);

/// (1-alpha)*ce + alpha*se. alpha must lie in [0, 1).
ad::Var total_loss(ad::Var loss_ce, ad::Var loss_se, double alpha);

std::vector<Prediction> predictions_from_logits(const Tensor& logits, bool binary);

/// Concatenates S_e and C_e, applies the stored FC head, and converts logits
/// to predictions. Batch sizes must agree.
std::vector<Prediction> fuse_and_classify(NamedTensorStore& store, const Tensor& s_e,
                                          const Tensor& c_e, const FusionConfig& cfg);

}  // namespace coughkit
