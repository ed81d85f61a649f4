#include "coughkit/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "coughkit/errors.hpp"

namespace coughkit {

using ad::Graph;
using ad::Var;

namespace {

constexpr double kProbFloor = 1e-12;

Tensor uniform_init(int rows, int cols, int fan_in, Rng& rng) {
  Tensor t(rows, cols);
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
  for (double& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

void FusionConfig::validate() const {
  if (h1 < 1 || h2 < 1 || out_dim < 1) fail(Errc::invalid_argument, "fusion: widths must be >= 1");
  if (binary && num_classes != 1)
    fail(Errc::invalid_argument, "fusion: binary head uses a single logit");
  if (!binary && num_classes < 2)
    fail(Errc::invalid_argument, "fusion: multi-class head needs >= 2 classes");
  if (alpha < 0.0 || alpha >= 1.0) fail(Errc::invalid_argument, "fusion: alpha must be in [0, 1)");
}

void init_cough_encoder_params(NamedTensorStore& store, const FusionConfig& cfg, Rng& rng) {
  store["cough.l1.w"] = uniform_init(44, cfg.h1, 44, rng);
  store["cough.l1.b"] = Tensor(1, cfg.h1);
  store["cough.l2.w"] = uniform_init(cfg.h1, cfg.h2, cfg.h1, rng);
  store["cough.l2.b"] = Tensor(1, cfg.h2);
  store["cough.l3.w"] = uniform_init(cfg.h2, cfg.out_dim, cfg.h2, rng);
  store["cough.l3.b"] = Tensor(1, cfg.out_dim);
}

void init_classifier_params(NamedTensorStore& store, const FusionConfig& cfg,
                            int embedding_width, Rng& rng) {
  store["head.w"] = uniform_init(embedding_width, cfg.num_classes, embedding_width, rng);
  store["head.b"] = Tensor(1, cfg.num_classes);
}

Tensor standardize_cough(const std::vector<std::array<double, 44>>& rows,
                         const FeatureStats& stats) {
  if (stats.cough_mean.size() != 44 || stats.cough_std.size() != 44)
    fail(Errc::invalid_argument, "standardize_cough: statistics must cover 44 features");
  Tensor out(static_cast<int>(rows.size()), 44);
  for (size_t b = 0; b < rows.size(); ++b)
    for (int j = 0; j < 44; ++j)
      out.at(static_cast<int>(b), j) =
          (rows[b][j] - stats.cough_mean[j]) / std::max(stats.cough_std[j], 1e-8);
  return out;
}

ad::Var cough_encoder(Graph& g, NamedTensorStore& store, Var standardized,
                      const FusionConfig& cfg) {
  cfg.validate();
  if (standardized.cols() != 44)
    fail(Errc::shape_mismatch, "cough_encoder: input width must be 44");
  Var h = ad::relu(ad::add_rowvec(ad::matmul(standardized, g.param(store, "cough.l1.w")),
                                  g.param(store, "cough.l1.b")));
  h = ad::relu(ad::add_rowvec(ad::matmul(h, g.param(store, "cough.l2.w")),
                              g.param(store, "cough.l2.b")));
  return ad::add_rowvec(ad::matmul(h, g.param(store, "cough.l3.w")),
                        g.param(store, "cough.l3.b"));
}

ad::Var classifier_logits(Graph& g, NamedTensorStore& store, Var embeddings) {
  Var w = g.param(store, "head.w");
  if (embeddings.cols() != w.rows())
    fail(Errc::shape_mismatch, "classifier_logits: embedding width mismatch");
  return ad::add_rowvec(ad::matmul(embeddings, w), g.param(store, "head.b"));
}

ad::Var categorical_ce(Graph& g, Var probabilities, const Tensor& onehot_targets) {
  if (!probabilities.value().same_shape(onehot_targets))
    fail(Errc::shape_mismatch, "categorical_ce: probability/target shapes differ");
  Var clamped = ad::clamp(probabilities, kProbFloor, 1.0);
  Var log_probs = ad::log_shift(clamped, 0.0);
  Var weighted = ad::mul(g.constant(onehot_targets), log_probs);
  return ad::scale(ad::sum_all(weighted), -1.0 / probabilities.rows());
}

ad::Var binary_ce(Graph& g, Var probabilities, const Tensor& targets) {
  if (!probabilities.value().same_shape(targets))
    fail(Errc::shape_mismatch, "binary_ce: probability/target shapes differ");
  Var p = ad::clamp(probabilities, kProbFloor, 1.0 - kProbFloor);
  Tensor ones(targets.rows, targets.cols, 1.0);
  Var y = g.constant(targets);
  Tensor inv_targets = targets;
  for (double& v : inv_targets.data) v = 1.0 - v;
  Var one_minus_y = g.constant(std::move(inv_targets));
  Var one_minus_p = ad::sub(g.constant(std::move(ones)), p);

  Var hit = ad::mul(y, ad::log_shift(p, 0.0));
  Var miss = ad::mul(one_minus_y, ad::log_shift(one_minus_p, 0.0));
  return ad::scale(ad::sum_all(ad::add(hit, miss)), -1.0 / targets.rows);
}

ad::Var total_loss(Var loss_ce, Var loss_se, double alpha) {
  if (alpha < 0.0 || alpha >= 1.0) fail(Errc::invalid_argument, "total_loss: alpha out of [0, 1)");
  return ad::add(ad::scale(loss_ce, 1.0 - alpha), ad::scale(loss_se, alpha));
}

std::vector<Prediction> predictions_from_logits(const Tensor& logits, bool binary) {
  std::vector<Prediction> out(logits.rows);
  for (int b = 0; b < logits.rows; ++b) {
    Prediction& p = out[b];
    p.logits.resize(logits.cols);
    for (int j = 0; j < logits.cols; ++j) p.logits[j] = logits.at(b, j);

    if (binary) {
      double prob = 1.0 / (1.0 + std::exp(-logits.at(b, 0)));
      p.probabilities = {prob};
      p.predicted_class = prob > 0.5 ? 1 : 0;
    } else {
      double mx = *std::max_element(p.logits.begin(), p.logits.end());
      double sum = 0.0;
      p.probabilities.resize(logits.cols);
      for (int j = 0; j < logits.cols; ++j) {
        p.probabilities[j] = std::exp(p.logits[j] - mx);
        sum += p.probabilities[j];
      }
      int best = 0;
      for (int j = 0; j < logits.cols; ++j) {
        p.probabilities[j] /= sum;
        if (p.probabilities[j] > p.probabilities[best]) best = j;  // ties keep the lowest index
      }
      p.predicted_class = best;
    }
  }
  return out;
}

std::vector<Prediction> fuse_and_classify(NamedTensorStore& store, const Tensor& s_e,
                                          const Tensor& c_e, const FusionConfig& cfg) {
  if (s_e.rows != c_e.rows) fail(Errc::shape_mismatch, "fuse_and_classify: batch sizes differ");
  if (s_e.cols != cfg.out_dim || c_e.cols != cfg.out_dim)
    fail(Errc::shape_mismatch, "fuse_and_classify: embedding widths must equal F");
  Graph g;
  Var fused = ad::concat_cols(g.constant(s_e), g.constant(c_e));
  Var logits = classifier_logits(g, store, fused);
  return predictions_from_logits(logits.value(), cfg.binary);
}

}  // namespace coughkit
