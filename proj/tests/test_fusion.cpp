#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "approx.hpp"

#include <cmath>

#include "coughkit/errors.hpp"
#include "coughkit/fusion.hpp"
#include "coughkit/rng.hpp"
#include "gradcheck.hpp"

using namespace coughkit;
using ad::Graph;
using ad::Var;

namespace {

FusionConfig small_fusion() {
  FusionConfig cfg;
  cfg.h1 = 6;
  cfg.h2 = 4;
  cfg.out_dim = 3;
  cfg.num_classes = 4;
  return cfg;
}

Tensor random_cough_batch(int batch, Rng& rng) { return random_tensor(batch, 44, rng); }

}  // namespace

TEST_CASE("cough_encoder: zero input with zero biases gives zero embedding") {
  FusionConfig cfg = small_fusion();
  NamedTensorStore store;
  Rng rng(7);
  init_cough_encoder_params(store, cfg, rng);

  Graph g;
  Var out = cough_encoder(g, store, g.constant(Tensor(3, 44)), cfg);
  CHECK(out.rows() == 3);
  CHECK(out.cols() == cfg.out_dim);
  for (double v : out.value().data) CHECK(v == 0.0);
}

TEST_CASE("cough_encoder: hand-unrolled fixture and row independence") {
  FusionConfig cfg = small_fusion();
  NamedTensorStore store;
  Rng rng(11);
  init_cough_encoder_params(store, cfg, rng);
  Tensor x = random_cough_batch(2, rng);

  Graph g;
  Tensor out = cough_encoder(g, store, g.constant(x), cfg).value();

  auto linear = [&](const std::vector<double>& in, const std::string& prefix, bool relu_after) {
    const Tensor& w = store.at(prefix + ".w");
    const Tensor& b = store.at(prefix + ".b");
    std::vector<double> res(w.cols);
    for (int j = 0; j < w.cols; ++j) {
      double acc = b.at(0, j);
      for (int k = 0; k < w.rows; ++k) acc += in[k] * w.at(k, j);
      res[j] = relu_after ? std::max(acc, 0.0) : acc;
    }
    return res;
  };
  for (int i = 0; i < 2; ++i) {
    std::vector<double> row(44);
    for (int j = 0; j < 44; ++j) row[j] = x.at(i, j);
    auto expected = linear(linear(linear(row, "cough.l1", true), "cough.l2", true), "cough.l3", false);
    for (int j = 0; j < cfg.out_dim; ++j)
      CHECK(out.at(i, j) == doctest::Approx(expected[j]).epsilon(1e-12));
  }

  // Identical rows map to identical embeddings.
  Tensor dup(2, 44);
  for (int j = 0; j < 44; ++j) dup.at(0, j) = dup.at(1, j) = x.at(0, j);
  Graph g2;
  Tensor out2 = cough_encoder(g2, store, g2.constant(dup), cfg).value();
  for (int j = 0; j < cfg.out_dim; ++j) CHECK(out2.at(0, j) == out2.at(1, j));
}

TEST_CASE("cough_encoder: width mismatch rejected") {
  FusionConfig cfg = small_fusion();
  NamedTensorStore store;
  Rng rng(13);
  init_cough_encoder_params(store, cfg, rng);
  Graph g;
  CHECK_THROWS_AS(cough_encoder(g, store, g.constant(Tensor(2, 40)), cfg), Error);
}

TEST_CASE("standardize_cough uses stored statistics") {
  FeatureStats stats;
  stats.cough_mean.assign(44, 2.0);
  stats.cough_std.assign(44, 4.0);
  std::array<double, 44> row;
  row.fill(10.0);
  Tensor out = standardize_cough({row}, stats);
  for (double v : out.data) CHECK(v == doctest::Approx(2.0));
}

TEST_CASE("fuse_and_classify: symmetry, argmax, normalization, errors") {
  FusionConfig cfg = small_fusion();
  NamedTensorStore store;
  store["head.w"] = Tensor(2 * cfg.out_dim, 4);
  store["head.b"] = Tensor(1, 4);

  SUBCASE("zero everything gives uniform probabilities") {
    auto preds = fuse_and_classify(store, Tensor(3, cfg.out_dim), Tensor(3, cfg.out_dim), cfg);
    REQUIRE(preds.size() == 3);
    for (const auto& p : preds) {
      for (double v : p.probabilities) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
      CHECK(p.predicted_class == 0);  // tie broken toward the lowest index
    }
  }

  SUBCASE("dominant logit wins, rows normalize") {
    auto preds = predictions_from_logits(Tensor::from(1, 4, {2.0, 0.0, 0.0, 0.0}), false);
    CHECK(preds[0].predicted_class == 0);
    double sum = 0.0;
    for (double v : preds[0].probabilities) sum += v;
    CHECK(near_abs(sum, 1.0, 1e-6));
  }

  SUBCASE("argmax invariant under constant logit shifts") {
    Rng rng(17);
    for (int it = 0; it < 20; ++it) {
      Tensor logits = random_tensor(1, 4, rng, 3.0);
      Tensor shifted = logits;
      double c = rng.uniform(-10.0, 10.0);
      for (double& v : shifted.data) v += c;
      CHECK(predictions_from_logits(logits, false)[0].predicted_class ==
            predictions_from_logits(shifted, false)[0].predicted_class);
    }
  }

  SUBCASE("batch size mismatch is an error") {
    CHECK_THROWS_AS(fuse_and_classify(store, Tensor(2, cfg.out_dim), Tensor(3, cfg.out_dim), cfg),
                    Error);
  }
}

TEST_CASE("binary predictions use a single sigmoid") {
  auto preds = predictions_from_logits(Tensor::from(2, 1, {0.0, 3.0}), true);
  CHECK(preds[0].probabilities.size() == 1);
  CHECK(preds[0].probabilities[0] == doctest::Approx(0.5));
  CHECK(preds[0].predicted_class == 0);  // p = 0.5 ties toward class 0
  CHECK(preds[1].probabilities[0] > 0.95);
  CHECK(preds[1].predicted_class == 1);
}

TEST_CASE("categorical_ce: perfect, uniform, batch oracle") {
  Graph g;
  Tensor onehot(2, 4);
  onehot.at(0, 1) = 1.0;
  onehot.at(1, 3) = 1.0;

  Tensor perfect = onehot;
  CHECK(std::abs(ad::scalar(categorical_ce(g, g.leaf(perfect), onehot))) < 1e-12);

  Tensor uniform(2, 4, 0.25);
  CHECK(ad::scalar(categorical_ce(g, g.leaf(uniform), onehot)) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-9));

  Rng rng(19);
  Tensor probs(3, 4);
  Tensor targets(3, 4);
  for (int i = 0; i < 3; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 4; ++j) {
      probs.at(i, j) = rng.uniform(0.05, 1.0);
      sum += probs.at(i, j);
    }
    for (int j = 0; j < 4; ++j) probs.at(i, j) /= sum;
    targets.at(i, rng.uniform_int(4)) = 1.0;
  }
  double direct = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j)
      if (targets.at(i, j) > 0.0) direct -= std::log(probs.at(i, j));
  direct /= 3.0;
  CHECK(ad::scalar(categorical_ce(g, g.leaf(probs), targets)) ==
        doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("binary_ce: half, perfect, oracle") {
  Graph g;
  Tensor targets = Tensor::from(4, 1, {1.0, 0.0, 1.0, 0.0});
  Tensor half(4, 1, 0.5);
  CHECK(ad::scalar(binary_ce(g, g.leaf(half), targets)) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-9));

  CHECK(ad::scalar(binary_ce(g, g.leaf(targets), targets)) <= 1e-11);

  Rng rng(23);
  Tensor probs(4, 1);
  for (double& v : probs.data) v = rng.uniform(0.05, 0.95);
  double direct = 0.0;
  for (int i = 0; i < 4; ++i) {
    double y = targets.at(i, 0), p = probs.at(i, 0);
    direct -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  direct /= 4.0;
  CHECK(ad::scalar(binary_ce(g, g.leaf(probs), targets)) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("total_loss: boundaries, arithmetic, monotonicity, range errors") {
  Graph g;
  auto mk = [&](double v) { return g.leaf(Tensor::from(1, 1, {v})); };

  CHECK(ad::scalar(total_loss(mk(2.5), mk(9.0), 0.0)) == doctest::Approx(2.5));
  CHECK(ad::scalar(total_loss(mk(2.0), mk(4.0), 0.5)) == doctest::Approx(3.0));
  CHECK(ad::scalar(total_loss(mk(1.0), mk(1.0), 0.01)) == doctest::Approx(1.0));

  // Monotone nondecreasing in each constituent for fixed alpha.
  double base = ad::scalar(total_loss(mk(1.0), mk(1.0), 0.3));
  CHECK(ad::scalar(total_loss(mk(1.5), mk(1.0), 0.3)) >= base);
  CHECK(ad::scalar(total_loss(mk(1.0), mk(1.5), 0.3)) >= base);

  CHECK_THROWS_AS(total_loss(mk(1.0), mk(1.0), 1.0), Error);
  CHECK_THROWS_AS(total_loss(mk(1.0), mk(1.0), -0.1), Error);
}

TEST_CASE("gradient checks: cough encoder, head, losses") {
  Rng rng(29);

  SUBCASE("cough_encoder and classifier head") {
    FusionConfig cfg = small_fusion();
    NamedTensorStore store;
    init_cough_encoder_params(store, cfg, rng);
    init_classifier_params(store, cfg, cfg.out_dim, rng);
    store["x"] = random_cough_batch(3, rng);
    Tensor r = random_tensor(3, 4, rng);

    auto builder = [&cfg, r](Graph& g, NamedTensorStore& s) {
      Var emb = cough_encoder(g, s, g.param(s, "x"), cfg);
      Var logits = classifier_logits(g, s, emb);
      return ad::sum_all(ad::mul(logits, g.constant(r)));
    };
    auto res = check_gradients(store, builder);
    CHECK(res.max_rel_err < 1e-5);
  }

  SUBCASE("categorical cross-entropy through softmax") {
    NamedTensorStore store;
    store["logits"] = random_tensor(4, 3, rng, 2.0);
    Tensor targets(4, 3);
    for (int i = 0; i < 4; ++i) targets.at(i, i % 3) = 1.0;
    auto builder = [targets](Graph& g, NamedTensorStore& s) {
      return categorical_ce(g, ad::softmax_rows(g.param(s, "logits")), targets);
    };
    auto res = check_gradients(store, builder);
    CHECK(res.max_rel_err < 1e-6);
  }

  SUBCASE("binary cross-entropy through sigmoid") {
    NamedTensorStore store;
    store["logits"] = random_tensor(5, 1, rng, 2.0);
    Tensor targets = Tensor::from(5, 1, {1.0, 0.0, 0.0, 1.0, 1.0});
    auto builder = [targets](Graph& g, NamedTensorStore& s) {
      return binary_ce(g, ad::sigmoid(g.param(s, "logits")), targets);
    };
    auto res = check_gradients(store, builder);
    CHECK(res.max_rel_err < 1e-6);
  }

  SUBCASE("total loss composition") {
    NamedTensorStore store;
    store["a"] = random_tensor(1, 1, rng, 0.5);
    store["b"] = random_tensor(1, 1, rng, 0.5);
    auto builder = [](Graph& g, NamedTensorStore& s) {
      Var ce = ad::mul(g.param(s, "a"), g.param(s, "a"));
      Var se = ad::mul(g.param(s, "b"), g.param(s, "b"));
      return total_loss(ce, se, 0.01);
    };
    auto res = check_gradients(store, builder);
    CHECK(res.max_rel_err < 1e-8);
  }
}
