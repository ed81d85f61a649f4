#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "approx.hpp"

#include <cmath>
#include <filesystem>
#include <map>

#include "coughkit/errors.hpp"
#include "coughkit/interpret.hpp"
#include "coughkit/rng.hpp"
#include "coughkit/train.hpp"

using namespace coughkit;

namespace {

Mask make_mask(std::initializer_list<std::initializer_list<double>> rows, int step) {
  Mask m;
  m.step_index = step;
  int r = 0, c = 0;
  for (const auto& row : rows) c = static_cast<int>(row.size());
  m.values = Tensor(static_cast<int>(rows.size()), c);
  for (const auto& row : rows) {
    int j = 0;
    for (double v : row) m.values.at(r, j++) = v;
    ++r;
  }
  return m;
}

std::vector<std::string> names(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back("f" + std::to_string(i));
  return out;
}

double weight_of(const std::vector<std::pair<std::string, double>>& w, const std::string& name) {
  for (const auto& [n, v] : w)
    if (n == name) return v;
  FAIL("missing field weight: " << name);
  return 0.0;
}

}  // namespace

TEST_CASE("aggregate_masks: identical masks reproduce the mask") {
  Mask m = make_mask({{0.5, 0.5, 0.0}, {0.2, 0.3, 0.5}}, 1);
  Mask m2 = m;
  m2.step_index = 2;
  auto report = aggregate_masks({m, m2}, nullptr, names(3));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(report.per_sample.at(i, j) == doctest::Approx(m.values.at(i, j)).epsilon(1e-9));
}

TEST_CASE("aggregate_masks: single step renormalizes that mask") {
  Mask m = make_mask({{0.6, 0.4, 0.0}}, 1);
  auto report = aggregate_masks({m}, nullptr, names(3));
  CHECK(report.global_importance[0] == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(report.global_importance[1] == doctest::Approx(0.4).epsilon(1e-9));
  double sum = 0.0;
  for (double v : report.global_importance) sum += v;
  CHECK(near_abs(sum, 1.0, 1e-6));
}

TEST_CASE("aggregate_masks: weighted two-step fixture and uniform fallback") {
  Mask a = make_mask({{1.0, 0.0}}, 1);
  Mask b = make_mask({{0.0, 1.0}}, 2);

  Tensor weights(1, 2);
  weights.at(0, 0) = 3.0;
  weights.at(0, 1) = 1.0;
  auto report = aggregate_masks({a, b}, &weights, names(2));
  CHECK(report.per_sample.at(0, 0) == doctest::Approx(0.75).epsilon(1e-9));
  CHECK(report.per_sample.at(0, 1) == doctest::Approx(0.25).epsilon(1e-9));

  // All-zero weights fall back to uniform step weighting.
  Tensor zeros(1, 2);
  auto fallback = aggregate_masks({a, b}, &zeros, names(2));
  CHECK(fallback.per_sample.at(0, 0) == doctest::Approx(0.5).epsilon(1e-9));

  // Positive rescaling of the weights changes nothing.
  Tensor scaled = weights;
  for (double& v : scaled.data) v *= 37.5;
  auto rescaled = aggregate_masks({a, b}, &scaled, names(2));
  for (int j = 0; j < 2; ++j)
    CHECK(rescaled.global_importance[j] ==
          doctest::Approx(report.global_importance[j]).epsilon(1e-12));
}

TEST_CASE("aggregate_masks: errors") {
  CHECK_THROWS_AS(aggregate_masks({}, nullptr, {}), Error);
  Mask a = make_mask({{1.0, 0.0}}, 1);
  Mask wrong = make_mask({{1.0, 0.0, 0.0}}, 2);
  CHECK_THROWS_AS(aggregate_masks({a, wrong}, nullptr, names(2)), Error);
}

TEST_CASE("field_importance collapses gender embedding columns") {
  EncoderConfig cfg;
  cfg.embed_dim = 4;
  std::vector<double> columns(cfg.encoded_dim(), 0.0);
  columns[0] = 0.10;                      // age
  columns[1] = 0.20;                      // fever
  for (int e = 0; e < 4; ++e) columns[13 + e] = 0.05;  // gender block
  columns[12] = 0.50;                     // hypertension
  auto fields = field_importance(columns, cfg);
  CHECK(weight_of(fields, "age") == doctest::Approx(0.10));
  CHECK(weight_of(fields, "fever") == doctest::Approx(0.20));
  CHECK(weight_of(fields, "gender") == doctest::Approx(0.20));
  CHECK(weight_of(fields, "hypertension") == doctest::Approx(0.50));
}

namespace {

Dataset planted_dataset(int per_class, uint64_t seed) {
  // Only fever and chest_pain correlate with the positive class; every other
  // flag is class-independent noise.
  Dataset ds;
  ds.class_names = {"covid_negative", "covid_positive"};
  Rng rng(seed);
  for (int label = 0; label < 2; ++label)
    for (int i = 0; i < per_class; ++i) {
      Sample s;
      s.has_symptoms = true;
      s.symptoms.age = std::floor(rng.uniform(20, 80));
      s.symptoms.gender = static_cast<Gender>(rng.uniform_int(3));
      for (int f = 0; f < 12; ++f) s.symptoms.set_flag(f, rng.bernoulli(0.3) ? 1 : 0);
      s.symptoms.fever = rng.bernoulli(label ? 0.9 : 0.05) ? 1 : 0;
      s.symptoms.chest_pain = rng.bernoulli(label ? 0.85 : 0.05) ? 1 : 0;
      s.label = label;
      ds.samples.push_back(s);
    }
  return ds;
}

}  // namespace

TEST_CASE("explain_sample: normalization and symmetric near-uniformity") {
  EncoderConfig enc;
  enc.n_steps = 2;
  enc.n_d = 4;
  enc.n_a = 4;
  enc.out_dim = 5;
  Rng rng(3);
  Checkpoint ckpt;
  ckpt.task = "symptoms_only";
  ckpt.encoder_config = enc;
  ckpt.feature_statistics.age_mean = 40.0;
  ckpt.feature_statistics.age_std = 10.0;
  init_tabnet_params(ckpt.tensors, enc, enc.encoded_dim(), rng);

  SymptomRecord record;
  record.age = 44;
  record.fever = 1;
  auto weights = explain_sample(ckpt, record);
  double sum = 0.0;
  for (const auto& [name, w] : weights) {
    CHECK(w >= 0.0);
    sum += w;
  }
  CHECK(near_abs(sum, 1.0, 1e-6));

  // A symmetric attention stage (identical FC columns) with equal features
  // spreads attention uniformly over the encoded columns.
  const int dim = enc.encoded_dim();
  for (int step = 1; step <= enc.n_steps; ++step) {
    auto& w = ckpt.tensors.at("tabnet.at.step" + std::to_string(step) + ".w");
    for (double& v : w.data) v = 0.27;
    ckpt.tensors.at("tabnet.at.step" + std::to_string(step) + ".b") = Tensor(1, dim, 0.05);
  }
  auto uniform_weights = explain_sample(ckpt, record);
  CHECK(weight_of(uniform_weights, "age") == doctest::Approx(1.0 / dim).epsilon(1e-6));
  CHECK(weight_of(uniform_weights, "gender") ==
        doctest::Approx(static_cast<double>(enc.embed_dim) / dim).epsilon(1e-6));
  CHECK(weight_of(uniform_weights, "fever") == doctest::Approx(1.0 / dim).epsilon(1e-6));
}

TEST_CASE("planted-signal recovery: trained importance favors the signal fields") {
  Dataset ds = planted_dataset(120, 7);
  TrainConfig cfg;
  cfg.task = Task::symptoms_only;
  cfg.epochs = 40;
  cfg.batch_size = 24;
  cfg.learning_rate = 5e-3;
  cfg.alpha = 0.02;
  cfg.seed = 11;
  cfg.encoder.n_steps = 2;
  cfg.encoder.n_d = 6;
  cfg.encoder.n_a = 6;
  cfg.encoder.out_dim = 8;
  cfg.fusion.out_dim = 8;

  TrainResult result = train(ds, cfg);
  std::vector<SymptomRecord> records;
  for (const auto& s : ds.samples) records.push_back(s.symptoms);
  auto importance = explain_batch(result.checkpoint, records);

  double signal = weight_of(importance, "fever") + weight_of(importance, "chest_pain");
  double noise = weight_of(importance, "headache") + weight_of(importance, "fatigue");
  CHECK(signal > noise);
}

TEST_CASE("symptom_correlation: diagonal, perfect pairs, oracle, constants") {
  std::vector<SymptomRecord> records;
  Rng rng(13);
  for (int i = 0; i < 40; ++i) {
    SymptomRecord r;
    r.age = 20 + i;
    r.fever = rng.bernoulli(0.5) ? 1 : 0;
    r.dry_cough = r.fever;       // perfectly correlated pair
    r.sore_throat = rng.bernoulli(0.4) ? 1 : 0;
    r.diabetes = 0;              // constant field
    records.push_back(r);
  }
  auto corr = symptom_correlation(records);
  const int dim = static_cast<int>(corr.fields.size());
  REQUIRE(dim == 13);

  for (int i = 0; i < dim; ++i) CHECK(corr.values.at(i, i) == 1.0);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      CHECK(corr.values.at(i, j) == corr.values.at(j, i));
      CHECK(corr.values.at(i, j) >= -1.0 - 1e-12);
      CHECK(corr.values.at(i, j) <= 1.0 + 1e-12);
    }

  auto index_of = [&](const std::string& name) {
    for (int i = 0; i < dim; ++i)
      if (corr.fields[i] == name) return i;
    return -1;
  };
  CHECK(corr.values.at(index_of("fever"), index_of("dry_cough")) == doctest::Approx(1.0));

  // Direct covariance oracle for one off-diagonal pair.
  int a = index_of("fever"), b = index_of("sore_throat");
  double ma = 0, mb = 0;
  for (const auto& r : records) {
    ma += r.fever;
    mb += r.sore_throat;
  }
  ma /= records.size();
  mb /= records.size();
  double cov = 0, va = 0, vb = 0;
  for (const auto& r : records) {
    cov += (r.fever - ma) * (r.sore_throat - mb);
    va += (r.fever - ma) * (r.fever - ma);
    vb += (r.sore_throat - mb) * (r.sore_throat - mb);
  }
  CHECK(corr.values.at(a, b) == doctest::Approx(cov / std::sqrt(va * vb)).epsilon(1e-9));

  // Constant fields yield zero with a flag.
  int d = index_of("diabetes");
  CHECK(corr.values.at(d, a) == 0.0);
  bool flagged = false;
  for (const auto& f : corr.flags) flagged |= f.find("diabetes") != std::string::npos;
  CHECK(flagged);

  CHECK_THROWS_AS(symptom_correlation({records[0]}), Error);
}

TEST_CASE("importance and correlation CSV exports") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "coughkit_interpret";
  fs::create_directories(dir);

  std::vector<std::pair<std::string, double>> weights = {
      {"low", 0.1}, {"high", 0.7}, {"mid", 0.2}};
  auto ipath = (dir / "importance.csv").string();
  write_importance_csv(ipath, weights);
  std::ifstream in(ipath);
  std::string line;
  std::getline(in, line);
  CHECK(line == "feature,weight");
  std::getline(in, line);
  CHECK(line.rfind("high,", 0) == 0);  // sorted descending

  std::vector<SymptomRecord> records(3);
  records[0].age = 20;
  records[1].age = 40;
  records[2].age = 66;
  records[1].fever = 1;
  auto corr = symptom_correlation(records);
  auto cpath = (dir / "corr.csv").string();
  write_correlation_csv(cpath, corr);
  std::ifstream cin_file(cpath);
  std::getline(cin_file, line);
  CHECK(line.rfind("field,age,", 0) == 0);
  int rows = 0;
  while (std::getline(cin_file, line)) ++rows;
  CHECK(rows == 13);
}
