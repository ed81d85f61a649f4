#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "coughkit/checkpoint.hpp"
#include "coughkit/csv.hpp"
#include "coughkit/errors.hpp"
#include "coughkit/records.hpp"
#include "coughkit/rng.hpp"

using namespace coughkit;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
  fs::path dir = fs::temp_directory_path() / "coughkit_records_tests";
  fs::create_directories(dir);
  return dir;
}

SymptomRecord sample_record() {
  SymptomRecord r;
  r.age = 42;
  r.gender = Gender::male;
  r.fever = 1;
  r.chest_pain = 1;
  r.hypertension = 1;
  return r;
}

}  // namespace

TEST_CASE("symptoms CSV round trip") {
  std::vector<SymptomRecord> records = {sample_record()};
  SymptomRecord second;
  second.age = 7;
  second.gender = Gender::other;
  second.breathlessness = 1;
  records.push_back(second);

  auto path = (test_dir() / "symptoms.csv").string();
  write_symptoms_csv(path, records);
  auto back = read_symptoms_csv(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].age == 42);
  CHECK(back[0].gender == Gender::male);
  CHECK(back[0].fever == 1);
  CHECK(back[0].dry_cough == 0);
  CHECK(back[1].gender == Gender::other);
  CHECK(back[1].breathlessness == 1);
}

TEST_CASE("symptoms CSV schema is closed") {
  auto path = (test_dir() / "bad.csv").string();

  SUBCASE("unknown column rejected") {
    std::ofstream out(path);
    out << "age,gender,fever,dry_cough,sore_throat,headache,body_aches,chest_pain,"
           "dizziness_confusion,breathlessness,fatigue,asthma_history,diabetes,hypertension,"
           "extra\n";
    out << "40,male,0,0,0,0,0,0,0,0,0,0,0,0,0\n";
    out.close();
    CHECK_THROWS_AS(read_symptoms_csv(path), Error);
  }

  SUBCASE("missing column rejected") {
    std::ofstream out(path);
    out << "age,gender,fever\n40,male,0\n";
    out.close();
    CHECK_THROWS_AS(read_symptoms_csv(path), Error);
  }

  SUBCASE("unknown gender level rejected") {
    std::ofstream out(path);
    out << join_csv(symptom_field_names()) << "\n";
    out << "40,unknown,0,0,0,0,0,0,0,0,0,0,0,0\n";
    out.close();
    try {
      read_symptoms_csv(path);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::schema_error);
    }
  }

  SUBCASE("non-binary flag rejected") {
    std::ofstream out(path);
    out << join_csv(symptom_field_names()) << "\n";
    out << "40,male,2,0,0,0,0,0,0,0,0,0,0,0\n";
    out.close();
    CHECK_THROWS_AS(read_symptoms_csv(path), Error);
  }

  SUBCASE("age out of range rejected") {
    std::ofstream out(path);
    out << join_csv(symptom_field_names()) << "\n";
    out << "150,male,0,0,0,0,0,0,0,0,0,0,0,0\n";
    out.close();
    CHECK_THROWS_AS(read_symptoms_csv(path), Error);
  }
}

TEST_CASE("manifest CSV round trip") {
  std::vector<ManifestItem> items;
  ManifestItem a{"wavs/healthy_0001.wav", "healthy", sample_record()};
  items.push_back(a);
  auto path = (test_dir() / "manifest.csv").string();
  write_manifest_csv(path, items);
  auto back = read_manifest_csv(path);
  REQUIRE(back.size() == 1);
  CHECK(back[0].wav_path == "wavs/healthy_0001.wav");
  CHECK(back[0].label == "healthy");
  CHECK(back[0].symptoms.fever == 1);
}

TEST_CASE("base64 round trip on all remainders") {
  Rng rng(41);
  for (size_t len : {0u, 1u, 2u, 3u, 4u, 17u, 100u}) {
    std::vector<unsigned char> bytes(len);
    for (auto& b : bytes) b = static_cast<unsigned char>(rng.uniform_int(256));
    auto text = base64_encode(bytes.data(), bytes.size());
    CHECK(base64_decode(text) == bytes);
  }
}

TEST_CASE("checkpoint JSON round trip at float32 precision") {
  Checkpoint ckpt;
  ckpt.task = "both_multiclass";
  ckpt.class_names = {"asthma", "bronchitis", "covid_positive", "healthy"};
  ckpt.feature_statistics.age_mean = 44.5;
  ckpt.feature_statistics.age_std = 13.25;
  ckpt.feature_statistics.cough_mean.assign(44, 0.5);
  ckpt.feature_statistics.cough_std.assign(44, 2.0);

  Rng rng(43);
  Tensor t(5, 7);
  for (double& v : t.data) v = rng.uniform(-3.0, 3.0);
  ckpt.tensors["layer.w"] = t;
  ckpt.tensors["layer.b"] = Tensor(1, 7, 0.125);

  auto path = (test_dir() / "ckpt.json").string();
  save_checkpoint(path, ckpt);
  Checkpoint back = load_checkpoint(path);

  CHECK(back.task == ckpt.task);
  CHECK(back.class_names == ckpt.class_names);
  CHECK(back.encoder_config.n_steps == ckpt.encoder_config.n_steps);
  CHECK(back.feature_statistics.cough_mean == ckpt.feature_statistics.cough_mean);
  REQUIRE(back.tensors.count("layer.w") == 1);
  const Tensor& w = back.tensors["layer.w"];
  REQUIRE(w.rows == 5);
  REQUIRE(w.cols == 7);
  for (size_t i = 0; i < w.size(); ++i) {
    // Storage is float32; round trip error is bounded by one ulp at this scale.
    CHECK(std::abs(w.data[i] - t.data[i]) <= 3e-7 * std::max(1.0, std::abs(t.data[i])));
  }
  // Exactly representable values survive bit-exactly.
  CHECK(back.tensors["layer.b"].data == ckpt.tensors["layer.b"].data);
}

TEST_CASE("checkpoint serialization is deterministic") {
  Checkpoint ckpt;
  ckpt.task = "cough_only";
  ckpt.class_names = {"covid_negative", "covid_positive"};
  ckpt.feature_statistics.cough_mean.assign(44, 1.0);
  ckpt.feature_statistics.cough_std.assign(44, 1.0);
  ckpt.tensors["w"] = Tensor(2, 2, 0.25);
  CHECK(checkpoint_to_json(ckpt) == checkpoint_to_json(ckpt));
}

TEST_CASE("checkpoint rejects malformed input") {
  CHECK_THROWS_AS(checkpoint_from_json("not json"), Error);
  CHECK_THROWS_AS(checkpoint_from_json("{}"), Error);
  CHECK_THROWS_AS(load_checkpoint((test_dir() / "missing.json").string()), Error);
}
