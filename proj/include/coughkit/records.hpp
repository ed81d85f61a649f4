#pragma once

#include <array>
#include <string>
#include <vector>

#include "coughkit/tensor.hpp"

namespace coughkit {

enum class Gender { female = 0, male = 1, other = 2 };
constexpr int kGenderLevels = 3;

std::string gender_to_string(Gender g);
Gender gender_from_string(const std::string& s);  // schema_error on unknown level

/// One symptom/demographic row. The field set is closed; unknown CSV columns
/// are rejected.
struct SymptomRecord {
  double age = 0.0;
  Gender gender = Gender::female;
  int fever = 0;
  int dry_cough = 0;
  int sore_throat = 0;
  int headache = 0;
  int body_aches = 0;
  int chest_pain = 0;
  int dizziness_confusion = 0;
  int breathlessness = 0;
  int fatigue = 0;
  int asthma_history = 0;
  int diabetes = 0;
  int hypertension = 0;

  /// Flags in declaration order (9 symptoms then 3 conditions).
  std::array<int, 12> flags() const;
  void set_flag(int index, int value);

  void validate() const;  // age in [0, 120], flags in {0, 1}
};

/// All 14 field names, in CSV column order: age, gender, then the 12 flags.
const std::vector<std::string>& symptom_field_names();

/// The 12 binary flag names (symptom_field_names() minus age and gender).
const std::vector<std::string>& flag_field_names();

std::vector<std::string> record_to_csv_fields(const SymptomRecord& r);
SymptomRecord record_from_csv_fields(const std::vector<std::string>& header,
                                     const std::vector<std::string>& fields);

/// Reads a symptoms CSV whose header must contain exactly the record field
/// names (any order). Unknown or missing columns are schema errors.
std::vector<SymptomRecord> read_symptoms_csv(const std::string& path);
void write_symptoms_csv(const std::string& path, const std::vector<SymptomRecord>& records);

/// One dataset item: a WAV, its label, and the subject's symptom row.
struct ManifestItem {
  std::string wav_path;  // relative to the manifest's directory
  std::string label;
  SymptomRecord symptoms;
};

/// Manifest CSV: wav_path,label,<symptom columns>.
std::vector<ManifestItem> read_manifest_csv(const std::string& path);
void write_manifest_csv(const std::string& path, const std::vector<ManifestItem>& items);

}  // namespace coughkit
