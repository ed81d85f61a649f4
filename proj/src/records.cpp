#include "coughkit/records.hpp"

#include <algorithm>

#include "coughkit/csv.hpp"
#include "coughkit/errors.hpp"

namespace coughkit {

std::string gender_to_string(Gender g) {
  switch (g) {
    case Gender::female: return "female";
    case Gender::male: return "male";
    case Gender::other: return "other";
  }
  fail(Errc::invalid_argument, "invalid gender value");
}

Gender gender_from_string(const std::string& s) {
  if (s == "female") return Gender::female;
  if (s == "male") return Gender::male;
  if (s == "other") return Gender::other;
  fail(Errc::schema_error, "unknown gender level: '" + s + "'");
}

std::array<int, 12> SymptomRecord::flags() const {
  return {fever,    dry_cough,      sore_throat,   headache,
          body_aches, chest_pain,     dizziness_confusion, breathlessness,
          fatigue,  asthma_history, diabetes,      hypertension};
}

void SymptomRecord::set_flag(int index, int value) {
  int* slots[12] = {&fever,    &dry_cough,      &sore_throat,   &headache,
                    &body_aches, &chest_pain,     &dizziness_confusion, &breathlessness,
                    &fatigue,  &asthma_history, &diabetes,      &hypertension};
  if (index < 0 || index >= 12) fail(Errc::invalid_argument, "flag index out of range");
  *slots[index] = value;
}

void SymptomRecord::validate() const {
  if (age < 0.0 || age > 120.0) fail(Errc::schema_error, "age out of [0, 120]");
  for (int f : flags())
    if (f != 0 && f != 1) fail(Errc::schema_error, "flag values must be 0 or 1");
}

const std::vector<std::string>& symptom_field_names() {
  static const std::vector<std::string> names = {
      "age",           "gender",        "fever",         "dry_cough",
      "sore_throat",   "headache",      "body_aches",    "chest_pain",
      "dizziness_confusion", "breathlessness", "fatigue",  "asthma_history",
      "diabetes",      "hypertension"};
  return names;
}

const std::vector<std::string>& flag_field_names() {
  static const std::vector<std::string> names = [] {
    const auto& all = symptom_field_names();
    return std::vector<std::string>(all.begin() + 2, all.end());
  }();
  return names;
}

std::vector<std::string> record_to_csv_fields(const SymptomRecord& r) {
  std::vector<std::string> out;
  out.push_back(std::to_string(static_cast<int>(r.age)));
  out.push_back(gender_to_string(r.gender));
  for (int f : r.flags()) out.push_back(std::to_string(f));
  return out;
}

namespace {

int parse_flag(const std::string& s, const std::string& column) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  fail(Errc::schema_error, "column '" + column + "' must be 0 or 1, got '" + s + "'");
}

double parse_age(const std::string& s) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(Errc::schema_error, "bad age value: '" + s + "'");
  }
}

}  // namespace

SymptomRecord record_from_csv_fields(const std::vector<std::string>& header,
                                     const std::vector<std::string>& fields) {
  const auto& names = symptom_field_names();
  if (header.size() != names.size())
    fail(Errc::schema_error, "symptoms CSV must have exactly the record columns");
  for (const std::string& h : header)
    if (std::find(names.begin(), names.end(), h) == names.end())
      fail(Errc::schema_error, "unknown column '" + h + "' in symptoms CSV");
  for (const std::string& n : names)
    if (std::find(header.begin(), header.end(), n) == header.end())
      fail(Errc::schema_error, "missing column '" + n + "' in symptoms CSV");

  SymptomRecord r;
  const auto& flag_names = flag_field_names();
  for (size_t i = 0; i < header.size(); ++i) {
    const std::string& col = header[i];
    const std::string& v = fields[i];
    if (col == "age") {
      r.age = parse_age(v);
    } else if (col == "gender") {
      r.gender = gender_from_string(v);
    } else {
      auto it = std::find(flag_names.begin(), flag_names.end(), col);
      r.set_flag(static_cast<int>(it - flag_names.begin()), parse_flag(v, col));
    }
  }
  r.validate();
  return r;
}

std::vector<SymptomRecord> read_symptoms_csv(const std::string& path) {
  CsvTable table = read_csv(path);
  std::vector<SymptomRecord> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) out.push_back(record_from_csv_fields(table.header, row));
  return out;
}

void write_symptoms_csv(const std::string& path, const std::vector<SymptomRecord>& records) {
  CsvTable table;
  table.header = symptom_field_names();
  for (const auto& r : records) table.rows.push_back(record_to_csv_fields(r));
  write_csv(path, table);
}

std::vector<ManifestItem> read_manifest_csv(const std::string& path) {
  CsvTable table = read_csv(path);
  if (table.header.size() != 2 + symptom_field_names().size() ||
      table.header[0] != "wav_path" || table.header[1] != "label")
    fail(Errc::schema_error, "manifest header must be wav_path,label,<symptom columns>");
  std::vector<std::string> symptom_header(table.header.begin() + 2, table.header.end());

  std::vector<ManifestItem> items;
  for (const auto& row : table.rows) {
    ManifestItem item;
    item.wav_path = row[0];
    item.label = row[1];
    std::vector<std::string> symptom_fields(row.begin() + 2, row.end());
    item.symptoms = record_from_csv_fields(symptom_header, symptom_fields);
    items.push_back(std::move(item));
  }
  return items;
}

void write_manifest_csv(const std::string& path, const std::vector<ManifestItem>& items) {
  CsvTable table;
  table.header = {"wav_path", "label"};
  for (const auto& n : symptom_field_names()) table.header.push_back(n);
  for (const auto& item : items) {
    std::vector<std::string> row = {item.wav_path, item.label};
    for (const auto& f : record_to_csv_fields(item.symptoms)) row.push_back(f);
    table.rows.push_back(std::move(row));
  }
  write_csv(path, table);
}

}  // namespace coughkit
