#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "coughkit/audio.hpp"
#include "coughkit/records.hpp"

namespace coughkit {

/// One phase of the three-phase cough model (initial burst, noisy airflow,
/// closure tail): duration, share of the signal energy, and the emphasized
/// frequency band.
struct PhaseSpec {
  double duration_ms = 100.0;
  double energy_fraction = 0.33;
  double band_low_hz = 300.0;
  double band_high_hz = 3000.0;
};

/// Class-conditional generator parameters. The profiles are the only source
/// of class structure in the synthetic data; they are constructions for
/// exercising the pipeline, not clinical claims.
struct CoughClassProfile {
  std::string label;
  PhaseSpec burst, airflow, closure;
  double catch_gap_ms = 0.0;            // brief silence before the airflow phase
  bool periodic_tail = false;           // vocal-fold analog in the closure phase
  double tail_frequency_hz = 190.0;
  bool random_tail_modulation = false;  // wet-cough analog
  double noise_floor = 0.05;            // broadband noise mixed into each phase
  double age_min = 18.0;
  double age_max = 80.0;
  std::map<std::string, double> symptom_rates;  // flag field -> Bernoulli rate

  void validate() const;  // fractions sum to 1, durations positive
};

/// The four built-in classes: healthy, asthma, bronchitis, covid_positive.
std::vector<CoughClassProfile> default_profiles();

nlohmann::json profiles_to_json(const std::vector<CoughClassProfile>& profiles);
std::vector<CoughClassProfile> profiles_from_json(const nlohmann::json& j);

/// Sample ranges of the three phases within a generated signal (the catch
/// gap sits between burst_end and airflow_begin).
struct CoughPhases {
  size_t burst_begin = 0, burst_end = 0;
  size_t airflow_begin = 0, airflow_end = 0;
  size_t closure_begin = 0, closure_end = 0;
};

/// Three-phase synthetic cough at 16 kHz, deterministic per (profile, seed).
/// Per-phase energy fractions match the profile within 10%; samples stay in
/// [-1, 1]; duration is 300-1500 ms.
AudioSignal gen_cough(const CoughClassProfile& profile, uint64_t seed,
                      CoughPhases* phases = nullptr);

/// Symptom row drawn from the profile's Bernoulli rates, age uniform in the
/// profile range; deterministic per seed.
SymptomRecord gen_symptoms(const CoughClassProfile& profile, uint64_t seed);

/// Writes n_per_class WAVs per class plus manifest.csv and symptoms.csv into
/// out_dir. Items derive independent streams from (seed, class, index), so
/// outputs are byte-identical for any worker count.
std::vector<ManifestItem> gen_dataset(const std::string& out_dir, int n_per_class,
                                      const std::vector<CoughClassProfile>& profiles,
                                      uint64_t seed, int workers = 1);

}  // namespace coughkit
