#include "coughkit/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <thread>

#include "coughkit/errors.hpp"
#include "coughkit/rng.hpp"

namespace coughkit {

namespace fs = std::filesystem;

namespace {

constexpr int kRate = 16000;
constexpr double kPi = 3.14159265358979323846;

void bandpass_inplace(std::vector<double>& x, double band_lo, double band_hi) {
  const double f0 = std::sqrt(band_lo * band_hi);
  const double q = f0 / std::max(band_hi - band_lo, 1.0);
  const double w0 = 2.0 * kPi * f0 / kRate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;

  for (int pass = 0; pass < 2; ++pass) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : x) {
      double in = v;
      double y = b0 * in + z1;
      z1 = -a1 * y + z2;  // b1 = 0
      z2 = b2 * in - a2 * y;
      v = y;
    }
  }
}

std::vector<double> shaped_noise(size_t n, double band_lo, double band_hi, double noise_floor,
                                 Rng& rng) {
  std::vector<double> x(n);
  for (double& v : x) v = rng.normal();
  bandpass_inplace(x, band_lo, band_hi);
  double rms = 0.0;
  for (double v : x) rms += v * v;
  rms = std::sqrt(rms / static_cast<double>(n));
  if (rms > 0.0)
    for (double& v : x) v /= rms;
  for (double& v : x) v += noise_floor * rng.normal();
  return x;
}

void scale_to_energy(std::vector<double>& x, double target_energy) {
  double e = 0.0;
  for (double v : x) e += v * v;
  if (e <= 0.0) return;
  const double k = std::sqrt(target_energy / e);
  for (double& v : x) v *= k;
}

size_t ms_to_samples(double ms) {
  return static_cast<size_t>(std::llround(ms * kRate / 1000.0));
}

double jitter_band(double hz, Rng& rng) {
  return std::clamp(hz * rng.uniform(0.7, 1.3), 80.0, 7600.0);
}

}  // namespace

void CoughClassProfile::validate() const {
  const double total = burst.energy_fraction + airflow.energy_fraction + closure.energy_fraction;
  if (std::abs(total - 1.0) > 1e-9)
    fail(Errc::invalid_argument, "profile '" + label + "': energy fractions must sum to 1");
  for (const PhaseSpec* p : {&burst, &airflow, &closure}) {
    if (p->duration_ms <= 0.0) fail(Errc::invalid_argument, "profile: durations must be positive");
    if (p->band_low_hz <= 0.0 || p->band_high_hz <= p->band_low_hz ||
        p->band_high_hz >= kRate / 2.0)
      fail(Errc::invalid_argument, "profile: bad frequency band");
  }
  for (const auto& [field, rate] : symptom_rates) {
    if (std::find(flag_field_names().begin(), flag_field_names().end(), field) ==
        flag_field_names().end())
      fail(Errc::invalid_argument, "profile: unknown symptom field '" + field + "'");
    if (rate < 0.0 || rate > 1.0) fail(Errc::invalid_argument, "profile: rate out of [0, 1]");
  }
  if (age_min < 0.0 || age_max > 120.0 || age_max < age_min)
    fail(Errc::invalid_argument, "profile: bad age range");
}

std::vector<CoughClassProfile> default_profiles() {
  auto rates = [](std::initializer_list<std::pair<const char*, double>> kv) {
    std::map<std::string, double> m;
    for (auto& [k, v] : kv) m[k] = v;
    return m;
  };

  CoughClassProfile healthy;
  healthy.label = "healthy";
  healthy.burst = {80.0, 0.50, 1200.0, 5200.0};
  healthy.airflow = {190.0, 0.32, 2600.0, 6400.0};
  healthy.closure = {140.0, 0.18, 1800.0, 5200.0};
  healthy.periodic_tail = true;
  healthy.tail_frequency_hz = 190.0;
  healthy.symptom_rates = rates({{"fever", 0.05},
{"dry_cough", 0.08},
{"sore_throat", 0.06},
{"headache", 0.30},
{"body_aches", 0.06},
{"chest_pain", 0.04},
{"dizziness_confusion", 0.03},
{"breathlessness", 0.04},
{"fatigue", 0.30},
{"asthma_history", 0.05},
{"diabetes", 0.10},
{"hypertension", 0.12}});

  CoughClassProfile asthma;
  asthma.label = "asthma";
  asthma.burst = {95.0, 0.38, 350.0, 3200.0};
  asthma.airflow = {260.0, 0.42, 280.0, 4600.0};
  asthma.closure = {170.0, 0.20, 220.0, 3200.0};
  asthma.random_tail_modulation = true;
  asthma.noise_floor = 0.10;
  asthma.symptom_rates = rates({{"fever", 0.62},
{"dry_cough", 0.82},
{"sore_throat", 0.18},
{"headache", 0.30},
{"body_aches", 0.38},
{"chest_pain", 0.58},
{"dizziness_confusion", 0.38},
{"breathlessness", 0.90},
{"fatigue", 0.30},
{"asthma_history", 0.40},
{"diabetes", 0.10},
{"hypertension", 0.15}});

  CoughClassProfile bronchitis;
  bronchitis.label = "bronchitis";
  // Acoustically a covid twin except for the wet-cough modulation; the
  // symptom profile is what separates the two classes reliably.
  bronchitis.burst = {75.0, 0.20, 380.0, 2400.0};
  bronchitis.airflow = {250.0, 0.47, 300.0, 2200.0};
  bronchitis.closure = {180.0, 0.33, 240.0, 2000.0};
  bronchitis.catch_gap_ms = 35.0;
  bronchitis.random_tail_modulation = true;
  bronchitis.noise_floor = 0.10;
  bronchitis.symptom_rates = rates({{"fever", 0.08},
{"dry_cough", 0.10},
{"sore_throat", 0.90},
{"headache", 0.30},
{"body_aches", 0.55},
{"chest_pain", 0.04},
{"dizziness_confusion", 0.04},
{"breathlessness", 0.15},
{"fatigue", 0.30},
{"asthma_history", 0.05},
{"diabetes", 0.10},
{"hypertension", 0.15}});

  CoughClassProfile covid;
  covid.label = "covid_positive";
  covid.burst = {75.0, 0.20, 380.0, 2400.0};
  covid.airflow = {250.0, 0.47, 300.0, 2200.0};
  covid.closure = {180.0, 0.33, 240.0, 2000.0};
  covid.catch_gap_ms = 35.0;
  covid.noise_floor = 0.10;
  covid.symptom_rates = rates({{"fever", 0.92},
{"dry_cough", 0.90},
{"sore_throat", 0.25},
{"headache", 0.30},
{"body_aches", 0.52},
{"chest_pain", 0.82},
{"dizziness_confusion", 0.58},
{"breathlessness", 0.42},
{"fatigue", 0.30},
{"asthma_history", 0.08},
{"diabetes", 0.12},
{"hypertension", 0.15}});

  return {healthy, asthma, bronchitis, covid};
}

nlohmann::json profiles_to_json(const std::vector<CoughClassProfile>& profiles) {
  auto phase = [](const PhaseSpec& p) {
    return nlohmann::json{{"duration_ms", p.duration_ms},
                          {"energy_fraction", p.energy_fraction},
                          {"band_low_hz", p.band_low_hz},
                          {"band_high_hz", p.band_high_hz}};
  };
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : profiles) {
    out.push_back({{"label", p.label},
                   {"burst", phase(p.burst)},
                   {"airflow", phase(p.airflow)},
                   {"closure", phase(p.closure)},
                   {"catch_gap_ms", p.catch_gap_ms},
                   {"periodic_tail", p.periodic_tail},
                   {"tail_frequency_hz", p.tail_frequency_hz},
                   {"random_tail_modulation", p.random_tail_modulation},
                   {"noise_floor", p.noise_floor},
                   {"age_min", p.age_min},
                   {"age_max", p.age_max},
                   {"symptom_rates", p.symptom_rates}});
  }
  return out;
}

std::vector<CoughClassProfile> profiles_from_json(const nlohmann::json& j) {
  auto phase = [](const nlohmann::json& pj) {
    PhaseSpec p;
    p.duration_ms = pj.at("duration_ms").get<double>();
    p.energy_fraction = pj.at("energy_fraction").get<double>();
    p.band_low_hz = pj.at("band_low_hz").get<double>();
    p.band_high_hz = pj.at("band_high_hz").get<double>();
    return p;
  };
  std::vector<CoughClassProfile> out;
  try {
    for (const auto& pj : j) {
      CoughClassProfile p;
      p.label = pj.at("label").get<std::string>();
      p.burst = phase(pj.at("burst"));
      p.airflow = phase(pj.at("airflow"));
      p.closure = phase(pj.at("closure"));
      p.catch_gap_ms = pj.value("catch_gap_ms", 0.0);
      p.periodic_tail = pj.value("periodic_tail", false);
      p.tail_frequency_hz = pj.value("tail_frequency_hz", 190.0);
      p.random_tail_modulation = pj.value("random_tail_modulation", false);
      p.noise_floor = pj.value("noise_floor", 0.05);
      p.age_min = pj.value("age_min", 18.0);
      p.age_max = pj.value("age_max", 80.0);
      if (pj.contains("symptom_rates"))
        p.symptom_rates = pj.at("symptom_rates").get<std::map<std::string, double>>();
      p.validate();
      out.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::schema_error, std::string("profiles: bad JSON: ") + e.what());
  }
  return out;
}

AudioSignal gen_cough(const CoughClassProfile& profile, uint64_t seed,
                      CoughPhases* phases) {
  profile.validate();
  Rng rng(seed);

  // Per-item jitter: durations +/-15%, bands +/-20%, energy fractions +/-7%
  // (renormalized, staying within 10% of the profile).
  const double dj = rng.uniform(0.85, 1.15);
  const size_t n_burst = ms_to_samples(profile.burst.duration_ms * dj);
  const size_t n_gap = ms_to_samples(profile.catch_gap_ms);
  const size_t n_air = ms_to_samples(profile.airflow.duration_ms * rng.uniform(0.85, 1.15));
  const size_t n_close = ms_to_samples(profile.closure.duration_ms * rng.uniform(0.85, 1.15));

  double fractions[3] = {profile.burst.energy_fraction * rng.uniform(0.93, 1.07),
                         profile.airflow.energy_fraction * rng.uniform(0.93, 1.07),
                         profile.closure.energy_fraction * rng.uniform(0.93, 1.07)};
  const double frac_total = fractions[0] + fractions[1] + fractions[2];
  for (double& f : fractions) f /= frac_total;

  // Phase 1: initial burst, sharp attack and decay.
  std::vector<double> burst = shaped_noise(n_burst, jitter_band(profile.burst.band_low_hz, rng),
                                           jitter_band(profile.burst.band_high_hz, rng),
                                           profile.noise_floor, rng);
  const size_t attack = std::min<size_t>(ms_to_samples(5.0), n_burst);
  for (size_t t = 0; t < burst.size(); ++t) {
    double env = t < attack ? static_cast<double>(t) / attack
                            : std::exp(-3.0 * static_cast<double>(t - attack) / n_burst);
    burst[t] *= env;
  }

  // Phase 2: sustained noisy airflow with soft edges.
  std::vector<double> airflow = shaped_noise(n_air, jitter_band(profile.airflow.band_low_hz, rng),
                                             jitter_band(profile.airflow.band_high_hz, rng),
                                             profile.noise_floor, rng);
  const size_t ramp = std::min<size_t>(ms_to_samples(12.0), n_air / 2);
  for (size_t t = 0; t < airflow.size(); ++t) {
    double env = 1.0;
    if (t < ramp) env = static_cast<double>(t) / ramp;
    if (airflow.size() - t <= ramp) env = static_cast<double>(airflow.size() - t) / ramp;
    airflow[t] *= env;
  }

  // Phase 3: decaying tail; periodic component for the vocal-fold analog or
  // slow random modulation for the wet analog.
  std::vector<double> closure = shaped_noise(n_close, jitter_band(profile.closure.band_low_hz, rng),
                                             jitter_band(profile.closure.band_high_hz, rng),
                                             profile.noise_floor, rng);
  const double tail_hz = profile.tail_frequency_hz * rng.uniform(0.85, 1.15);
  std::vector<double> mod;
  if (profile.random_tail_modulation) {
    mod.resize(n_close);
    double state = rng.uniform(0.3, 1.0);
    const size_t hop = ms_to_samples(10.0);
    for (size_t t = 0; t < n_close; ++t) {
      if (hop > 0 && t % hop == 0) state = rng.uniform(0.25, 1.0);
      mod[t] = state;
    }
  }
  for (size_t t = 0; t < closure.size(); ++t) {
    double env = std::exp(-3.5 * static_cast<double>(t) / n_close);
    double v = closure[t];
    if (profile.periodic_tail)
      v = 0.45 * v + 0.85 * std::sin(2.0 * kPi * tail_hz * static_cast<double>(t) / kRate);
    if (profile.random_tail_modulation) v *= mod[t];
    closure[t] = v * env;
  }

  scale_to_energy(burst, fractions[0]);
  scale_to_energy(airflow, fractions[1]);
  scale_to_energy(closure, fractions[2]);

  AudioSignal out;
  out.sample_rate = kRate;
  const size_t pad = ms_to_samples(30.0);
  out.samples.reserve(pad * 2 + n_burst + n_gap + n_air + n_close);
  out.samples.insert(out.samples.end(), pad, 0.0);
  out.samples.insert(out.samples.end(), burst.begin(), burst.end());
  out.samples.insert(out.samples.end(), n_gap, 0.0);
  out.samples.insert(out.samples.end(), airflow.begin(), airflow.end());
  out.samples.insert(out.samples.end(), closure.begin(), closure.end());
  out.samples.insert(out.samples.end(), pad, 0.0);
  if (phases) {
    phases->burst_begin = pad;
    phases->burst_end = pad + n_burst;
    phases->airflow_begin = phases->burst_end + n_gap;
    phases->airflow_end = phases->airflow_begin + n_air;
    phases->closure_begin = phases->airflow_end;
    phases->closure_end = phases->closure_begin + n_close;
  }

  double peak = 0.0;
  for (double v : out.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    const double k = 0.5 / peak;
    for (double& v : out.samples) v *= k;
  }
  return out;
}

SymptomRecord gen_symptoms(const CoughClassProfile& profile, uint64_t seed) {
  profile.validate();
  Rng rng(seed);
  SymptomRecord r;
  r.age = std::floor(rng.uniform(profile.age_min, profile.age_max + 1.0));
  r.age = std::clamp(r.age, 0.0, 120.0);
  r.gender = static_cast<Gender>(rng.uniform_int(kGenderLevels));
  const auto& flags = flag_field_names();
  for (size_t f = 0; f < flags.size(); ++f) {
    auto it = profile.symptom_rates.find(flags[f]);
    const double rate = it == profile.symptom_rates.end() ? 0.05 : it->second;
    r.set_flag(static_cast<int>(f), rng.bernoulli(rate) ? 1 : 0);
  }
  return r;
}

std::vector<ManifestItem> gen_dataset(const std::string& out_dir, int n_per_class,
                                      const std::vector<CoughClassProfile>& profiles,
                                      uint64_t seed, int workers) {
  if (n_per_class < 1) fail(Errc::invalid_argument, "gen_dataset: n_per_class must be >= 1");
  if (profiles.empty()) fail(Errc::invalid_argument, "gen_dataset: no profiles");
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "wavs", ec);
  if (ec) fail(Errc::io_error, "gen_dataset: cannot create output directory " + out_dir);

  const size_t total = profiles.size() * static_cast<size_t>(n_per_class);
  std::vector<ManifestItem> items(total);

  auto generate_item = [&](size_t index) {
    const size_t cls = index / n_per_class;
    const int i = static_cast<int>(index % n_per_class);
    Rng streams = Rng::stream(seed, (static_cast<uint64_t>(cls) << 32) | static_cast<uint64_t>(i));
    const uint64_t audio_seed = streams.next_u64();
    const uint64_t symptom_seed = streams.next_u64();

    char name[64];
    std::snprintf(name, sizeof(name), "wavs/%s_%04d.wav", profiles[cls].label.c_str(), i);
    AudioSignal cough = gen_cough(profiles[cls], audio_seed);
    save_wav_pcm16((fs::path(out_dir) / name).string(), cough);

    items[index].wav_path = name;
    items[index].label = profiles[cls].label;
    items[index].symptoms = gen_symptoms(profiles[cls], symptom_seed);
  };

  if (workers <= 1) {
    for (size_t index = 0; index < total; ++index) generate_item(index);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (size_t index = next.fetch_add(1); index < total; index = next.fetch_add(1))
          generate_item(index);
      });
    for (auto& t : pool) t.join();
  }

  write_manifest_csv((fs::path(out_dir) / "manifest.csv").string(), items);
  std::vector<SymptomRecord> symptoms;
  for (const auto& item : items) symptoms.push_back(item.symptoms);
  write_symptoms_csv((fs::path(out_dir) / "symptoms.csv").string(), symptoms);
  return items;
}

}  // namespace coughkit
