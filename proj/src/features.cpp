#include "coughkit/features.hpp"

#include <algorithm>
#include <cmath>

#include "coughkit/csv.hpp"
#include "coughkit/errors.hpp"

namespace coughkit {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kEnergyFloor = 1e-10;

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

bool is_power_of_two(size_t n) { return n && (n & (n - 1)) == 0; }

void fft_radix2(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(angle), std::sin(angle));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

struct Moments {
  double mean, sd, m3, m4;  // population moments

  // Constant frames leave only rounding residue in the variance.
  bool degenerate() const { return sd <= 1e-12 * std::max(1.0, std::abs(mean)); }
};

Moments central_moments(std::span<const double> frame) {
  const size_t n = frame.size();
  double mean = 0.0;
  for (double v : frame) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : frame) {
    double d = v - mean;
    double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  return {mean, std::sqrt(m2), m3, m4};
}

}  // namespace

const std::array<std::string, 22>& frame_feature_names() {
  static const std::array<std::string, 22> names = {
      "mfcc_1",    "mfcc_2",  "mfcc_3",     "mfcc_4",   "mfcc_5",   "mfcc_6",
      "mfcc_7",    "mfcc_8",  "mfcc_9",     "mfcc_10",  "mfcc_11",  "mfcc_12",
      "formant_1", "formant_2", "formant_3", "formant_4",
      "zcr",       "kurtosis", "log_energy", "skewness", "entropy",  "f0"};
  return names;
}

const std::array<std::string, 44>& segment_feature_names() {
  static const std::array<std::string, 44> names = [] {
    std::array<std::string, 44> out;
    const auto& base = frame_feature_names();
    for (int i = 0; i < 22; ++i) {
      out[i] = "mean_" + base[i];
      out[22 + i] = "std_" + base[i];
    }
    return out;
  }();
  return names;
}

MelFilterBank MelFilterBank::make(int num_filters, int frame_length, int sample_rate,
                                  double low_hz, double high_hz) {
  if (num_filters < 1) fail(Errc::invalid_argument, "mel bank: need at least one filter");
  if (high_hz <= low_hz || high_hz > sample_rate / 2.0 + 1e-9)
    fail(Errc::invalid_argument, "mel bank: bad frequency bounds");

  MelFilterBank bank;
  bank.num_filters = num_filters;
  bank.spectrum_bins = frame_length / 2 + 1;
  bank.low_hz = low_hz;
  bank.high_hz = high_hz;
  bank.weights = Tensor(num_filters, bank.spectrum_bins);

  const double mel_lo = hz_to_mel(low_hz);
  const double mel_hi = hz_to_mel(high_hz);
  std::vector<double> edges(num_filters + 2);
  for (int i = 0; i < num_filters + 2; ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (num_filters + 1));

  const double bin_hz = static_cast<double>(sample_rate) / frame_length;
  for (int m = 0; m < num_filters; ++m) {
    const double f_left = edges[m], f_center = edges[m + 1], f_right = edges[m + 2];
    double sum = 0.0;
    for (int k = 0; k < bank.spectrum_bins; ++k) {
      const double f = k * bin_hz;
      double w = 0.0;
      if (f > f_left && f < f_center)
        w = (f - f_left) / (f_center - f_left);
      else if (f >= f_center && f < f_right)
        w = (f_right - f) / (f_right - f_center);
      bank.weights.at(m, k) = w;
      sum += w;
    }
    if (sum <= 0.0)
      fail(Errc::invalid_argument,
           "mel bank: filter " + std::to_string(m) + " covers no spectrum bin; "
           "increase frame_length or reduce num_filters");
  }
  return bank;
}

std::vector<std::complex<double>> dft(std::span<const double> x) {
  const size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  if (is_power_of_two(n)) {
    for (size_t i = 0; i < n; ++i) out[i] = {x[i], 0.0};
    fft_radix2(out);
    return out;
  }
  for (size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (size_t t = 0; t < n; ++t) {
      double angle = -2.0 * kPi * static_cast<double>(k) * static_cast<double>(t) / n;
      acc += x[t] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    out[k] = acc;
  }
  return out;
}

std::vector<double> dft_magnitude(std::span<const double> frame) {
  if (frame.empty()) fail(Errc::invalid_argument, "dft_magnitude: empty frame");
  auto spectrum = dft(frame);
  std::vector<double> mag(frame.size() / 2 + 1);
  for (size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(spectrum[k]);
  return mag;
}

std::vector<double> mfcc(const std::vector<double>& spectrum, const MelFilterBank& bank,
                         int order) {
  if (static_cast<int>(spectrum.size()) != bank.spectrum_bins)
    fail(Errc::shape_mismatch, "mfcc: spectrum size does not match filter bank");
  const int m_filters = bank.num_filters;

  std::vector<double> log_energies(m_filters);
  for (int m = 0; m < m_filters; ++m) {
    double e = 0.0;
    for (int k = 0; k < bank.spectrum_bins; ++k) e += bank.weights.at(m, k) * spectrum[k];
    log_energies[m] = std::log(std::max(e, kEnergyFloor));
  }

  std::vector<double> coeffs(order);
  const double scale = std::sqrt(2.0 / m_filters);
  for (int i = 1; i <= order; ++i) {
    double acc = 0.0;
    for (int m = 1; m <= m_filters; ++m)
      acc += log_energies[m - 1] * std::cos(kPi * i * (m - 0.5) / m_filters);
    coeffs[i - 1] = scale * acc;
  }
  return coeffs;
}

double log_energy(std::span<const double> frame) {
  if (frame.empty()) fail(Errc::invalid_argument, "log_energy: empty frame");
  double acc = 0.0;
  for (double v : frame) acc += v * v;
  return 10.0 * std::log10(kEnergyFloor + acc / frame.size());
}

double zcr(std::span<const double> frame) {
  if (frame.size() < 2) fail(Errc::invalid_argument, "zcr: frame too short");
  size_t crossings = 0;
  for (size_t t = 1; t < frame.size(); ++t)
    if (frame[t] * frame[t - 1] < 0.0) ++crossings;
  return static_cast<double>(crossings) / (frame.size() - 1);
}

double skewness(std::span<const double> frame) {
  if (frame.empty()) fail(Errc::invalid_argument, "skewness: empty frame");
  Moments m = central_moments(frame);
  if (m.degenerate()) fail(Errc::degenerate_input, "skewness: constant frame (sigma = 0)");
  return m.m3 / (m.sd * m.sd * m.sd);
}

double entropy(std::span<const double> frame) {
  if (frame.size() < 2) fail(Errc::invalid_argument, "entropy: frame too short");
  double acc = 0.0;
  for (size_t t = 1; t < frame.size(); ++t) {
    double e = frame[t] * frame[t];
    if (e > 0.0) acc += e * std::log(e);
  }
  return -acc;
}

LpcResult levinson_durbin(const std::vector<double>& autocorr, int order) {
  if (static_cast<int>(autocorr.size()) < order + 1)
    fail(Errc::invalid_argument, "levinson_durbin: need order+1 autocorrelations");
  if (autocorr[0] <= 0.0)
    fail(Errc::degenerate_input, "levinson_durbin: zero-energy frame (r[0] <= 0)");

  std::vector<double> a(order + 1, 0.0);  // a[0] = 1 implied
  double err = autocorr[0];
  for (int i = 1; i <= order; ++i) {
    double acc = autocorr[i];
    for (int j = 1; j < i; ++j) acc += a[j] * autocorr[i - j];
    double k = -acc / err;
    std::vector<double> prev(a.begin(), a.begin() + i);
    for (int j = 1; j < i; ++j) a[j] = prev[j] + k * prev[i - j];
    a[i] = k;
    err *= (1.0 - k * k);
    if (err <= 0.0) {
      err = 0.0;
      break;
    }
  }
  LpcResult result;
  result.coeffs.assign(a.begin() + 1, a.end());
  result.error = err;
  return result;
}

std::array<double, 4> formants(std::span<const double> frame, int sample_rate, int lpc_order) {
  if (frame.size() <= static_cast<size_t>(lpc_order))
    fail(Errc::invalid_argument, "formants: frame shorter than LPC order");

  std::vector<double> r(lpc_order + 1, 0.0);
  for (int lag = 0; lag <= lpc_order; ++lag) {
    double acc = 0.0;
    for (size_t t = lag; t < frame.size(); ++t) acc += frame[t] * frame[t - lag];
    r[lag] = acc;
  }
  LpcResult lpc = levinson_durbin(r, lpc_order);

  // LPC envelope on a 512-point grid over [0, Fs/2); peaks of 1/|A| are
  // found as interior local maxima.
  constexpr int kGrid = 512;
  std::vector<double> envelope(kGrid);
  for (int g = 0; g < kGrid; ++g) {
    const double omega = kPi * g / kGrid;
    std::complex<double> a(1.0, 0.0);
    for (int j = 1; j <= lpc_order; ++j)
      a += lpc.coeffs[j - 1] * std::complex<double>(std::cos(omega * j), -std::sin(omega * j));
    envelope[g] = 1.0 / std::max(std::abs(a), 1e-12);
  }

  std::array<double, 4> peaks{};
  int found = 0;
  const double bin_hz = (sample_rate / 2.0) / kGrid;
  for (int g = 1; g + 1 < kGrid && found < 4; ++g) {
    if (envelope[g] > envelope[g - 1] && envelope[g] >= envelope[g + 1])
      peaks[found++] = g * bin_hz;
  }
  return peaks;
}

double kurtosis(std::span<const double> frame) {
  if (frame.empty()) fail(Errc::invalid_argument, "kurtosis: empty frame");
  Moments m = central_moments(frame);
  if (m.degenerate()) fail(Errc::degenerate_input, "kurtosis: constant frame (sigma = 0)");
  double var = m.sd * m.sd;
  return m.m4 / (var * var);
}

double f0(std::span<const double> frame, int sample_rate) {
  constexpr double kClipFraction = 0.3;
  constexpr double kVoicingThreshold = 0.3;
  constexpr double kMinHz = 50.0, kMaxHz = 500.0;

  const size_t n = frame.size();
  double peak = 0.0;
  for (double v : frame) peak = std::max(peak, std::abs(v));
  if (peak <= 0.0) return 0.0;

  const double clip = kClipFraction * peak;
  std::vector<double> clipped(n);
  for (size_t t = 0; t < n; ++t) {
    if (frame[t] > clip)
      clipped[t] = frame[t] - clip;
    else if (frame[t] < -clip)
      clipped[t] = frame[t] + clip;
    else
      clipped[t] = 0.0;
  }

  const size_t min_lag = static_cast<size_t>(sample_rate / kMaxHz);
  size_t max_lag = static_cast<size_t>(sample_rate / kMinHz);
  max_lag = std::min(max_lag, n / 2);  // need at least two periods in the frame
  if (min_lag == 0 || min_lag >= max_lag) return 0.0;

  double r0 = 0.0;
  for (double v : clipped) r0 += v * v;
  if (r0 <= 0.0) return 0.0;

  auto autocorr = [&](size_t lag) {
    double acc = 0.0;
    for (size_t t = lag; t < n; ++t) acc += clipped[t] * clipped[t - lag];
    return acc;
  };

  size_t best_lag = 0;
  double best = -1.0;
  std::vector<double> r(max_lag + 2, 0.0);
  for (size_t lag = min_lag; lag <= max_lag; ++lag) {
    r[lag] = autocorr(lag);
    if (r[lag] > best) {
      best = r[lag];
      best_lag = lag;
    }
  }
  if (best / r0 < kVoicingThreshold) return 0.0;

  // Parabolic refinement around the integer-lag peak.
  double lag = static_cast<double>(best_lag);
  if (best_lag > min_lag && best_lag < max_lag) {
    double rm = r[best_lag - 1], rc = r[best_lag], rp = r[best_lag + 1];
    if (best_lag + 1 > max_lag) rp = autocorr(best_lag + 1);
    double denom = rm - 2.0 * rc + rp;
    if (std::abs(denom) > 1e-12) {
      double delta = 0.5 * (rm - rp) / denom;
      if (std::abs(delta) < 1.0) lag += delta;
    }
  }
  return sample_rate / lag;
}

FrameFeatures frame_features(std::span<const double> frame, const MelFilterBank& bank,
                             int sample_rate) {
  FrameFeatures out;
  auto spectrum = dft_magnitude(frame);
  auto cepstrum = mfcc(spectrum, bank, 12);
  for (int i = 0; i < 12; ++i) out.values[i] = cepstrum[i];
  auto fmts = formants(frame, sample_rate);
  for (int i = 0; i < 4; ++i) out.values[12 + i] = fmts[i];
  out.values[16] = zcr(frame);
  out.values[17] = kurtosis(frame);
  out.values[18] = log_energy(frame);
  out.values[19] = skewness(frame);
  out.values[20] = entropy(frame);
  out.values[21] = f0(frame, sample_rate);
  return out;
}

std::vector<SegmentFeatureVector> aggregate(const std::vector<FrameFeatures>& features,
                                            size_t chunk_size) {
  if (features.empty()) fail(Errc::invalid_argument, "aggregate: empty feature list");
  if (chunk_size == 0) chunk_size = features.size();

  std::vector<SegmentFeatureVector> out;
  for (size_t start = 0; start < features.size(); start += chunk_size) {
    const size_t end = std::min(features.size(), start + chunk_size);
    const double count = static_cast<double>(end - start);
    SegmentFeatureVector vec;
    for (int j = 0; j < 22; ++j) {
      double mean = 0.0;
      for (size_t i = start; i < end; ++i) mean += features[i].values[j];
      mean /= count;
      double var = 0.0;
      for (size_t i = start; i < end; ++i) {
        double d = features[i].values[j] - mean;
        var += d * d;
      }
      var /= count;
      vec.values[j] = mean;
      vec.values[22 + j] = std::sqrt(var);
    }
    out.push_back(vec);
  }
  return out;
}

void write_features_csv(const std::string& path, const std::vector<FeatureRow>& rows) {
  CsvTable table;
  table.header = {"segment_id", "label"};
  for (const auto& name : segment_feature_names()) table.header.push_back(name);
  for (const auto& row : rows) {
    std::vector<std::string> fields = {row.segment_id, row.label};
    for (double v : row.values) fields.push_back(format_double(v));
    table.rows.push_back(std::move(fields));
  }
  write_csv(path, table);
}

std::vector<FeatureRow> read_features_csv(const std::string& path) {
  CsvTable table = read_csv(path);
  const auto& names = segment_feature_names();
  if (table.header.size() != 2 + names.size() || table.header[0] != "segment_id" ||
      table.header[1] != "label")
    fail(Errc::schema_error, "feature CSV header must be segment_id,label,<44 feature names>");
  for (size_t i = 0; i < names.size(); ++i)
    if (table.header[2 + i] != names[i])
      fail(Errc::schema_error, "feature CSV column order mismatch at '" + table.header[2 + i] + "'");

  std::vector<FeatureRow> rows;
  for (const auto& fields : table.rows) {
    FeatureRow row;
    row.segment_id = fields[0];
    row.label = fields[1];
    for (size_t i = 0; i < 44; ++i) {
      try {
        row.values[i] = std::stod(fields[2 + i]);
      } catch (const std::exception&) {
        fail(Errc::schema_error, "bad numeric value in feature CSV: '" + fields[2 + i] + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace coughkit
