#pragma once

#include <array>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "coughkit/tensor.hpp"

namespace coughkit {

/// Names of the 22 per-frame features, in output order.
const std::array<std::string, 22>& frame_feature_names();

/// "mean_<name>" x22 followed by "std_<name>" x22.
const std::array<std::string, 44>& segment_feature_names();

/// The 22 hand-crafted per-frame features.
struct FrameFeatures {
  std::array<double, 22> values{};  // order per frame_feature_names()

  double mfcc(int i) const { return values[i]; }        // i in [0, 12)
  double formant(int i) const { return values[12 + i]; }  // i in [0, 4)
  double zcr() const { return values[16]; }
  double kurtosis() const { return values[17]; }
  double log_energy() const { return values[18]; }
  double skewness() const { return values[19]; }
  double entropy() const { return values[20]; }
  double f0() const { return values[21]; }
};

/// Per-chunk mean and population standard deviation of each frame feature.
struct SegmentFeatureVector {
  std::array<double, 44> values{};  // 22 means then 22 stds
};

/// Triangular filters equally spaced on the mel scale
/// (mel = 2595*log10(1 + f/700)).
struct MelFilterBank {
  int num_filters = 0;
  int spectrum_bins = 0;  // frame_length/2 + 1
  double low_hz = 0.0;
  double high_hz = 0.0;
  Tensor weights;  // num_filters x spectrum_bins, nonnegative

  static MelFilterBank make(int num_filters, int frame_length, int sample_rate,
                            double low_hz, double high_hz);
};

/// Full complex DFT (no scaling); radix-2 when the length is a power of two,
/// direct summation otherwise.
std::vector<std::complex<double>> dft(std::span<const double> x);

/// Magnitudes |Y(k)| for k = 0..N/2 of an already-windowed frame.
std::vector<double> dft_magnitude(std::span<const double> frame);

/// Cepstral coefficients c(1)..c(order) from the log mel filter-bank
/// energies of a magnitude spectrum. Energies are floored at 1e-10 before
/// the log.
std::vector<double> mfcc(const std::vector<double>& spectrum, const MelFilterBank& bank,
                         int order = 12);

/// 10*log10(1e-10 + mean square), in dB.
double log_energy(std::span<const double> frame);

/// Fraction of adjacent sample pairs with opposite sign, in [0, 1].
double zcr(std::span<const double> frame);

/// Third standardized population moment. Errors on a constant frame.
double skewness(std::span<const double> frame);

/// -sum over t = 1..N-1 of y(t)^2 * ln(y(t)^2), with 0*ln(0) = 0.
double entropy(std::span<const double> frame);

/// Frequencies (Hz, ascending) of the first four peaks of the LPC magnitude
/// spectrum, fitted by Levinson-Durbin on the frame autocorrelation.
/// Padded with 0 when fewer than four peaks exist. Errors on a zero-energy
/// frame.
std::array<double, 4> formants(std::span<const double> frame, int sample_rate,
                               int lpc_order = 14);

/// Fourth standardized population moment (no excess subtraction). Errors on
/// a constant frame.
double kurtosis(std::span<const double> frame);

/// Fundamental frequency by center-clipped autocorrelation, searched in
/// [50, 500] Hz. Returns 0 when the normalized peak falls below the voicing
/// threshold (unvoiced).
double f0(std::span<const double> frame, int sample_rate);

/// Assembles all 22 features; propagates constituent errors (degenerate
/// frames yield an error, not partial output).
FrameFeatures frame_features(std::span<const double> frame, const MelFilterBank& bank,
                             int sample_rate);

/// Groups frames into consecutive chunks of chunk_size (0 means one chunk of
/// all frames) and emits mean then population std of each feature per chunk.
std::vector<SegmentFeatureVector> aggregate(const std::vector<FrameFeatures>& features,
                                            size_t chunk_size = 0);

/// Levinson-Durbin recursion on autocorrelations r[0..order]; returns the
/// predictor coefficients a[1..order] (A(z) = 1 + sum a_j z^-j) and the final
/// prediction error.
struct LpcResult {
  std::vector<double> coeffs;
  double error = 0.0;
};
LpcResult levinson_durbin(const std::vector<double>& autocorr, int order);

/// One row of the feature CSV (segment_id,label,<44 feature columns>).
struct FeatureRow {
  std::string segment_id;
  std::string label;
  std::array<double, 44> values{};
};

void write_features_csv(const std::string& path, const std::vector<FeatureRow>& rows);
std::vector<FeatureRow> read_features_csv(const std::string& path);

}  // namespace coughkit
