#pragma once

#include <string>
#include <vector>

#include "coughkit/tensor.hpp"

namespace coughkit {

/// Sampled waveform. Samples are nominally in [-1, 1] when loaded from disk;
/// intermediate processing stages may exceed that range.
struct AudioSignal {
  std::vector<double> samples;
  int sample_rate = 0;
};

/// One detected cough, carved out of a preprocessed recording.
struct CoughSegment {
  std::vector<double> samples;
  size_t start_offset = 0;  // sample index into the source signal
  int sample_rate = 0;
};

/// Non-overlapping Hamming-windowed frames of one segment, one frame per row.
/// The trailing partial frame is dropped.
struct FrameMatrix {
  Tensor frames;  // num_frames x frame_length
  int frame_length = 0;
  bool windowed = false;
};

struct PreprocessConfig {
  int target_rate = 16000;          // Hz
  double target_dbfs = -28.0;       // RMS level after normalization
  double hpf_cutoff = 100.0;        // Hz
  double silence_threshold = -40.0; // dBFS, 10 ms RMS windows
  double min_silence = 200.0;       // ms; shorter gaps do not split segments
  double min_segment = 100.0;       // ms; shorter segments are discarded
  int frame_length = 1024;          // samples

  /// Throws on violated invariants (target_rate > 2*hpf_cutoff, frame_length >= 64).
  void validate() const;
};

/// Reads a PCM WAV file (8/16/24-bit integer or 32-bit float, any channel
/// count). Multichannel audio is averaged to mono; samples are scaled to
/// [-1, 1]. Distinct errors: file_not_found, malformed_wav,
/// unsupported_wav_encoding.
AudioSignal load_wav(const std::string& path);

/// Writes mono 16-bit PCM. Samples are clamped to [-1, 1] before quantizing.
void save_wav_pcm16(const std::string& path, const AudioSignal& signal);

/// Windowed-sinc resampling. Identity (bit-exact copy) when rates match.
AudioSignal resample(const AudioSignal& signal, int target_rate);

/// Pure gain so that 20*log10(RMS) equals target_dbfs (full-scale RMS 1.0 is
/// 0 dBFS). Errors on an all-zero signal.
AudioSignal normalize_dbfs(const AudioSignal& signal, double target_dbfs);

/// Second-order Butterworth high-pass biquad. Output length equals input length.
AudioSignal highpass(const AudioSignal& signal, double cutoff_hz);

/// Splits a preprocessed signal into cough segments: maximal runs whose 10 ms
/// RMS level exceeds silence_threshold, merged across gaps shorter than
/// min_silence, with segments below min_segment discarded. Sorted by
/// start_offset, non-overlapping. An empty list is valid output.
std::vector<CoughSegment> segment_coughs(const AudioSignal& signal, const PreprocessConfig& cfg);

/// Cuts a segment into floor(len/frame_length) non-overlapping frames and
/// applies the Hamming window to each. Errors when the segment is shorter
/// than one frame.
FrameMatrix frame_segment(const CoughSegment& segment, int frame_length);

std::vector<double> hamming_window(int length);

/// RMS level in dBFS; returns -infinity for an all-zero span.
double rms_dbfs(const double* samples, size_t count);

/// resample -> normalize_dbfs -> highpass, in that order.
AudioSignal preprocess(const AudioSignal& signal, const PreprocessConfig& cfg);

}  // namespace coughkit
