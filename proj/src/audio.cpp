#include "coughkit/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>

#include "coughkit/errors.hpp"

namespace coughkit {

namespace {

constexpr double kPi = 3.14159265358979323846;

uint32_t read_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

void PreprocessConfig::validate() const {
  if (target_rate <= 0) fail(Errc::invalid_argument, "target_rate must be positive");
  if (!(target_rate > 2.0 * hpf_cutoff))
    fail(Errc::invalid_argument, "target_rate must exceed twice the HPF cutoff");
  if (frame_length < 64) fail(Errc::invalid_argument, "frame_length must be >= 64");
  if (min_silence < 0 || min_segment < 0)
    fail(Errc::invalid_argument, "silence/segment durations must be nonnegative");
}

AudioSignal load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::file_not_found, "no such file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    fail(Errc::malformed_wav, "not a RIFF/WAVE file: " + path);

  bool have_fmt = false;
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  size_t data_off = 0, data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const uint8_t* hdr = bytes.data() + pos;
    uint32_t chunk_len = read_u32(hdr + 4);
    size_t body = pos + 8;
    if (body + chunk_len > bytes.size())
      fail(Errc::malformed_wav, "truncated chunk in " + path);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) fail(Errc::malformed_wav, "fmt chunk too short in " + path);
      const uint8_t* f = bytes.data() + body;
      format = read_u16(f);
      channels = read_u16(f + 2);
      rate = read_u32(f + 4);
      bits = read_u16(f + 14);
      if (format == 0xFFFE) {  // WAVE_FORMAT_EXTENSIBLE: actual format in SubFormat
        if (chunk_len < 26) fail(Errc::malformed_wav, "extensible fmt chunk too short in " + path);
        format = read_u16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_off = body;
      data_len = chunk_len;
      break;  // fmt is required to precede data in practice; stop at first data chunk
    }
    pos = body + chunk_len + (chunk_len & 1);
  }

  if (!have_fmt || data_off == 0) fail(Errc::malformed_wav, "missing fmt or data chunk in " + path);
  if (channels == 0 || rate == 0) fail(Errc::malformed_wav, "invalid fmt fields in " + path);

  const bool pcm_int = format == 1 && (bits == 8 || bits == 16 || bits == 24);
  const bool ieee_f32 = format == 3 && bits == 32;
  if (!pcm_int && !ieee_f32)
    fail(Errc::unsupported_wav_encoding,
         "unsupported WAV encoding (format " + std::to_string(format) + ", " +
             std::to_string(bits) + "-bit) in " + path);

  const size_t bytes_per_sample = bits / 8;
  const size_t frame_bytes = bytes_per_sample * channels;
  const size_t num_frames = frame_bytes ? data_len / frame_bytes : 0;

  AudioSignal out;
  out.sample_rate = static_cast<int>(rate);
  out.samples.resize(num_frames);

  const uint8_t* d = bytes.data() + data_off;
  for (size_t i = 0; i < num_frames; ++i) {
    double acc = 0.0;
    for (uint16_t c = 0; c < channels; ++c) {
      const uint8_t* s = d + i * frame_bytes + c * bytes_per_sample;
      double v = 0.0;
      switch (bits) {
        case 8:
          v = (static_cast<int>(s[0]) - 128) / 128.0;
          break;
        case 16: {
          int16_t x = static_cast<int16_t>(s[0] | (s[1] << 8));
          v = x / 32768.0;
          break;
        }
        case 24: {
          int32_t x = s[0] | (s[1] << 8) | (s[2] << 16);
          if (x & 0x800000) x |= ~0xFFFFFF;
          v = x / 8388608.0;
          break;
        }
        case 32: {
          float x;
          std::memcpy(&x, s, 4);
          v = x;
          break;
        }
      }
      acc += v;
    }
    double sample = acc / channels;
    if (!std::isfinite(sample)) fail(Errc::malformed_wav, "non-finite sample in " + path);
    out.samples[i] = sample;
  }
  return out;
}

void save_wav_pcm16(const std::string& path, const AudioSignal& signal) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io_error, "cannot write WAV: " + path);

  const uint32_t n = static_cast<uint32_t>(signal.samples.size());
  const uint32_t data_len = n * 2;
  const uint32_t rate = static_cast<uint32_t>(signal.sample_rate);
  const uint32_t byte_rate = rate * 2;

  auto put_u32 = [&](uint32_t v) {
    char b[4] = {char(v & 0xFF), char((v >> 8) & 0xFF), char((v >> 16) & 0xFF), char((v >> 24) & 0xFF)};
    out.write(b, 4);
  };
  auto put_u16 = [&](uint16_t v) {
    char b[2] = {char(v & 0xFF), char((v >> 8) & 0xFF)};
    out.write(b, 2);
  };

  out.write("RIFF", 4);
  put_u32(36 + data_len);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(1);  // mono
  put_u32(rate);
  put_u32(byte_rate);
  put_u16(2);   // block align
  put_u16(16);  // bits
  out.write("data", 4);
  put_u32(data_len);
  for (double s : signal.samples) {
    long q = std::lround(std::clamp(s, -1.0, 1.0) * 32768.0);
    q = std::clamp(q, -32768L, 32767L);
    put_u16(static_cast<uint16_t>(static_cast<int16_t>(q)));
  }
  if (!out) fail(Errc::io_error, "write failed: " + path);
}

AudioSignal resample(const AudioSignal& signal, int target_rate) {
  if (target_rate <= 0) fail(Errc::invalid_argument, "resample: target rate must be positive");
  if (signal.samples.empty()) fail(Errc::invalid_argument, "resample: empty signal");
  if (signal.sample_rate <= 0) fail(Errc::invalid_argument, "resample: invalid source rate");
  if (target_rate == signal.sample_rate) return signal;

  const double ratio = static_cast<double>(target_rate) / signal.sample_rate;
  const double fc = std::min(1.0, ratio);  // relative to source Nyquist
  const int zero_crossings = 32;
  const double half_width = zero_crossings / fc;

  auto kernel = [&](double u) {
    if (std::abs(u) >= half_width) return 0.0;
    double x = kPi * fc * u;
    double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(x) / x;
    double w = u / half_width;  // Blackman window over [-1, 1]
    double window = 0.42 + 0.5 * std::cos(kPi * w) + 0.08 * std::cos(2.0 * kPi * w);
    return fc * sinc * window;
  };

  const size_t in_len = signal.samples.size();
  const size_t out_len = static_cast<size_t>(std::llround(in_len * ratio));
  AudioSignal out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);

  for (size_t n = 0; n < out_len; ++n) {
    const double t = n / ratio;  // source-time position
    const long m0 = std::max<long>(0, static_cast<long>(std::ceil(t - half_width)));
    const long m1 = std::min<long>(static_cast<long>(in_len) - 1, static_cast<long>(std::floor(t + half_width)));
    double acc = 0.0;
    for (long m = m0; m <= m1; ++m) acc += signal.samples[m] * kernel(t - m);
    out.samples[n] = acc;
  }
  return out;
}

double rms_dbfs(const double* samples, size_t count) {
  if (count == 0) return -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (size_t i = 0; i < count; ++i) acc += samples[i] * samples[i];
  double rms = std::sqrt(acc / count);
  if (rms <= 0.0) return -std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(rms);
}

AudioSignal normalize_dbfs(const AudioSignal& signal, double target_dbfs) {
  double level = rms_dbfs(signal.samples.data(), signal.samples.size());
  if (!std::isfinite(level))
    fail(Errc::degenerate_input, "normalize_dbfs: all-zero signal has undefined gain");
  double gain = std::pow(10.0, (target_dbfs - level) / 20.0);
  AudioSignal out;
  out.sample_rate = signal.sample_rate;
  out.samples.resize(signal.samples.size());
  for (size_t i = 0; i < signal.samples.size(); ++i) out.samples[i] = signal.samples[i] * gain;
  return out;
}

AudioSignal highpass(const AudioSignal& signal, double cutoff_hz) {
  if (!(cutoff_hz > 0.0) || cutoff_hz >= signal.sample_rate / 2.0)
    fail(Errc::invalid_argument, "highpass: cutoff out of range");

  // RBJ cookbook high-pass, Q = 1/sqrt(2) (Butterworth).
  const double w0 = 2.0 * kPi * cutoff_hz / signal.sample_rate;
  const double cw = std::cos(w0);
  const double alpha = std::sin(w0) / std::sqrt(2.0);
  const double a0 = 1.0 + alpha;
  const double b0 = (1.0 + cw) / 2.0 / a0;
  const double b1 = -(1.0 + cw) / a0;
  const double b2 = (1.0 + cw) / 2.0 / a0;
  const double a1 = -2.0 * cw / a0;
  const double a2 = (1.0 - alpha) / a0;

  AudioSignal out;
  out.sample_rate = signal.sample_rate;
  out.samples.resize(signal.samples.size());
  double z1 = 0.0, z2 = 0.0;  // direct form II transposed
  for (size_t i = 0; i < signal.samples.size(); ++i) {
    double x = signal.samples[i];
    double y = b0 * x + z1;
    z1 = b1 * x - a1 * y + z2;
    z2 = b2 * x - a2 * y;
    out.samples[i] = y;
  }
  return out;
}

std::vector<CoughSegment> segment_coughs(const AudioSignal& signal, const PreprocessConfig& cfg) {
  cfg.validate();
  const size_t win = std::max<size_t>(1, static_cast<size_t>(signal.sample_rate / 100));  // 10 ms
  const size_t n = signal.samples.size();
  const size_t num_windows = (n + win - 1) / win;

  std::vector<bool> active(num_windows, false);
  for (size_t w = 0; w < num_windows; ++w) {
    size_t start = w * win;
    size_t count = std::min(win, n - start);
    active[w] = rms_dbfs(signal.samples.data() + start, count) > cfg.silence_threshold;
  }

  // Runs of active windows; gaps shorter than min_silence merge adjacent runs.
  struct Run {
    size_t first, last;  // inclusive window indices
  };
  std::vector<Run> runs;
  for (size_t w = 0; w < num_windows; ++w) {
    if (!active[w]) continue;
    size_t end = w;
    while (end + 1 < num_windows && active[end + 1]) ++end;
    runs.push_back({w, end});
    w = end;
  }

  const double window_ms = 1000.0 * win / signal.sample_rate;
  std::vector<Run> merged;
  for (const Run& r : runs) {
    if (!merged.empty()) {
      double gap_ms = (r.first - merged.back().last - 1) * window_ms;
      if (gap_ms < cfg.min_silence) {
        merged.back().last = r.last;
        continue;
      }
    }
    merged.push_back(r);
  }

  const size_t min_segment_samples =
      static_cast<size_t>(cfg.min_segment * signal.sample_rate / 1000.0);
  std::vector<CoughSegment> segments;
  for (const Run& r : merged) {
    size_t start = r.first * win;
    size_t end = std::min(n, (r.last + 1) * win);
    if (end - start < min_segment_samples) continue;
    CoughSegment seg;
    seg.start_offset = start;
    seg.sample_rate = signal.sample_rate;
    seg.samples.assign(signal.samples.begin() + start, signal.samples.begin() + end);
    segments.push_back(std::move(seg));
  }
  return segments;
}

std::vector<double> hamming_window(int length) {
  std::vector<double> w(length);
  if (length == 1) {
    w[0] = 1.0;
    return w;
  }
  for (int t = 0; t < length; ++t)
    w[t] = 0.54 - 0.46 * std::cos(2.0 * kPi * t / (length - 1));
  return w;
}

FrameMatrix frame_segment(const CoughSegment& segment, int frame_length) {
  if (frame_length < 1) fail(Errc::invalid_argument, "frame_segment: frame_length must be positive");
  if (segment.samples.size() < static_cast<size_t>(frame_length))
    fail(Errc::degenerate_input, "frame_segment: segment shorter than one frame");

  const int num_frames = static_cast<int>(segment.samples.size() / frame_length);
  const std::vector<double> window = hamming_window(frame_length);

  FrameMatrix fm;
  fm.frame_length = frame_length;
  fm.windowed = true;
  fm.frames = Tensor(num_frames, frame_length);
  for (int f = 0; f < num_frames; ++f)
    for (int t = 0; t < frame_length; ++t)
      fm.frames.at(f, t) = segment.samples[static_cast<size_t>(f) * frame_length + t] * window[t];
  return fm;
}

AudioSignal preprocess(const AudioSignal& signal, const PreprocessConfig& cfg) {
  cfg.validate();
  AudioSignal s = resample(signal, cfg.target_rate);
  s = normalize_dbfs(s, cfg.target_dbfs);
  s = highpass(s, cfg.hpf_cutoff);
  return s;
}

}  // namespace coughkit
