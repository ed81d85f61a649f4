#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "approx.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "coughkit/audio.hpp"
#include "coughkit/errors.hpp"
#include "coughkit/features.hpp"

using namespace coughkit;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

fs::path test_dir() {
  fs::path dir = fs::temp_directory_path() / "coughkit_audio_tests";
  fs::create_directories(dir);
  return dir;
}

void append_u32(std::vector<uint8_t>& b, uint32_t v) {
  b.push_back(v & 0xFF);
  b.push_back((v >> 8) & 0xFF);
  b.push_back((v >> 16) & 0xFF);
  b.push_back((v >> 24) & 0xFF);
}

void append_u16(std::vector<uint8_t>& b, uint16_t v) {
  b.push_back(v & 0xFF);
  b.push_back((v >> 8) & 0xFF);
}

// Builds a WAV byte stream with the given format tag / bit depth / channels.
std::vector<uint8_t> wav_bytes(uint16_t format, uint16_t bits, uint16_t channels,
                               uint32_t rate, const std::vector<uint8_t>& payload) {
  std::vector<uint8_t> b;
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  append_u32(b, 36 + static_cast<uint32_t>(payload.size()));
  b.insert(b.end(), {'W', 'A', 'V', 'E'});
  b.insert(b.end(), {'f', 'm', 't', ' '});
  append_u32(b, 16);
  append_u16(b, format);
  append_u16(b, channels);
  append_u32(b, rate);
  append_u32(b, rate * channels * bits / 8);
  append_u16(b, channels * bits / 8);
  append_u16(b, bits);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  append_u32(b, static_cast<uint32_t>(payload.size()));
  b.insert(b.end(), payload.begin(), payload.end());
  return b;
}

fs::path write_file(const std::string& name, const std::vector<uint8_t>& bytes) {
  fs::path p = test_dir() / name;
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  return p;
}

std::vector<double> sine(double freq, int rate, double seconds, double amp = 1.0) {
  std::vector<double> out(static_cast<size_t>(rate * seconds));
  for (size_t t = 0; t < out.size(); ++t) out[t] = amp * std::sin(2.0 * kPi * freq * t / rate);
  return out;
}

double rms(const std::vector<double>& x, size_t from = 0) {
  double acc = 0.0;
  for (size_t i = from; i < x.size(); ++i) acc += x[i] * x[i];
  return std::sqrt(acc / (x.size() - from));
}

}  // namespace

TEST_CASE("load_wav: 16-bit zeros") {
  std::vector<uint8_t> payload(200, 0);
  auto p = write_file("zeros16.wav", wav_bytes(1, 16, 1, 22050, payload));
  AudioSignal s = load_wav(p.string());
  CHECK(s.sample_rate == 22050);
  CHECK(s.samples.size() == 100);
  for (double v : s.samples) CHECK(v == 0.0);
}

TEST_CASE("load_wav: 16-bit full-scale scaling") {
  std::vector<uint8_t> payload;
  append_u16(payload, 32767);
  append_u16(payload, static_cast<uint16_t>(-32768));
  auto p = write_file("scale16.wav", wav_bytes(1, 16, 1, 16000, payload));
  AudioSignal s = load_wav(p.string());
  CHECK(s.samples[0] == doctest::Approx(32767.0 / 32768.0).epsilon(1e-12));
  CHECK(s.samples[1] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("load_wav: stereo averaged to mono") {
  std::vector<uint8_t> payload;
  for (int i = 0; i < 10; ++i) {
    append_u16(payload, static_cast<uint16_t>(16384));   // +0.5
    append_u16(payload, static_cast<uint16_t>(-16384));  // -0.5
  }
  auto p = write_file("stereo.wav", wav_bytes(1, 16, 2, 16000, payload));
  AudioSignal s = load_wav(p.string());
  CHECK(s.samples.size() == 10);
  for (double v : s.samples) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("load_wav: 8-bit and 24-bit and float32") {
  std::vector<uint8_t> p8 = {128, 255, 0};  // 0, ~+1, -1
  AudioSignal s8 = load_wav(write_file("u8.wav", wav_bytes(1, 8, 1, 8000, p8)).string());
  CHECK(s8.samples[0] == doctest::Approx(0.0));
  CHECK(s8.samples[1] == doctest::Approx(127.0 / 128.0));
  CHECK(s8.samples[2] == doctest::Approx(-1.0));

  std::vector<uint8_t> p24;
  p24.insert(p24.end(), {0x00, 0x00, 0x40});  // +0x400000 = half scale
  p24.insert(p24.end(), {0x00, 0x00, 0xC0});  // -0x400000
  AudioSignal s24 = load_wav(write_file("s24.wav", wav_bytes(1, 24, 1, 8000, p24)).string());
  CHECK(s24.samples[0] == doctest::Approx(0.5));
  CHECK(s24.samples[1] == doctest::Approx(-0.5));

  std::vector<uint8_t> pf;
  float vals[2] = {0.25f, -0.75f};
  pf.resize(8);
  std::memcpy(pf.data(), vals, 8);
  AudioSignal sf = load_wav(write_file("f32.wav", wav_bytes(3, 32, 1, 8000, pf)).string());
  CHECK(sf.samples[0] == doctest::Approx(0.25));
  CHECK(sf.samples[1] == doctest::Approx(-0.75));
}

TEST_CASE("load_wav: distinct error values") {
  try {
    load_wav((test_dir() / "does_not_exist.wav").string());
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::file_not_found);
  }

  auto bad = write_file("bad.wav", {'N', 'O', 'P', 'E', 0, 0, 0, 0});
  try {
    load_wav(bad.string());
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::malformed_wav);
  }

  // 32-bit integer PCM is not supported.
  std::vector<uint8_t> payload(8, 0);
  auto unsupported = write_file("i32.wav", wav_bytes(1, 32, 1, 8000, payload));
  try {
    load_wav(unsupported.string());
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unsupported_wav_encoding);
  }
}

TEST_CASE("save_wav_pcm16 round trip") {
  AudioSignal s;
  s.sample_rate = 16000;
  s.samples = sine(440.0, 16000, 0.05, 0.6);
  auto p = test_dir() / "roundtrip.wav";
  save_wav_pcm16(p.string(), s);
  AudioSignal back = load_wav(p.string());
  REQUIRE(back.samples.size() == s.samples.size());
  CHECK(back.sample_rate == 16000);
  for (size_t i = 0; i < s.samples.size(); ++i)
    CHECK(near_abs(back.samples[i], s.samples[i], 1.0 / 32768.0));
}

TEST_CASE("resample: identity when rates match") {
  AudioSignal s;
  s.sample_rate = 16000;
  s.samples = sine(440.0, 16000, 0.1);
  AudioSignal out = resample(s, 16000);
  CHECK(out.samples == s.samples);
}

TEST_CASE("resample: length arithmetic") {
  AudioSignal s;
  s.sample_rate = 48000;
  s.samples.assign(48000, 0.1);
  AudioSignal out = resample(s, 16000);
  CHECK(std::abs(static_cast<long>(out.samples.size()) - 16000) <= 1);
  CHECK(out.sample_rate == 16000);
}

TEST_CASE("resample: 440 Hz tone keeps its DFT peak") {
  AudioSignal s;
  s.sample_rate = 48000;
  s.samples = sine(440.0, 48000, 1.0, 0.8);
  AudioSignal out = resample(s, 16000);

  // DFT peak over a 8192-sample window; bin spacing 16000/8192 ~ 1.95 Hz.
  const size_t n = 8192;
  REQUIRE(out.samples.size() >= n);
  std::vector<double> window(out.samples.begin(), out.samples.begin() + n);
  auto spectrum = dft(window);
  size_t best = 1;
  for (size_t k = 1; k < n / 2; ++k)
    if (std::abs(spectrum[k]) > std::abs(spectrum[best])) best = k;
  const double bin_hz = 16000.0 / n;
  CHECK(std::abs(best * bin_hz - 440.0) <= bin_hz + 1e-9);
}

TEST_CASE("resample: rejects bad target rate") {
  AudioSignal s;
  s.sample_rate = 16000;
  s.samples = {0.1, 0.2};
  CHECK_THROWS_AS(resample(s, 0), Error);
  CHECK_THROWS_AS(resample(s, -5), Error);
}

TEST_CASE("normalize_dbfs: identity at target") {
  AudioSignal s;
  s.sample_rate = 16000;
  s.samples = sine(200.0, 16000, 0.25);
  AudioSignal at_target = normalize_dbfs(s, -28.0);
  AudioSignal again = normalize_dbfs(at_target, -28.0);
  for (size_t i = 0; i < again.samples.size(); ++i)
    CHECK(again.samples[i] == doctest::Approx(at_target.samples[i]).epsilon(1e-9));
}

TEST_CASE("normalize_dbfs: full-scale sine gain (closed form)") {
  AudioSignal s;
  s.sample_rate = 16000;
  s.samples = sine(100.0, 16000, 1.0);  // RMS 1/sqrt(2) ~ -3.0103 dBFS
  AudioSignal out = normalize_dbfs(s, -28.0);
  double gain = out.samples[40] / s.samples[40];
  double level = 20.0 * std::log10(1.0 / std::sqrt(2.0));  // ~ -3.0103 dBFS
  double expected_gain = std::pow(10.0, (-28.0 - level) / 20.0);  // 10^(-24.99/20) ~ 0.0562
  CHECK(gain == doctest::Approx(expected_gain).epsilon(1e-3));
  CHECK(gain == doctest::Approx(0.0563).epsilon(5e-3));
  double out_level = 20.0 * std::log10(rms(out.samples));
  CHECK(near_abs(out_level, -28.0, 0.01));
}

TEST_CASE("normalize_dbfs: zeros are an error") {
  AudioSignal s;
  s.sample_rate = 16000;
  s.samples.assign(1000, 0.0);
  try {
    normalize_dbfs(s, -28.0);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::degenerate_input);
  }
}

TEST_CASE("highpass: DC rejection") {
  AudioSignal s;
  s.sample_rate = 16000;
  s.samples.assign(16000, 1.0);
  AudioSignal out = highpass(s, 100.0);
  CHECK(out.samples.size() == s.samples.size());
  for (size_t i = 1600; i < out.samples.size(); ++i)  // after 100 ms transient
    CHECK(std::abs(out.samples[i]) < 1e-3);
}

TEST_CASE("highpass: passband and stopband levels") {
  AudioSignal pass;
  pass.sample_rate = 16000;
  pass.samples = sine(1000.0, 16000, 1.0);
  AudioSignal out = highpass(pass, 100.0);
  double gain_db = 20.0 * std::log10(rms(out.samples, 3200) / rms(pass.samples, 3200));
  CHECK(std::abs(gain_db) < 1.0);

  AudioSignal stop;
  stop.sample_rate = 16000;
  stop.samples = sine(10.0, 16000, 2.0);
  AudioSignal attenuated = highpass(stop, 100.0);
  double att_db = 20.0 * std::log10(rms(attenuated.samples, 8000) / rms(stop.samples, 8000));
  CHECK(att_db <= -20.0);
}

TEST_CASE("highpass: cutoff out of range") {
  AudioSignal s;
  s.sample_rate = 16000;
  s.samples = {0.0, 0.1};
  CHECK_THROWS_AS(highpass(s, 9000.0), Error);
  CHECK_THROWS_AS(highpass(s, 0.0), Error);
}

namespace {

AudioSignal burst_silence_fixture(const std::vector<std::pair<double, double>>& spans_ms,
                                  int rate = 16000) {
  // spans: (duration_ms, amplitude); amplitude 0 means silence.
  AudioSignal s;
  s.sample_rate = rate;
  size_t t0 = 0;
  for (auto [ms, amp] : spans_ms) {
    size_t n = static_cast<size_t>(ms * rate / 1000.0);
    for (size_t t = 0; t < n; ++t)
      s.samples.push_back(amp * std::sin(2.0 * kPi * 700.0 * (t0 + t) / rate));
    t0 += n;
  }
  return s;
}

}  // namespace

TEST_CASE("segment_coughs: silence yields empty list") {
  AudioSignal s;
  s.sample_rate = 16000;
  s.samples.assign(16000, 0.0);
  PreprocessConfig cfg;
  CHECK(segment_coughs(s, cfg).empty());
}

TEST_CASE("segment_coughs: two bursts across a long gap") {
  AudioSignal s = burst_silence_fixture({{300, 0.3}, {500, 0.0}, {300, 0.3}});
  PreprocessConfig cfg;  // min_silence 200 ms, min_segment 100 ms
  auto segments = segment_coughs(s, cfg);
  REQUIRE(segments.size() == 2);
  CHECK(segments[0].start_offset < segments[1].start_offset);
  CHECK(segments[0].start_offset + segments[0].samples.size() <= segments[1].start_offset);
}

TEST_CASE("segment_coughs: short gap merges") {
  AudioSignal s = burst_silence_fixture({{300, 0.3}, {100, 0.0}, {300, 0.3}});
  PreprocessConfig cfg;
  auto segments = segment_coughs(s, cfg);
  CHECK(segments.size() == 1);
}

TEST_CASE("segment_coughs: short burst discarded") {
  AudioSignal s = burst_silence_fixture({{200, 0.0}, {50, 0.3}, {200, 0.0}});
  PreprocessConfig cfg;
  CHECK(segment_coughs(s, cfg).empty());
}

TEST_CASE("frame_segment: counts and truncation") {
  CoughSegment seg;
  seg.sample_rate = 16000;
  seg.samples.assign(4096, 0.25);
  FrameMatrix fm = frame_segment(seg, 1024);
  CHECK(fm.frames.rows == 4);
  CHECK(fm.frames.cols == 1024);
  CHECK(fm.windowed);

  seg.samples.assign(1500, 0.25);
  FrameMatrix fm2 = frame_segment(seg, 1024);
  CHECK(fm2.frames.rows == 1);
}

TEST_CASE("frame_segment: all-ones gives the window itself") {
  CoughSegment seg;
  seg.sample_rate = 16000;
  seg.samples.assign(2048, 1.0);
  FrameMatrix fm = frame_segment(seg, 1024);
  auto window = hamming_window(1024);
  for (int t = 0; t < 1024; ++t) {
    CHECK(fm.frames.at(0, t) == doctest::Approx(window[t]).epsilon(1e-12));
    CHECK(fm.frames.at(1, t) == doctest::Approx(window[t]).epsilon(1e-12));
  }
}

TEST_CASE("frame_segment: rows divided by the window reconstruct the segment") {
  CoughSegment seg;
  seg.sample_rate = 16000;
  seg.samples = sine(333.0, 16000, 0.2, 0.4);
  FrameMatrix fm = frame_segment(seg, 512);
  auto window = hamming_window(512);
  for (int f = 0; f < fm.frames.rows; ++f)
    for (int t = 0; t < 512; ++t) {
      double reconstructed = fm.frames.at(f, t) / window[t];
      CHECK(reconstructed == doctest::Approx(seg.samples[f * 512 + t]).epsilon(1e-9));
    }
}

TEST_CASE("frame_segment: too-short segment errors") {
  CoughSegment seg;
  seg.sample_rate = 16000;
  seg.samples.assign(100, 0.5);
  try {
    frame_segment(seg, 1024);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::degenerate_input);
  }
}

TEST_CASE("preprocess chain is deterministic") {
  AudioSignal s;
  s.sample_rate = 44100;
  s.samples = sine(500.0, 44100, 0.5, 0.3);
  PreprocessConfig cfg;
  AudioSignal a = preprocess(s, cfg);
  AudioSignal b = preprocess(s, cfg);
  CHECK(a.samples == b.samples);
  CHECK(a.sample_rate == cfg.target_rate);
}
