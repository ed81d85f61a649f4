#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace coughkit {

/// Deterministic splitmix64-based generator. The std:: distributions are
/// implementation-defined, so every draw here is built from raw 64-bit
/// outputs; seeded sequences are identical across compilers and platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  /// Independent stream derived from (seed, stream); streams with different
  /// indices are decorrelated by two mixing rounds.
  static Rng stream(uint64_t seed, uint64_t stream_index) {
    Rng r(seed);
    uint64_t a = r.next_u64();
    Rng s(a ^ (0x9e3779b97f4a7c15ULL * (stream_index + 1)));
    s.next_u64();
    return s;
  }

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes two draws per pair.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  /// Uniform integer in [0, n). n must be positive.
  int uniform_int(int n) {
    // Multiply-shift; bias is O(n / 2^64), irrelevant here.
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * static_cast<uint64_t>(n);
    return static_cast<int>(m >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace coughkit
