#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace ppstat {

inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Seed for independent substream `index` of a master seed. Used wherever a
/// run fans out into per-replicate streams (envelopes, Monte Carlo oracles).
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index));
}

/// Seeded generator with explicitly coded variate transforms, so a given
/// seed reproduces the same draw sequence on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return (engine_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal via the Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  /// Poisson count by the product method, split into chunks so the
  /// exp(-mean) threshold never underflows. Exact for any finite mean.
  long poisson(double mean) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) {
      throw std::invalid_argument("poisson mean must be finite and >= 0");
    }
    long total = 0;
    while (mean > 0.0) {
      const double chunk = std::min(mean, 30.0);
      mean -= chunk;
      const double limit = std::exp(-chunk);
      double prod = uniform();
      while (prod > limit) {
        prod *= uniform();
        ++total;
      }
    }
    return total;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ppstat
