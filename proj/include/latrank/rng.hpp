#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace latrank {

// splitmix64 finalizer; used to decorrelate seeds derived from small integers.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and up to three
// indices (chain id, simulation id, pair id, ...).  Pure function, so any
// worker can reconstruct its stream without sharing generator state.
inline std::uint64_t stream_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  return mix64(base ^ mix64(a + mix64(b + mix64(c))));
}

// mt19937_64 with hand-rolled variate transforms.  The engine's output
// sequence is pinned by the standard; the std:: distributions are not, so
// everything downstream of uniform() is implemented here to keep runs
// byte-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }

  // uniform on [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer on {0, ..., n-1} via 128-bit multiply (no modulo bias
  // worth caring about at these ranges)
  int uniform_int(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(engine_()) *
                             static_cast<unsigned __int128>(n)) >>
                            64);
  }

  // Exp(rate); log1p(-u) keeps accuracy for u near 0 and avoids log(0)
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  // standard normal, Box-Muller with one cached variate
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  int poisson(double mean) {
    // inversion for small means, normal tail capped for large ones;
    // all entry points stay on the uniform()/normal() streams above
    if (mean <= 0.0) return 0;
    if (mean < 30.0) {
      double p = std::exp(-mean);
      double acc = p;
      double u = uniform();
      int k = 0;
      while (u > acc && k < 10000) {
        ++k;
        p *= mean / k;
        acc += p;
      }
      return k;
    }
    double v = mean + std::sqrt(mean) * normal();
    return v < 0.0 ? 0 : static_cast<int>(std::floor(v + 0.5));
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace latrank
