#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ehmac {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives a well-separated seed for substream `stream` of `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  return a ^ (b << 1);
}

/// mt19937_64 with hand-rolled inverse-transform samplers so draws are a pure
/// function of the seed (std::*_distribution algorithms vary per library).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng substream(std::uint64_t master, std::uint64_t stream) {
    return Rng(derive_seed(master, stream));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Unit-mean exponential, strictly positive.
  double exponential() {
    double u = unit();
    double x = -std::log1p(-u);
    return x > 0.0 ? x : 5e-324;
  }

  /// Uniform integer in [0, n), n >= 1.
  long uniform_int(long n) {
    // multiply-shift map of the top 64 bits onto [0, n)
    unsigned __int128 wide =
        static_cast<unsigned __int128>(engine_()) * static_cast<unsigned __int128>(n);
    return static_cast<long>(wide >> 64);
  }

  bool bernoulli(double p) { return unit() < p; }

  /// Geometric count with pmf xi*(1-xi)^k, k = 0, 1, ...
  long geometric(double xi) {
    if (xi >= 1.0) return 0;
    double u = unit();
    double k = std::floor(std::log1p(-u) / std::log1p(-xi));
    if (k < 0.0) k = 0.0;
    if (k > 9e18) k = 9e18;
    return static_cast<long>(k);
  }

  /// Poisson count (Knuth product method, chunked for large means).
  long poisson(double lambda) {
    long count = 0;
    while (lambda > 30.0) {
      count += poisson_small(30.0);
      lambda -= 30.0;
    }
    return count + poisson_small(lambda);
  }

 private:
  long poisson_small(double lambda) {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    long k = 0;
    double prod = unit();
    while (prod > limit) {
      ++k;
      prod *= unit();
    }
    return k;
  }

  std::mt19937_64 engine_;
};

}  // namespace ehmac
