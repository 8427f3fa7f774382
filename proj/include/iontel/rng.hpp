#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "iontel/errors.hpp"

namespace iontel {

// Philox4x32-10 counter-based generator. A stream is fully determined by
// (seed, stream): independent streams can be drawn for each acquisition run
// without coordination, and replaying a stream is exact.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) {
    key_ = {static_cast<std::uint32_t>(seed),
            static_cast<std::uint32_t>(seed >> 32)};
    counter_ = {static_cast<std::uint32_t>(stream),
                static_cast<std::uint32_t>(stream >> 32), 0u, 0u};
    pos_ = 4;
  }

  std::uint32_t next_u32() {
    if (pos_ >= 4) {
      block_ = philox(counter_, key_);
      bump_counter();
      pos_ = 0;
    }
    return block_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

  double normal() {
    // Box-Muller; the spare is discarded to keep the stream layout simple.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925287 * u2);
  }

  // Exact Poisson sampling: chunked multiplicative inversion, so large means
  // decompose as sums of independent moderate-mean draws.
  std::uint64_t poisson(double mean) {
    if (!(mean >= 0.0)) {
      throw domain_error("rng", "poisson mean must be non-negative");
    }
    std::uint64_t total = 0;
    while (mean > 48.0) {
      total += poisson_inversion(48.0);
      mean -= 48.0;
    }
    return total + poisson_inversion(mean);
  }

  std::uint64_t binomial(std::uint64_t n, double p) {
    if (p <= 0.0) return 0;
    if (p >= 1.0) return n;
    if (n < 128) {
      std::uint64_t k = 0;
      for (std::uint64_t i = 0; i < n; ++i) k += uniform() < p ? 1 : 0;
      return k;
    }
    // Normal approximation with continuity rounding; used only at count
    // scales where the approximation error is far below statistical noise.
    const double mu = static_cast<double>(n) * p;
    const double sigma = std::sqrt(mu * (1.0 - p));
    const double x = std::round(mu + sigma * normal());
    if (x <= 0.0) return 0;
    if (x >= static_cast<double>(n)) return n;
    return static_cast<std::uint64_t>(x);
  }

 private:
  std::uint64_t poisson_inversion(double mean) {
    if (mean <= 0.0) return 0;
    const double target = uniform();
    double p = std::exp(-mean);
    double cumulative = p;
    std::uint64_t k = 0;
    while (cumulative < target && k < 4096) {
      ++k;
      p *= mean / static_cast<double>(k);
      cumulative += p;
    }
    return k;
  }

  static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> ctr,
                                             std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kMul0 = 0xD2511F53u;
    constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t prod0 =
          static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t prod1 =
          static_cast<std::uint64_t>(kMul1) * ctr[2];
      const std::uint32_t hi0 = static_cast<std::uint32_t>(prod0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(prod0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(prod1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(prod1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

  void bump_counter() {
    for (int i = 2; i < 4; ++i) {
      if (++counter_[i] != 0) break;
    }
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int pos_;
};

// Seed mixing for derived streams (SplitMix64 finalizer).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace iontel
