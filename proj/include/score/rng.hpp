#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace score {

/// Counter-based Philox4x32-10 block cipher (Salmon et al., SC'11).
///
/// Each 128-bit counter/64-bit key pair maps to four independent 32-bit
/// outputs, so arbitrary draws can be addressed without sequential state.
/// This is what makes the sampler reproducible regardless of how chains are
/// scheduled across threads: every chain owns a disjoint counter range.
struct Philox4x32 {
  static constexpr std::uint32_t kW32A = 0x9E3779B9u;
  static constexpr std::uint32_t kW32B = 0xBB67AE85u;
  static constexpr std::uint32_t kM4x32A = 0xD2511F53u;
  static constexpr std::uint32_t kM4x32B = 0xCD9E8D57u;

  static void round(std::array<std::uint32_t, 4>& ctr,
                    const std::array<std::uint32_t, 2>& key) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM4x32A) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM4x32B) * ctr[2];
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }

  /// Ten-round keyed permutation of a 128-bit counter.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    for (int r = 0; r < 10; ++r) {
      if (r > 0) {
        key[0] += kW32A;
        key[1] += kW32B;
      }
      round(ctr, key);
    }
    return ctr;
  }
};

/// Purpose tags keeping unrelated random streams disjoint under one seed.
enum class StreamTag : std::uint8_t {
  kChain = 1,       ///< per-chain sampler noise and (re-)initialization
  kBootstrap = 2,   ///< per-resample bootstrap indices
  kSynthesis = 3,   ///< training-point generation
  kOracle = 4,      ///< oracle Monte Carlo (kappa)
  kProbe = 5,       ///< scale probes (temperature, linearization seeding)
  kGeneric = 6,     ///< ad-hoc consumers (tests, validation suites)
  kKs = 7,          ///< parametric-bootstrap goodness-of-fit simulation
};

/// Composes a 64-bit stream id from a tag and two 28-bit indices.
constexpr std::uint64_t stream_id(StreamTag tag, std::uint64_t a = 0,
                                  std::uint64_t b = 0) {
  return (static_cast<std::uint64_t>(tag) << 56) | ((a & 0xFFFFFFFull) << 28) |
         (b & 0xFFFFFFFull);
}

/// Deterministic 64-bit mixer (SplitMix64 finalizer) for seed namespacing.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// One addressable random stream: (seed, stream id) picks the key and the
/// high counter word; draws advance only the low counter word.
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream) {}

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::uint64_t stream() const { return stream_; }

  std::uint32_t next_u32() {
    if (avail_ == 0) {
      const std::array<std::uint32_t, 4> ctr = {
          static_cast<std::uint32_t>(draws_),
          static_cast<std::uint32_t>(draws_ >> 32),
          static_cast<std::uint32_t>(stream_),
          static_cast<std::uint32_t>(stream_ >> 32)};
      const std::array<std::uint32_t, 2> key = {
          static_cast<std::uint32_t>(seed_),
          static_cast<std::uint32_t>(seed_ >> 32)};
      buf_ = Philox4x32::block(ctr, key);
      ++draws_;
      avail_ = 4;
    }
    return buf_[4 - avail_--];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in (0, 1]; safe as a log() argument.
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    // 64-bit multiply-shift; bias is negligible for the n used here (< 2^32).
    return static_cast<std::uint64_t>(uniform01() * static_cast<double>(n)) %
           n;
  }

  /// Standard normal deviate via Box-Muller (pairs cached).
  ///
  /// Hand-rolled rather than std::normal_distribution because the standard
  /// leaves that algorithm implementation-defined, which would break
  /// bit-reproducibility across toolchains.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::uint64_t draws_ = 0;
  std::array<std::uint32_t, 4> buf_ = {0, 0, 0, 0};
  int avail_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// 64-bit FNV-1a, used to fingerprint configurations in exports.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace score
