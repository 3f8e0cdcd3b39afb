#pragma once

#include <cstdint>
#include <span>

namespace ncp {

/// Counter-based random stream.
///
/// Draw n of stream (seed, stream_id) is a pure function of (seed, stream_id, n):
///
///   key   = mix64(mix64(seed ^ 0x6A09E667F3BCC908) + stream_id * 0x9E3779B97F4A7C15)
///   alt   = mix64(key ^ 0xBB67AE8584CAA73B)
///   bits  = mix64(mix64(key + (n + 1) * 0x9E3779B97F4A7C15) ^ alt)
///
/// where mix64 is the SplitMix64 finalizer (shift 30/27/31, multipliers
/// 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB). Uniforms take the top 53 bits;
/// normals use Box-Muller on two uniforms (cosine branch only), so every
/// normal consumes exactly two counter values.
///
/// Not safe for concurrent mutation; give each thread of work its own stream.
class RngStream {
public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  double normal();
  double normal(double mean, double stddev);
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n);

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t alt_;
  std::uint64_t counter_ = 0;
};

RngStream make_rng(std::uint64_t seed, std::uint64_t stream_id);

}  // namespace ncp
