#include "ncp/rng.hpp"

#include <cmath>
#include <numbers>

#include "ncp/errors.hpp"

namespace ncp {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kSeedSalt = 0x6A09E667F3BCC908ULL;
constexpr std::uint64_t kAltSalt = 0xBB67AE8584CAA73BULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed),
      stream_id_(stream_id),
      key_(mix64(mix64(seed ^ kSeedSalt) + stream_id * kGolden)),
      alt_(mix64(key_ ^ kAltSalt)) {}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(mix64(key_ + counter_ * kGolden) ^ alt_);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double RngStream::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::normal(double mean, double stddev) { return mean + stddev * normal(); }

std::uint64_t RngStream::index(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("RngStream::index: n must be positive");
  __extension__ using u128 = unsigned __int128;
  const auto wide = static_cast<u128>(next_u64()) * n;
  return static_cast<std::uint64_t>(wide >> 64);
}

RngStream make_rng(std::uint64_t seed, std::uint64_t stream_id) {
  return RngStream(seed, stream_id);
}

}  // namespace ncp
