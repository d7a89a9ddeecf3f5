#pragma once

#include <cmath>
#include <cstdint>

namespace beatsync {

/// Identifies one deterministic random stream. Equal (seed, stream_id) pairs
/// reproduce identical draws; distinct stream_ids are independent. Every
/// stochastic concern in the simulator (drift, detection, jitter, afterpulse,
/// dark counts, ...) gets its own stream so that toggling one effect does not
/// shift the draws of another.
struct RngHandle {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  RngHandle derive(std::uint64_t sub) const { return {seed, stream_id * 64 + sub + 1}; }
};

namespace detail {
inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}
}  // namespace detail

/// Counter-based generator (splitmix64 over a keyed counter). Supports both
/// sequential draws and random access by index, which the simulator uses to
/// key per-round draws so that independent effects stay aligned round by
/// round regardless of what else is enabled.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(RngHandle h)
      : key_(detail::mix64(h.seed + detail::kGolden) ^
             detail::mix64(h.stream_id * 0xD1342543DE82EF95ULL + 0x63652362ULL)) {}

  /// Draw at an explicit counter, independent of sequential state.
  std::uint64_t at(std::uint64_t n) const {
    return detail::mix64(key_ + (n + 1) * detail::kGolden);
  }

  std::uint64_t next() { return at(n_++); }

  static double to_unit(std::uint64_t u) {
    return static_cast<double>(u >> 11) * 0x1.0p-53;  // [0, 1)
  }

  double uniform01() { return to_unit(next()); }
  double uniform01_at(std::uint64_t n) const { return to_unit(at(n)); }

  /// Centered uniform with the requested standard deviation.
  double uniform_centered(double stddev) {
    const double half_width = stddev * 1.7320508075688772;  // sqrt(3)
    return (2.0 * uniform01() - 1.0) * half_width;
  }

  double uniform_centered_at(std::uint64_t n, double stddev) const {
    const double half_width = stddev * 1.7320508075688772;
    return (2.0 * uniform01_at(n) - 1.0) * half_width;
  }

  /// Standard normal via Box-Muller; consumes counters 2n and 2n+1 so a
  /// given index always yields the same value.
  double normal_at(std::uint64_t n) const {
    const double u1 = 1.0 - to_unit(at(2 * n));  // (0, 1]
    const double u2 = to_unit(at(2 * n + 1));
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925287 * u2);
  }

  double normal() { return normal_at(n_seq_normal_++); }

  /// Exponential with the given rate (mean 1/rate).
  double exponential(double rate) { return -std::log(1.0 - uniform01()) / rate; }

  /// Rounds until the next success of a Bernoulli(p) process, p in (0,1).
  /// Consumes exactly one draw per event.
  std::uint64_t geometric_gap(double p) {
    const double u = uniform01();
    const double g = std::floor(std::log1p(-u) / std::log1p(-p));
    return static_cast<std::uint64_t>(g) + 1;
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t n_ = 0;
  std::uint64_t n_seq_normal_ = 0;
};

}  // namespace beatsync
