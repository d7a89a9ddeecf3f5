#pragma once

#include <cfenv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace beatsync {

// All absolute times are signed 64-bit femtoseconds. 1 s = 1e15 fs, so the
// representable range (~9.2e18 fs) covers a bit more than 9000 s of run time.
inline constexpr double kFsPerSecond = 1e15;
inline constexpr std::int64_t kFsPerSecondInt = 1000000000000000LL;

/// A point in time, femtoseconds since the experiment origin.
struct TimeInstant {
  std::int64_t fs = 0;

  friend auto operator<=>(const TimeInstant&, const TimeInstant&) = default;
  friend TimeInstant operator+(TimeInstant a, std::int64_t d) { return {a.fs + d}; }
  friend TimeInstant operator-(TimeInstant a, std::int64_t d) { return {a.fs - d}; }
  friend std::int64_t operator-(TimeInstant a, TimeInstant b) { return a.fs - b.fs; }
};

/// Round-half-to-even conversion from seconds (or any double fs count) to fs.
inline std::int64_t round_fs(double fs) { return std::llrint(fs); }

inline std::int64_t fs_from_seconds(double s) { return std::llrint(s * kFsPerSecond); }
inline double seconds_from_fs(std::int64_t fs) { return static_cast<double>(fs) / kFsPerSecond; }

/// Sorted detection timestamps, the interchange format between the simulator
/// and every recovery stage.
struct TimeTagSeries {
  std::vector<TimeInstant> tags;
  std::string origin_note;

  std::size_t size() const { return tags.size(); }
  bool empty() const { return tags.empty(); }
  TimeInstant front() const { return tags.front(); }
  TimeInstant back() const { return tags.back(); }

  bool is_sorted() const {
    for (std::size_t i = 1; i < tags.size(); ++i)
      if (tags[i] < tags[i - 1]) return false;
    return true;
  }

  /// Smallest gap between consecutive tags; returns INT64_MAX for < 2 tags.
  std::int64_t min_gap_fs() const {
    std::int64_t g = INT64_MAX;
    for (std::size_t i = 1; i < tags.size(); ++i)
      g = std::min(g, tags[i] - tags[i - 1]);
    return g;
  }

  std::int64_t span_fs() const { return tags.empty() ? 0 : tags.back() - tags.front(); }
};

}  // namespace beatsync
