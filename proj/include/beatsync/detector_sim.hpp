#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "beatsync/params.hpp"
#include "beatsync/rng.hpp"
#include "beatsync/time_base.hpp"

namespace beatsync {

enum class TagCause : std::uint8_t { qubit = 0, dark = 1, afterpulse = 2 };

struct SimCounters {
  std::uint64_t qubit_clicks = 0;
  std::uint64_t dark_clicks = 0;
  std::uint64_t afterpulse_clicks = 0;
  std::uint64_t dead_suppressed = 0;
  std::uint64_t in_gate_rounds = 0;
};

/// Sub-femtosecond instant: integer fs plus a fractional accumulator, so
/// phase accumulation over billions of rounds carries no rounding bias.
struct PhaseAccumulator {
  TimeInstant t{0};
  double frac = 0;  // [0, 1) fs

  void advance(double dt_fs) {
    const double ip = std::floor(dt_fs);
    t.fs += static_cast<std::int64_t>(ip);
    frac += dt_fs - ip;
    if (frac >= 1.0) {
      t.fs += 1;
      frac -= 1.0;
    }
  }
  double minus(const PhaseAccumulator& o) const {
    return static_cast<double>(t.fs - o.t.fs) + (frac - o.frac);
  }
};

struct SimRunResult {
  TimeTagSeries tags;
  std::vector<TagCause> causes;        // parallel to tags
  std::vector<std::uint64_t> rounds;   // parallel to tags: originating round
  std::optional<std::vector<TimeInstant>> true_emission_times;
  SimCounters counters;
  ClockState final_clock_a;
  PhaseAccumulator final_gate_center;  // center of gate n_rounds, for chunked runs
  std::int64_t final_round_misalign = 0;
};

struct SimOptions {
  bool record_emission_times = false;
  std::uint64_t start_round = 0;                   // keyed-stream offset for chunked runs
  std::uint64_t stream_salt = 0;                   // decorrelates sequential streams per chunk
  std::optional<PhaseAccumulator> gate_origin;     // center of gate 0; default = gates.delay
};

/// Average SPD count probability per round:
/// Q = sum_a P(a) * (1 - (1 - p_d) * exp(-mu_a * T * eta)).
double yield_per_round(const ProtocolParams& protocol, const DetectorParams& detector);

/// Per-concern random streams used by the clock model.
struct ClockRngs {
  RngStream fast;
  RngStream slow;
  RngStream jitter;
  static ClockRngs from(RngHandle base) {
    return {RngStream(base.derive(0)), RngStream(base.derive(1)), RngStream(base.derive(2))};
  }
};

/// Advances the drifting clock by one round: redraws the fast/slow drift-rate
/// components (centered uniform, configured variances), adds them onto f, and
/// moves the phase by 1/f plus an optional per-round Gaussian jitter.
/// Throws std::domain_error if the updated frequency is not positive.
ClockState step_clock(const ClockState& state, ClockRngs& rng, double jitter_sigma_fs = 0.0);

/// Monte Carlo run of n_rounds emissions against the gate schedule. Recorded
/// tag times carry per-event Gaussian jitter; dead time suppresses any
/// candidate within dead_time_fs of the previous recorded event; recorded
/// primary clicks spawn at most one afterpulse at +T_d + Exp(lambda).
SimRunResult simulate(const ProtocolParams& protocol, const DetectorParams& detector,
                      const GateSchedule& gates, const ClockState& clock_a,
                      std::int64_t n_rounds, RngHandle rng, const SimOptions& opts = {});

}  // namespace beatsync
