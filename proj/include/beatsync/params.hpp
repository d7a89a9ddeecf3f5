#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "beatsync/time_base.hpp"

namespace beatsync {

/// Gated-mode (or free-running) single-photon detector model.
struct DetectorParams {
  double efficiency = 0.2;            // eta, [0, 1]
  std::int64_t gate_width_fs = 1000000;  // T_g, 1 ns default
  double jitter_sigma_fs = 50000;     // per-event Gaussian timing jitter, 50 ps
  std::int64_t dead_time_fs = 1000000000;  // T_d, 1 us
  double afterpulse_prob = 0.02;      // P_ap
  double afterpulse_rate_per_fs = 1e-8;  // lambda; mean delay 1/lambda = 100 ns
  double dark_prob = 1e-6;            // p_d per gate

  friend bool operator==(const DetectorParams&, const DetectorParams&) = default;
};

/// Source-side settings. Basis/bit choices are not modeled beyond the
/// per-round intensity mix.
struct ProtocolParams {
  struct Intensity {
    double mean_photons = 0.1;  // mu
    double probability = 1.0;
    friend bool operator==(const Intensity&, const Intensity&) = default;
  };
  std::vector<Intensity> intensities{{0.1, 1.0}};
  double channel_transmittance = 1.0;
  std::string state_settings_note;

  double mean_intensity() const {
    double m = 0;
    for (const auto& i : intensities) m += i.mean_photons * i.probability;
    return m;
  }

  friend bool operator==(const ProtocolParams&, const ProtocolParams&) = default;
};

/// One party's oscillator: current frequency, the next emission instant, and
/// the white per-round drift model. Each round the fast and slow drift-rate
/// components are redrawn from centered uniform distributions with the
/// configured variances and added onto f.
struct ClockState {
  double f_hz = 2e7;
  TimeInstant phase{0};       // next event time, integer fs part
  double phase_frac_fs = 0;   // sub-fs accumulator, [0, 1)
  double fast_drift_var = 0;  // Var of the per-round fast increment, Hz^2
  double slow_drift_var = 0;  // Var of the per-round slow increment, Hz^2
  double fast_component = 0;  // last drawn drift-rate values, Hz
  double slow_component = 0;

  double period_fs() const { return kFsPerSecond / f_hz; }

  friend bool operator==(const ClockState&, const ClockState&) = default;
};

/// Low-speed sampling plan for the Fourier stage.
struct SampleConfig {
  std::int64_t sample_duration_fs = kFsPerSecondInt;  // T_s
  std::int64_t bin_duration_fs = 1000000000000LL;     // tau'_s, 1 ms -> f'_s = 1 kHz
  double target_resolution_hz = 1.0;                  // Delta_f_s
  double max_expected_beat_hz = 400.0;                // Nyquist guard for f'_s

  std::int64_t bin_count() const { return sample_duration_fs / bin_duration_fs; }  // N_s
  double sampling_rate_hz() const { return kFsPerSecond / static_cast<double>(bin_duration_fs); }
  double sample_seconds() const { return seconds_from_fs(sample_duration_fs); }

  friend bool operator==(const SampleConfig&, const SampleConfig&) = default;
};

enum class GateMode { gated, free_running };

/// Bob's periodic detection window: gate j is centered on
/// origin + j / f_b + delay and spans gate_width_fs.
struct GateSchedule {
  double f_b_hz = 2e7;
  TimeInstant delay{0};
  std::int64_t gate_width_fs = 1000000;
  GateMode mode = GateMode::gated;

  double period_fs() const { return kFsPerSecond / f_b_hz; }

  friend bool operator==(const GateSchedule&, const GateSchedule&) = default;
};

struct ValidationReport {
  struct Entry {
    std::string field;
    std::string message;
  };
  std::vector<Entry> failures;
  bool pass() const { return failures.empty(); }
};

ValidationReport validate_config(const DetectorParams& detector, const ProtocolParams& protocol,
                                 const SampleConfig& sample, const ClockState& clock_a,
                                 const ClockState& clock_b);

}  // namespace beatsync
