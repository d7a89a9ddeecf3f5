#include "beatsync/params.hpp"

#include <cmath>

namespace beatsync {

namespace {
void check(ValidationReport& r, bool ok, const char* field, const std::string& msg) {
  if (!ok) r.failures.push_back({field, msg});
}

bool is_prob(double p) { return p >= 0.0 && p <= 1.0 && std::isfinite(p); }
}  // namespace

ValidationReport validate_config(const DetectorParams& d, const ProtocolParams& p,
                                 const SampleConfig& s, const ClockState& a,
                                 const ClockState& b) {
  ValidationReport r;

  check(r, is_prob(d.efficiency), "detector.efficiency", "must lie in [0,1]");
  check(r, d.gate_width_fs > 0, "detector.gate_width", "gate_width must be positive");
  check(r, d.jitter_sigma_fs >= 0, "detector.jitter_sigma", "must be >= 0");
  check(r, d.dead_time_fs >= 0, "detector.dead_time", "must be >= 0");
  check(r, is_prob(d.afterpulse_prob), "detector.afterpulse_prob", "must lie in [0,1]");
  check(r, d.afterpulse_rate_per_fs > 0, "detector.afterpulse_lambda", "must be > 0");
  check(r, is_prob(d.dark_prob), "detector.dark_prob", "must lie in [0,1]");

  double prob_sum = 0;
  bool probs_ok = true;
  for (const auto& i : p.intensities) {
    probs_ok = probs_ok && is_prob(i.probability) && i.mean_photons >= 0;
    prob_sum += i.probability;
  }
  check(r, !p.intensities.empty(), "protocol.intensities", "at least one intensity required");
  check(r, probs_ok, "protocol.intensities", "intensity entries must be valid");
  check(r, std::abs(prob_sum - 1.0) < 1e-9, "protocol.intensities",
        "intensity probabilities must sum to 1");
  check(r, is_prob(p.channel_transmittance), "protocol.channel_transmittance",
        "must lie in [0,1]");

  check(r, s.sample_duration_fs > 0, "sample.sample_duration", "must be positive");
  check(r, s.bin_duration_fs > 0, "sample.bin_duration", "must be positive");
  if (s.bin_duration_fs > 0 && s.sample_duration_fs > 0) {
    check(r, s.sample_duration_fs % s.bin_duration_fs == 0, "sample.bin_duration",
          "bin duration must divide the sample duration");
    check(r, s.bin_count() % 2 == 0, "sample.bin_count", "N_s must be even");
    check(r, s.target_resolution_hz > 0, "sample.target_resolution", "must be > 0");
    check(r, s.sample_seconds() * s.target_resolution_hz >= 1.0 - 1e-12,
          "sample.sample_duration", "T_s must satisfy T_s >= 1/target_resolution");
    if (s.max_expected_beat_hz > 0)
      check(r, s.sampling_rate_hz() >= 2.0 * s.max_expected_beat_hz, "sample.bin_duration",
            "sampling rate f'_s below Nyquist for the expected beat");
  }

  for (const auto* c : {&a, &b}) {
    const char* who = (c == &a) ? "clock_a" : "clock_b";
    check(r, c->f_hz > 0, who, "frequency must be > 0");
    check(r, c->fast_drift_var >= 0 && c->slow_drift_var >= 0, who,
          "drift variances must be >= 0");
    if (c->fast_drift_var > 0 && c->slow_drift_var > 0)
      check(r, c->slow_drift_var <= 1e-2 * c->fast_drift_var, who,
            "slow drift variance must be << fast drift variance");
  }

  if (b.f_hz > 0)
    check(r, static_cast<double>(d.gate_width_fs) < kFsPerSecond / b.f_hz,
          "detector.gate_width", "gate wider than the detection period");

  return r;
}

}  // namespace beatsync
