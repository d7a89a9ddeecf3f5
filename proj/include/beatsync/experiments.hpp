#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "beatsync/config_io.hpp"
#include "beatsync/recovery.hpp"
#include "beatsync/stats.hpp"

namespace beatsync {

inline constexpr const char* kVersion = "beatsync 0.1.0";

struct ExperimentSpec {
  std::string name;
  Config config;
  std::uint64_t seed = 1;
  std::string out_dir;
  std::vector<std::string> overrides;  // kept for the manifest
};

enum class RunStatus : int { ok = 0, config_error = 1, recovery_errors = 2 };

/// Dispatches on spec.name, writes CSV/JSON outputs plus a manifest into
/// spec.out_dir, and returns the process exit status.
RunStatus run_experiment(const ExperimentSpec& spec);

// ---- computation cores, shared by the CLI runner and the test suites ----

struct SpectrumRunResult {
  CountSeries counts;
  Spectrum spectrum;
  std::optional<CoarseEstimate> peak;
  std::string error;  // set when the peak search failed
};

/// Gated-mode simulation of config.run_duration_s followed by the low-speed
/// Fourier stage.
SpectrumRunResult run_fast_spectrum(const Config& config, std::uint64_t seed);

/// Full initial recovery on freshly simulated data; returns the estimate and
/// the true source frequency.
struct RecoveryTrial {
  double true_f_hz = 0;
  std::optional<RecoveryEstimate> estimate;
  std::string error;
};
RecoveryTrial run_recovery_trial(const Config& config, std::uint64_t seed);

struct TrackTrace {
  struct Row {
    double t_s = 0;
    double delta_f_hz = 0;           // f_A - f_B at the sample instant
    double arrival_misalign_ps = 0;  // cumulative pulse-vs-gate-center offset
    std::int64_t round_misalign = 0;
  };
  std::vector<Row> rows;
  std::vector<std::pair<double, std::string>> events;  // (t_s, kind)
};

struct TrackRunResult {
  TrackTrace tracked;
  TrackTrace untracked;
};

/// Two-arm drifting-clock run over config.run_duration_s; the arms share one
/// drift/jitter/detection realization, the tracked arm updates f_B and the
/// gate delay every config.track_interval_s.
TrackRunResult run_track_pair(const Config& config, std::uint64_t seed);

/// Aligned-clock tracking setup for system = "20MHz" or "1GHz": white
/// per-round uniform drift on the source clock, 200 s run, 2 s interval.
Config track_config(const std::string& system);

/// Peak PSD over the mean PSD of the non-harmonic band.
double measured_snr(const Spectrum& spectrum, int k_p);

struct SweepPoint {
  double x = 0;          // swept quantity (n'_q or K)
  double aux = 0;        // companion value (K n'_q or T_s)
  double snr_mean = 0;
  double snr_sem = 0;
  int trials = 0;
};

/// Fig.-8 analogue: total qubit counts swept 80..800 in 1 dB steps at fixed
/// K = 200 and qubit:noise ratio 4:1.
std::vector<SweepPoint> run_counts_sweep(const Config& config, std::uint64_t seed, int trials);

/// Fig.-9 analogue: sample time swept so K runs 200..2000 at fixed per-beat
/// rates (0.4 qubit + 0.1 noise counts per beat at the 1 s baseline).
std::vector<SweepPoint> run_k_sweep(const Config& config, std::uint64_t seed, int trials);

struct ResolutionPoint {
  double q_yield = 0;           // per-round SPD yield while the pulse is in the gate
  double mean_abs_error_hz = 0;
  int trials = 0;
  int failures = 0;             // NoPeak/Ambiguous/EmptyAfterFilter, excluded from the mean
  int wrong_sign = 0;
};

/// Fig.-13 analogue: initial recoveries on 1 s data at random mismatches in
/// [-10^4, 10^4] Hz across descending yield levels.
std::vector<ResolutionPoint> run_resolution_sweep(const Config& config, std::uint64_t seed,
                                                  int trials_per_level,
                                                  const std::vector<double>& transmittances);

struct SignCampaign {
  int trials = 0;
  int correct = 0;
  int ambiguous = 0;
  int failed = 0;  // other recovery errors
};

/// Sign-identification success rate over uniform mismatches in [-10^4, 10^4] Hz.
SignCampaign run_sign_campaign(const Config& config, std::uint64_t seed, int trials);

struct IsserlisResult {
  double var_over_mean_sq = 0;  // Var(S_noi) / mean(S_noi)^2, pooled
  int runs = 0;
  std::size_t band_bins = 0;
};

/// Noise-floor fluctuation statistic over repeated seeded runs.
IsserlisResult run_psd_variance(const Config& config, std::uint64_t seed, int runs);

struct BenchArm {
  std::uint64_t samples = 0;
  double fft_seconds = 0;
  std::uint64_t spectrum_bytes = 0;
  double recovered_hz = 0;
};

struct BenchResult {
  BenchArm legacy;
  BenchArm fast;
  double speedup = 0;
  double memory_ratio = 0;
};

/// Times the legacy high-rate pipeline against the low-speed pipeline on one
/// shared free-running tag stream (fast arm gates it digitally).
BenchResult run_bench(const Config& config, std::uint64_t seed);

}  // namespace beatsync
