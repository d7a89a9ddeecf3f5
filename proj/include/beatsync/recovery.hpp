#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "beatsync/params.hpp"
#include "beatsync/time_base.hpp"

namespace beatsync {

enum class RecoveryIssue {
  no_peak,            // spectrum peak indistinguishable from the noise floor
  ambiguous_sign,     // D-bar margin too small to decide the sign
  empty_after_filter, // no residue pairs survive the threshold filter
  degenerate_abscissa,// all round indices equal, no regression possible
  not_found,          // delay scan saw no case-1 window
};

struct RecoveryError : std::runtime_error {
  RecoveryIssue issue;
  RecoveryError(RecoveryIssue i, const std::string& what)
      : std::runtime_error(what), issue(i) {}
};

/// Low-rate binned counts x(l), the FFT input.
struct CountSeries {
  Eigen::VectorXd counts;         // length N_s, integral values
  std::int64_t bin_duration_fs = 0;
  TimeInstant start{0};

  std::int64_t bin_count() const { return counts.size(); }
  double sample_seconds() const {
    return static_cast<double>(counts.size()) * seconds_from_fs(bin_duration_fs);
  }
};

struct Spectrum {
  Eigen::VectorXcd amplitudes;    // X(k) = sum_l x(l) exp(-i 2 pi k l / N)
  Eigen::ArrayXd psd;             // |X(k)|^2 / N
  double frequency_resolution_hz = 0;
};

struct CoarseEstimate {
  int k_p = 0;
  double beat_hz = 0;             // |Delta_f| estimate, k_p / T_s
  double abs_period_delta_s = 0;  // tau_B * beat / f_B
  double snr_observed = 0;        // peak PSD over median non-DC PSD
};

/// Residue pairs (k_j, y'_j) after recentring and edge filtering.
struct FilteredDataset {
  std::vector<std::int64_t> k;    // strictly increasing round indices
  std::vector<double> y_s;        // residues in seconds, in (eps, tau - eps)
  double modulus_s = 0;           // tau_coa
  double epsilon_s = 0;           // eps_th
  std::size_t pivot_index = 0;
  std::size_t size() const { return k.size(); }
};

struct SignDecision {
  int sign = 0;                   // +1 or -1
  FilteredDataset data;           // the winning dataset
  double d_plus = 0;              // average derivative of the positive dataset
  double d_minus = 0;
};

struct LsrResult {
  double slope_s = 0;             // tau_fin
  double residual_std_s = 0;
};

struct RecoveryEstimate {
  CoarseEstimate coarse;
  int sign = 0;
  double tau_fin_s = 0;
  double period_s = 0;            // recovered tau_B
  double frequency_hz = 0;
  TimeInstant delay_correction{0};
  // diagnostics
  double mean_residue_s = 0;
  std::size_t retained_points = 0;
  double d_plus = 0;
  double d_minus = 0;
};

/// x(l) = number of tags in [start + l*tau'_s, start + (l+1)*tau'_s); tags
/// outside the window are ignored. Single pass over the (sorted) tags.
CountSeries bin_counts(const TimeTagSeries& tags, const SampleConfig& sample, TimeInstant start);

/// Keeps exactly the tags inside the periodic gate windows; applied to
/// free-running tags this synthesizes the gated-mode beat.
TimeTagSeries digital_gate_filter(const TimeTagSeries& tags, const GateSchedule& gates);

/// Plain rectangular-window FFT; no zero padding.
Spectrum fft_spectrum(const CountSeries& series);

/// Locates the beat line: the lowest-frequency bin within 3 dB of the
/// spectrum maximum over k in [1, N/2]. The gate frequency converts the beat
/// into an absolute period difference. Throws NoPeak when the maximum does
/// not clear 3x the median floor.
CoarseEstimate find_beat_peak(const Spectrum& spectrum, double gate_freq_hz);

/// Temporal afterpulse filter: drops every tag that follows its predecessor
/// by less than guard_gap_fs. Detector dead time already enforces gaps of
/// T_d between real counts, so a guard of T_d plus a few afterpulse decay
/// times removes almost all afterpulses at a modest cost in primaries.
TimeTagSeries drop_close_followers(const TimeTagSeries& tags, std::int64_t guard_gap_fs);

/// Eq.-(4)/(5) preprocessing: pivots the stream on its middle tag so the
/// pivot residue sits at tau/2, wraps into [0, tau), and drops residues
/// within eps of either edge.
FilteredDataset recentre_and_filter(const TimeTagSeries& tags, double tau_coa_s, double eps_th_s);

/// Builds the tau_B +/- |delta| candidate datasets, filters both, and picks
/// the sign whose average adjacent derivative D-bar is smaller.
SignDecision identify_sign(const TimeTagSeries& tags, double tau_b_s, double abs_delta_s,
                           double eps_th_s);

/// Ordinary least-squares slope of y' on k.
LsrResult lsr_fine_tune(const FilteredDataset& data);

/// Full initial recovery: bin -> FFT -> peak -> sign -> regression. The
/// Fourier stage sees every tag; the residue stages run on the temporally
/// filtered stream when guard_gap_fs > 0.
RecoveryEstimate recover_frequency(const TimeTagSeries& tags, double tau_b_s,
                                   const SampleConfig& sample, double eps_th_s,
                                   std::int64_t guard_gap_fs = 0);

/// Tracking-stage update: residues are taken directly in the caller's gate
/// frame (origin such that a centered pulse lands at tau/2), skipping the
/// Fourier stage. delay_correction = tau_B/2 - mean residue. Throws
/// EmptyAfterFilter on loss of lock.
RecoveryEstimate track(const TimeTagSeries& window, double current_tau_b_s, double eps_th_s,
                       TimeInstant frame_origin, double frame_origin_frac_fs = 0.0,
                       std::int64_t guard_gap_fs = 0);

/// Scans the SPD delay in half-gate steps over one period, classifies each
/// step against the scan's own noise floor, and returns the rate-weighted
/// center of the live window. Throws NotFound if no delay shows signal.
TimeInstant delay_scan(const std::function<double(TimeInstant)>& rate_probe, double tau_b_s,
                       std::int64_t gate_width_fs);

struct LegacyPerf {
  std::uint64_t sample_count = 0;
  double fft_seconds = 0;
  std::uint64_t spectrum_bytes = 0;
};

struct LegacyResult {
  double f_coa_hz = 0;
  double tau_fin_s = 0;
  double frequency_hz = 0;
  LegacyPerf perf;
};

/// Block-maximum downsampling of a huge PSD, for plotting.
struct DecimatedPsd {
  std::int64_t block = 1;
  std::vector<std::pair<std::int64_t, double>> rows;  // (k at block max, psd)
};

/// The original high-rate pipeline kept as the benchmark baseline: binary
/// occupancy sampling at f_s, full-length FFT, first-peak pick, then an
/// unfiltered regression of (t - t_0) mod tau_coa on the round index.
LegacyResult legacy_recover(const TimeTagSeries& tags, double sample_rate_hz,
                            std::int64_t duration_fs, DecimatedPsd* decimated = nullptr);

/// max(4 sigma, 0.05 tau), capped at tau/4.
double default_epsilon_threshold(double tau_s, double jitter_sigma_s);

}  // namespace beatsync
