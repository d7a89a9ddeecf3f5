#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace beatsync::theory {

/// One delta line of the gated-mode spectrum, at (l+m) f_A - l Delta_f.
struct SpectralLine {
  double frequency_hz = 0;
  std::complex<double> amplitude;
  int group_index = 0;  // l + m
  int l_index = 0;
};

/// Expected PSD levels and SNR for the low-speed-sampled beat comb.
struct PsdPrediction {
  double s_dc = 0;
  double s_bf = 0;
  double s_noi = 0;
  double gamma1 = 0;
  double gamma2 = 0;
  double n_q = 0;       // expected counts in a qubit bin
  double n_v = 0;       // expected counts in a noise bin
  double var_q = 0;
  double var_v = 0;
  int bins_per_beat = 0;   // L
  int half_bins = 0;       // M (N_s = 2M)
  double beat_periods = 0; // K = 2M / L
  double r_q = 0;          // qubit fraction of the per-beat counts
  double n_q_prime = 0;    // qubit-caused counts per beat
  double n_bt = 0;         // total counts per beat
  double snr = 0;          // K r_q n'_q + 1
};

/// Mean recorded rate under non-paralyzable dead time (and afterpulses):
/// Q / (1 + T_d Q (1 + P_ap)), with T_d in rounds.
double deadtime_rate(double q, double dead_time_rounds, double afterpulse_prob);

/// exp(-2 (pi f sigma)^2): Gaussian timing jitter only attenuates lines.
double jitter_attenuation(double f_hz, double sigma_s);

/// Detector transfer value
/// H(f) = [Q + Q_ap * lambda / (i 2 pi f + lambda) * exp(-i 2 pi f T_d)]
///        * exp(-2 (pi f sigma)^2).
std::complex<double> transfer_H(double f_hz, double q, double q_ap, double lambda_per_s,
                                double dead_time_s, double sigma_s);

struct TransferParams {
  double q = 0;
  double q_ap = 0;           // afterpulse rate; by default P_ap * Q
  double lambda_per_s = 1e7;
  double dead_time_s = 0;
  double sigma_s = 0;
};

/// Spectral lines of a misaligned gated-mode system for |l| <= l_max,
/// |m| <= m_max: amplitude T_g f_A f_B sinc(l pi f_B T_g) H(f - l f_A),
/// coincident frequencies summed, sorted ascending.
std::vector<SpectralLine> gated_line_table(double f_a_hz, double f_b_hz, double gate_width_s,
                                           const TransferParams& h, int l_max, int m_max);

/// PSD levels from the per-bin count moments; n_q = N_q Q_q + N'_v Q_v,
/// n_v = N'_s Q_v, binomial variances, Gamma_1/Gamma_2 correlation sums.
PsdPrediction psd_predict(double rounds_qubit_bin, double rounds_per_bin, double q_q,
                          double q_v, int bins_per_beat, int half_bins);

/// Fine-tuning resolution sqrt(24) sigma / (sqrt(Q) N^1.5).
double fine_tune_std(double sigma_s, double q, double n_rounds);

/// Exact expected DFT magnitude of the deterministic comb: 2M(n_q/L +
/// n_v(L-1)/L) at k = 0, 2M(n_q - n_v)/L at nonzero multiples of 2M/L,
/// 0 elsewhere. Requires L | 2M.
double expected_dft_line(double n_q, double n_v, int bins_per_beat, int half_bins, int k);

/// unnormalized sinc, sin(x)/x with sinc(0) = 1
double sinc(double x);

/// CSV rows "frequency_hz,re,im,group,l" for plotting against measured spectra.
std::string line_table_csv(const std::vector<SpectralLine>& lines);

}  // namespace beatsync::theory
