#include "beatsync/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

namespace beatsync::theory {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

double deadtime_rate(double q, double dead_time_rounds, double afterpulse_prob) {
  if (!(q > 0) || q > 1) throw std::domain_error("deadtime_rate: Q must lie in (0,1]");
  if (dead_time_rounds < 0) throw std::domain_error("deadtime_rate: T_d must be >= 0");
  return q / (1.0 + dead_time_rounds * q * (1.0 + afterpulse_prob));
}

double jitter_attenuation(double f_hz, double sigma_s) {
  const double x = kPi * f_hz * sigma_s;
  return std::exp(-2.0 * x * x);
}

std::complex<double> transfer_H(double f_hz, double q, double q_ap, double lambda_per_s,
                                double dead_time_s, double sigma_s) {
  if (!(lambda_per_s > 0)) throw std::domain_error("transfer_H: lambda must be > 0");
  const double w = 2.0 * kPi * f_hz;
  const std::complex<double> ap =
      q_ap * (lambda_per_s / std::complex<double>(lambda_per_s, w)) *
      std::exp(std::complex<double>(0.0, -w * dead_time_s));
  return (q + ap) * jitter_attenuation(f_hz, sigma_s);
}

std::vector<SpectralLine> gated_line_table(double f_a_hz, double f_b_hz, double gate_width_s,
                                           const TransferParams& h, int l_max, int m_max) {
  if (!(f_a_hz > 0) || !(f_b_hz > 0)) throw std::domain_error("gated_line_table: f > 0 required");
  if (gate_width_s > 1.0 / f_b_hz + 1e-30)
    throw std::domain_error("gated_line_table: gate wider than the period");

  const double delta_f = f_a_hz - f_b_hz;
  const double scale = gate_width_s * f_a_hz * f_b_hz;

  std::map<double, SpectralLine> by_freq;
  for (int l = -l_max; l <= l_max; ++l) {
    const double envelope = scale * sinc(l * kPi * f_b_hz * gate_width_s);
    for (int m = -m_max; m <= m_max; ++m) {
      const double f = (l + m) * f_a_hz - l * delta_f;
      const std::complex<double> amp =
          envelope * transfer_H(f - l * f_a_hz, h.q, h.q_ap, h.lambda_per_s, h.dead_time_s,
                                h.sigma_s);
      auto [it, fresh] = by_freq.try_emplace(f);
      if (fresh) {
        it->second.frequency_hz = f;
        it->second.group_index = l + m;
        it->second.l_index = l;
      }
      it->second.amplitude += amp;
    }
  }

  std::vector<SpectralLine> lines;
  lines.reserve(by_freq.size());
  for (auto& [f, line] : by_freq) lines.push_back(line);
  return lines;
}

PsdPrediction psd_predict(double rounds_qubit_bin, double rounds_per_bin, double q_q,
                          double q_v, int bins_per_beat, int half_bins) {
  if (bins_per_beat < 2) throw std::domain_error("psd_predict: L >= 2 required");
  if (half_bins < bins_per_beat) throw std::domain_error("psd_predict: M >= L required");
  if (!(q_v >= 0 && q_v <= q_q && q_q <= 1))
    throw std::domain_error("psd_predict: need 0 <= Q_v <= Q_q <= 1");

  const double n_q_rounds = rounds_qubit_bin;       // N_q
  const double n_s_rounds = rounds_per_bin;         // N'_s
  const double n_v_rounds = n_s_rounds - n_q_rounds;  // N'_v
  const double L = bins_per_beat;
  const double two_m = 2.0 * half_bins;

  PsdPrediction p;
  p.bins_per_beat = bins_per_beat;
  p.half_bins = half_bins;
  p.n_q = n_q_rounds * q_q + n_v_rounds * q_v;
  p.n_v = n_s_rounds * q_v;
  p.var_q = n_q_rounds * q_q * (1 - q_q) + n_v_rounds * q_v * (1 - q_v);
  p.var_v = n_s_rounds * q_v * (1 - q_v);
  p.gamma1 = (2.0 / L) * p.n_q * p.n_v + ((L - 2.0) / L) * p.n_v * p.n_v;
  p.gamma2 = (1.0 / L) * p.n_q * p.n_q + ((L - 1.0) / L) * p.n_v * p.n_v;

  const double var_mix = p.var_q / L + (L - 1.0) / L * p.var_v;
  p.s_noi = var_mix;
  p.s_bf = (two_m / L) * (p.gamma2 - p.gamma1) + var_mix;
  p.s_dc = p.s_bf + two_m * p.gamma1;

  p.beat_periods = two_m / L;
  p.n_q_prime = n_q_rounds * (q_q - q_v);
  p.n_bt = p.n_q_prime + L * n_s_rounds * q_v;
  p.r_q = p.n_bt > 0 ? p.n_q_prime / p.n_bt : 0.0;
  p.snr = p.beat_periods * p.r_q * p.n_q_prime + 1.0;
  return p;
}

double fine_tune_std(double sigma_s, double q, double n_rounds) {
  if (!(q > 0) || q > 1) throw std::domain_error("fine_tune_std: Q must lie in (0,1]");
  if (n_rounds < 2) throw std::domain_error("fine_tune_std: need N >= 2");
  return std::sqrt(24.0) * sigma_s / (std::sqrt(q) * std::pow(n_rounds, 1.5));
}

double expected_dft_line(double n_q, double n_v, int bins_per_beat, int half_bins, int k) {
  const int two_m = 2 * half_bins;
  if (bins_per_beat <= 0 || two_m % bins_per_beat != 0)
    throw std::domain_error("expected_dft_line: L must divide 2M");
  const double L = bins_per_beat;
  if (k == 0) return two_m * (n_q / L + n_v * (L - 1.0) / L);
  if (k % (two_m / bins_per_beat) == 0) return two_m * (n_q - n_v) / L;
  return 0.0;
}

std::string line_table_csv(const std::vector<SpectralLine>& lines) {
  std::string out = "frequency_hz,re,im,group,l\n";
  char buf[160];
  for (const auto& ln : lines) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d,%d\n", ln.frequency_hz,
                  ln.amplitude.real(), ln.amplitude.imag(), ln.group_index, ln.l_index);
    out += buf;
  }
  return out;
}

}  // namespace beatsync::theory
