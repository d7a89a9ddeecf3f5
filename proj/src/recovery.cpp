#include "beatsync/recovery.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>

namespace beatsync {

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lo = *std::max_element(v.begin(), v.begin() + mid);
    m = 0.5 * (m + lo);
  }
  return m;
}

double positive_mod(double x, double m) {
  double r = std::fmod(x, m);
  if (r < 0) r += m;
  return r;
}

struct DerivativeStats {
  double mean = 0;
  double sem = 0;      // standard error of the mean
  std::size_t pairs = 0;
};

// Average adjacent derivative D-bar = mean |y_{i+1} - y_i| / (k_{i+1} - k_i).
DerivativeStats average_derivative(const FilteredDataset& d) {
  DerivativeStats s;
  if (d.size() < 2) return s;
  double sum = 0, sumsq = 0;
  for (std::size_t i = 1; i < d.size(); ++i) {
    const double dd = std::abs(d.y_s[i] - d.y_s[i - 1]) /
                      static_cast<double>(d.k[i] - d.k[i - 1]);
    sum += dd;
    sumsq += dd * dd;
  }
  s.pairs = d.size() - 1;
  s.mean = sum / static_cast<double>(s.pairs);
  const double var = std::max(0.0, sumsq / static_cast<double>(s.pairs) - s.mean * s.mean);
  s.sem = std::sqrt(var / static_cast<double>(s.pairs));
  return s;
}

}  // namespace

double default_epsilon_threshold(double tau_s, double jitter_sigma_s) {
  return std::min(std::max(4.0 * jitter_sigma_s, 0.05 * tau_s), 0.25 * tau_s);
}

CountSeries bin_counts(const TimeTagSeries& tags, const SampleConfig& sample, TimeInstant start) {
  CountSeries out;
  out.bin_duration_fs = sample.bin_duration_fs;
  out.start = start;
  const std::int64_t n = sample.bin_count();
  out.counts = Eigen::VectorXd::Zero(n);
  const std::int64_t span = sample.sample_duration_fs;
  for (const auto& t : tags.tags) {
    const std::int64_t d = t - start;
    if (d < 0 || d >= span) continue;
    out.counts[d / sample.bin_duration_fs] += 1.0;
  }
  return out;
}

TimeTagSeries digital_gate_filter(const TimeTagSeries& tags, const GateSchedule& gates) {
  TimeTagSeries out;
  out.origin_note = tags.origin_note + " | digital gates";
  const double period = gates.period_fs();
  const double half_gate = static_cast<double>(gates.gate_width_fs) / 2.0;
  for (const auto& t : tags.tags) {
    double r = std::fmod(static_cast<double>(t.fs - gates.delay.fs), period);
    if (r > period / 2) r -= period;
    if (r < -period / 2) r += period;
    if (std::abs(r) <= half_gate) out.tags.push_back(t);
  }
  return out;
}

Spectrum fft_spectrum(const CountSeries& series) {
  const Eigen::Index n = series.counts.size();
  if (n < 2) throw std::invalid_argument("fft_spectrum needs at least two bins");
  Spectrum s;
  Eigen::FFT<double> fft;
  fft.fwd(s.amplitudes, series.counts);
  s.psd = s.amplitudes.array().abs2() / static_cast<double>(n);
  s.frequency_resolution_hz = 1.0 / series.sample_seconds();
  return s;
}

CoarseEstimate find_beat_peak(const Spectrum& spectrum, double gate_freq_hz) {
  const Eigen::Index n = spectrum.psd.size();
  const Eigen::Index k_hi = n / 2;  // conjugate half, DC excluded
  if (k_hi < 1) throw RecoveryError(RecoveryIssue::no_peak, "spectrum too short");

  double peak = 0;
  for (Eigen::Index k = 1; k <= k_hi; ++k) peak = std::max(peak, spectrum.psd[k]);

  std::vector<double> band(spectrum.psd.data() + 1, spectrum.psd.data() + k_hi + 1);
  const double floor_med = median_of(std::move(band));

  const bool fp_noise = spectrum.psd[0] > 0 && peak < 1e-18 * spectrum.psd[0];
  if (peak <= 0 || peak < 3.0 * floor_med || fp_noise)
    throw RecoveryError(RecoveryIssue::no_peak,
                        "no spectral peak clears 3x the median noise floor");

  // First peak, not global argmax: the beat harmonics (and their aliases)
  // carry near-equal power, so the lowest bin within 3 dB of the maximum is
  // the beat line itself.
  Eigen::Index k_p = 0;
  for (Eigen::Index k = 1; k <= k_hi; ++k) {
    if (spectrum.psd[k] >= 0.5 * peak) {
      k_p = k;
      break;
    }
  }

  CoarseEstimate c;
  c.k_p = static_cast<int>(k_p);
  c.beat_hz = static_cast<double>(k_p) * spectrum.frequency_resolution_hz;
  c.abs_period_delta_s = c.beat_hz / (gate_freq_hz * gate_freq_hz);
  c.snr_observed = floor_med > 0 ? peak / floor_med : 1e300;
  return c;
}

TimeTagSeries drop_close_followers(const TimeTagSeries& tags, std::int64_t guard_gap_fs) {
  if (guard_gap_fs <= 0 || tags.size() < 2) return tags;
  TimeTagSeries out;
  out.origin_note = tags.origin_note + " | gap guard";
  out.tags.reserve(tags.size());
  out.tags.push_back(tags.tags.front());
  for (std::size_t i = 1; i < tags.size(); ++i) {
    if (tags.tags[i] - out.tags.back() >= guard_gap_fs) out.tags.push_back(tags.tags[i]);
  }
  return out;
}

FilteredDataset recentre_and_filter(const TimeTagSeries& tags, double tau_coa_s,
                                    double eps_th_s) {
  if (tags.empty()) throw std::invalid_argument("recentre_and_filter: empty tag stream");
  if (!(eps_th_s > 0) || !(eps_th_s < tau_coa_s / 2))
    throw std::invalid_argument("recentre_and_filter: need 0 < eps_th < tau/2");

  FilteredDataset d;
  d.modulus_s = tau_coa_s;
  d.epsilon_s = eps_th_s;
  d.pivot_index = tags.size() / 2;

  const TimeInstant t0 = tags.front();
  const double pivot_s = seconds_from_fs(tags.tags[d.pivot_index] - t0);

  d.k.reserve(tags.size());
  d.y_s.reserve(tags.size());
  for (const auto& t : tags.tags) {
    const double rel = seconds_from_fs(t - t0);
    const double y = positive_mod(rel - pivot_s + tau_coa_s / 2, tau_coa_s);
    if (y <= eps_th_s || tau_coa_s - y <= eps_th_s) continue;
    const auto k = static_cast<std::int64_t>(std::floor(rel / tau_coa_s));
    if (!d.k.empty() && k <= d.k.back()) continue;  // keep k strictly increasing
    d.k.push_back(k);
    d.y_s.push_back(y);
  }
  if (d.k.empty())
    throw RecoveryError(RecoveryIssue::empty_after_filter,
                        "no residues survive the edge filter");
  return d;
}

SignDecision identify_sign(const TimeTagSeries& tags, double tau_b_s, double abs_delta_s,
                           double eps_th_s) {
  if (!(abs_delta_s > 0) || !(abs_delta_s < tau_b_s))
    throw std::invalid_argument("identify_sign: need 0 < |delta| < tau_B");

  FilteredDataset plus = recentre_and_filter(tags, tau_b_s + abs_delta_s, eps_th_s);
  FilteredDataset minus = recentre_and_filter(tags, tau_b_s - abs_delta_s, eps_th_s);
  const DerivativeStats dp = average_derivative(plus);
  const DerivativeStats dm = average_derivative(minus);
  if (dp.pairs == 0 || dm.pairs == 0)
    throw RecoveryError(RecoveryIssue::empty_after_filter,
                        "too few residue pairs to compare derivatives");

  // Per-event jitter puts the same additive floor under both averages, so
  // the raw ratio alone can sit near 1 while the difference is still many
  // standard errors wide. Call it ambiguous only when the ratio is small
  // AND the difference is statistically insignificant.
  const double lo = std::min(dp.mean, dm.mean);
  const double hi = std::max(dp.mean, dm.mean);
  const double se = std::sqrt(dp.sem * dp.sem + dm.sem * dm.sem);
  const bool ratio_small = hi < 2.0 * lo;
  const bool insignificant = std::abs(dp.mean - dm.mean) < 4.0 * se;
  if ((ratio_small && insignificant) || dp.mean == dm.mean)
    throw RecoveryError(RecoveryIssue::ambiguous_sign,
                        "derivative averages too close to identify the sign");

  SignDecision out;
  out.d_plus = dp.mean;
  out.d_minus = dm.mean;
  if (dp.mean < dm.mean) {
    out.sign = +1;
    out.data = std::move(plus);
  } else {
    out.sign = -1;
    out.data = std::move(minus);
  }
  return out;
}

LsrResult lsr_fine_tune(const FilteredDataset& data) {
  const std::size_t n = data.size();
  if (n < 2) throw std::invalid_argument("lsr_fine_tune: need at least two points");

  double kbar = 0, ybar = 0;
  for (std::size_t i = 0; i < n; ++i) {
    kbar += static_cast<double>(data.k[i]);
    ybar += data.y_s[i];
  }
  kbar /= static_cast<double>(n);
  ybar /= static_cast<double>(n);

  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dk = static_cast<double>(data.k[i]) - kbar;
    sxx += dk * dk;
    sxy += dk * (data.y_s[i] - ybar);
  }
  if (sxx == 0)
    throw RecoveryError(RecoveryIssue::degenerate_abscissa, "all round indices equal");

  LsrResult r;
  r.slope_s = sxy / sxx;
  double ssr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double resid =
        (data.y_s[i] - ybar) - r.slope_s * (static_cast<double>(data.k[i]) - kbar);
    ssr += resid * resid;
  }
  r.residual_std_s = std::sqrt(ssr / static_cast<double>(n));
  return r;
}

RecoveryEstimate recover_frequency(const TimeTagSeries& tags, double tau_b_s,
                                   const SampleConfig& sample, double eps_th_s,
                                   std::int64_t guard_gap_fs) {
  if (tags.empty()) throw std::invalid_argument("recover_frequency: empty tag stream");

  const CountSeries counts = bin_counts(tags, sample, tags.front());
  const Spectrum spec = fft_spectrum(counts);
  const CoarseEstimate coarse = find_beat_peak(spec, 1.0 / tau_b_s);
  const TimeTagSeries guarded = drop_close_followers(tags, guard_gap_fs);
  const SignDecision sd =
      identify_sign(guarded, tau_b_s, coarse.abs_period_delta_s, eps_th_s);
  const LsrResult lsr = lsr_fine_tune(sd.data);

  RecoveryEstimate e;
  e.coarse = coarse;
  e.sign = sd.sign;
  e.tau_fin_s = lsr.slope_s;
  const double tau_coa = tau_b_s + sd.sign * coarse.abs_period_delta_s;
  e.period_s = tau_coa + lsr.slope_s;
  e.frequency_hz = 1.0 / e.period_s;
  e.retained_points = sd.data.size();
  e.mean_residue_s =
      std::accumulate(sd.data.y_s.begin(), sd.data.y_s.end(), 0.0) /
      static_cast<double>(sd.data.size());
  e.d_plus = sd.d_plus;
  e.d_minus = sd.d_minus;
  return e;
}

RecoveryEstimate track(const TimeTagSeries& window, double current_tau_b_s, double eps_th_s,
                       TimeInstant frame_origin, double frame_origin_frac_fs,
                       std::int64_t guard_gap_fs) {
  if (window.empty())
    throw RecoveryError(RecoveryIssue::empty_after_filter, "track: empty window");

  const TimeTagSeries guarded = drop_close_followers(window, guard_gap_fs);
  FilteredDataset d;
  d.modulus_s = current_tau_b_s;
  d.epsilon_s = eps_th_s;
  for (const auto& t : guarded.tags) {
    const double rel =
        (static_cast<double>(t.fs - frame_origin.fs) - frame_origin_frac_fs) / kFsPerSecond;
    const double y = positive_mod(rel, current_tau_b_s);
    if (y <= eps_th_s || current_tau_b_s - y <= eps_th_s) continue;
    const auto k = static_cast<std::int64_t>(std::floor(rel / current_tau_b_s));
    if (!d.k.empty() && k <= d.k.back()) continue;
    d.k.push_back(k);
    d.y_s.push_back(y);
  }
  if (d.size() < 2)
    throw RecoveryError(RecoveryIssue::empty_after_filter,
                        "track: lock lost, too few residues in the window");

  const LsrResult lsr = lsr_fine_tune(d);

  RecoveryEstimate e;
  e.sign = lsr.slope_s >= 0 ? +1 : -1;
  e.tau_fin_s = lsr.slope_s;
  e.period_s = current_tau_b_s + lsr.slope_s;
  e.frequency_hz = 1.0 / e.period_s;
  e.retained_points = d.size();
  e.mean_residue_s = std::accumulate(d.y_s.begin(), d.y_s.end(), 0.0) /
                     static_cast<double>(d.size());
  e.delay_correction.fs = fs_from_seconds(current_tau_b_s / 2 - e.mean_residue_s);
  return e;
}

TimeInstant delay_scan(const std::function<double(TimeInstant)>& rate_probe, double tau_b_s,
                       std::int64_t gate_width_fs) {
  const std::int64_t tau_fs = fs_from_seconds(tau_b_s);
  const std::int64_t step = std::max<std::int64_t>(1, gate_width_fs / 2);
  std::vector<std::int64_t> delays;
  std::vector<double> rates;
  for (std::int64_t d = 0; d < tau_fs; d += step) {
    delays.push_back(d);
    rates.push_back(rate_probe(TimeInstant{d}));
  }

  const double peak = *std::max_element(rates.begin(), rates.end());
  const double floor_med = median_of(rates);
  if (peak <= 0 || peak < 3.0 * floor_med)
    throw RecoveryError(RecoveryIssue::not_found, "no delay shows a case-1 count rate");
  const double threshold = std::max(0.5 * peak, 3.0 * floor_med);

  // Rate-weighted circular centroid of the live (case-1) steps.
  double cx = 0, cy = 0;
  const double two_pi = 6.283185307179586476925287;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (rates[i] < threshold) continue;
    const double ang = two_pi * static_cast<double>(delays[i]) / static_cast<double>(tau_fs);
    cx += rates[i] * std::cos(ang);
    cy += rates[i] * std::sin(ang);
  }
  double ang = std::atan2(cy, cx);
  if (ang < 0) ang += two_pi;
  return TimeInstant{round_fs(ang / two_pi * static_cast<double>(tau_fs))};
}

LegacyResult legacy_recover(const TimeTagSeries& tags, double sample_rate_hz,
                            std::int64_t duration_fs, DecimatedPsd* decimated) {
  if (tags.empty()) throw std::invalid_argument("legacy_recover: empty tag stream");

  const double tau_s_fs = kFsPerSecond / sample_rate_hz;
  const auto n = static_cast<std::int64_t>(std::llround(static_cast<double>(duration_fs) / tau_s_fs));
  if (n < 2) throw std::invalid_argument("legacy_recover: window too short");

  const TimeInstant t0 = tags.front();
  std::vector<float> x(static_cast<std::size_t>(n), 0.0f);
  for (const auto& t : tags.tags) {
    const double d = static_cast<double>(t - t0);
    if (d < 0 || d >= static_cast<double>(duration_fs)) continue;
    const auto idx = static_cast<std::int64_t>(d / tau_s_fs);
    if (idx >= 0 && idx < n) x[static_cast<std::size_t>(idx)] = 1.0f;
  }

  Eigen::FFT<float> fft;
  fft.SetFlag(Eigen::FFT<float>::HalfSpectrum);
  std::vector<std::complex<float>> spec;
  const auto fft_begin = std::chrono::steady_clock::now();
  fft.fwd(spec, x);
  const auto fft_end = std::chrono::steady_clock::now();

  std::vector<float>().swap(x);  // the spectrum dominates memory from here on

  const std::size_t k_hi = spec.size() - 1;
  std::vector<float> psd(spec.size());
  for (std::size_t k = 0; k < spec.size(); ++k) psd[k] = std::norm(spec[k]);

  float peak = 0;
  for (std::size_t k = 1; k <= k_hi; ++k) peak = std::max(peak, psd[k]);
  std::size_t k_p = 0;
  for (std::size_t k = 1; k <= k_hi; ++k) {
    if (psd[k] >= 0.5f * peak) {
      k_p = k;
      break;
    }
  }

  if (decimated) {
    decimated->rows.clear();
    decimated->block = std::max<std::int64_t>(1, static_cast<std::int64_t>(k_hi) / 20000);
    for (std::size_t lo = 1; lo <= k_hi; lo += static_cast<std::size_t>(decimated->block)) {
      const std::size_t hi = std::min(lo + static_cast<std::size_t>(decimated->block), k_hi + 1);
      std::size_t best = lo;
      for (std::size_t k = lo + 1; k < hi; ++k)
        if (psd[k] > psd[best]) best = k;
      decimated->rows.emplace_back(static_cast<std::int64_t>(best),
                                   static_cast<double>(psd[best]));
    }
  }

  const std::size_t mid = 1 + (psd.size() - 1) / 2;
  std::nth_element(psd.begin() + 1, psd.begin() + mid, psd.end());
  const float floor_med = psd[mid];
  if (peak <= 0 || peak < 3.0f * floor_med)
    throw RecoveryError(RecoveryIssue::no_peak, "legacy spectrum shows no line");

  LegacyResult r;
  r.perf.sample_count = static_cast<std::uint64_t>(n);
  r.perf.fft_seconds = std::chrono::duration<double>(fft_end - fft_begin).count();
  r.perf.spectrum_bytes = spec.size() * sizeof(std::complex<float>);

  const double duration_s = seconds_from_fs(duration_fs);
  r.f_coa_hz = static_cast<double>(k_p) / duration_s;
  const double tau_coa = 1.0 / r.f_coa_hz;

  // fine stage exactly as the original: residues referenced to the first
  // tag, no recentring, no edge filter
  FilteredDataset d;
  d.modulus_s = tau_coa;
  for (const auto& t : tags.tags) {
    const double rel = seconds_from_fs(t - t0);
    const auto k = static_cast<std::int64_t>(std::floor(rel / tau_coa));
    if (!d.k.empty() && k <= d.k.back()) continue;
    d.k.push_back(k);
    d.y_s.push_back(positive_mod(rel, tau_coa));
  }
  const LsrResult lsr = lsr_fine_tune(d);
  r.tau_fin_s = lsr.slope_s;
  r.frequency_hz = 1.0 / (tau_coa + lsr.slope_s);
  return r;
}

}  // namespace beatsync
