#include "beatsync/experiments.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "beatsync/detector_sim.hpp"
#include "beatsync/tag_io.hpp"

namespace beatsync {

namespace {

using nlohmann::json;

RngHandle trial_handle(std::uint64_t seed, std::uint64_t block, std::uint64_t trial) {
  return RngHandle{seed, block * 1000003ULL + trial + 1};
}

std::int64_t rounds_for(double seconds, double f_hz) {
  return static_cast<std::int64_t>(std::llround(seconds * f_hz));
}

/// Simulates slightly past the sample window so the binned span is covered.
SimRunResult simulate_window(const Config& c, RngHandle handle, double seconds) {
  const std::int64_t n = rounds_for(seconds * 1.01 + 2.0 / c.gates.f_b_hz, c.clock_a.f_hz);
  return simulate(c.protocol, c.detector, c.gates, c.clock_a, n, handle);
}

double epsilon_for(const Config& c) {
  return default_epsilon_threshold(1.0 / c.gates.f_b_hz, c.detector.jitter_sigma_fs / kFsPerSecond);
}

// Temporal afterpulse filter width for the residue stages: dead time plus
// five decay times catches essentially every afterpulse.
std::int64_t guard_for(const Config& c) {
  std::int64_t g = c.detector.dead_time_fs;
  if (c.detector.afterpulse_prob > 0)
    g += static_cast<std::int64_t>(std::llround(5.0 / c.detector.afterpulse_rate_per_fs));
  return g;
}

/// Channel transmittance that makes the in-gate qubit count per beat equal
/// n_q_prime, given the gate duty cycle and the mean intensity.
double transmittance_for_counts(const Config& c, double n_q_prime, double beat_hz) {
  const double rounds_per_beat = c.gates.f_b_hz / beat_hz;
  const double n_q_rounds = static_cast<double>(c.detector.gate_width_fs) / kFsPerSecond *
                            c.gates.f_b_hz * rounds_per_beat;
  const double q_qubit = n_q_prime / (n_q_rounds * (1.0 - c.detector.dark_prob));
  const double x = -std::log1p(-q_qubit);
  return x / (c.protocol.mean_intensity() * c.detector.efficiency);
}

}  // namespace

SpectrumRunResult run_fast_spectrum(const Config& config, std::uint64_t seed) {
  SpectrumRunResult out;
  const auto sim = simulate_window(config, RngHandle{seed, 0}, config.run_duration_s);
  const TimeInstant start = sim.tags.empty() ? TimeInstant{0} : sim.tags.front();
  out.counts = bin_counts(sim.tags, config.sample, start);
  out.spectrum = fft_spectrum(out.counts);
  try {
    out.peak = find_beat_peak(out.spectrum, config.gates.f_b_hz);
  } catch (const RecoveryError& e) {
    out.error = e.what();
  }
  return out;
}

RecoveryTrial run_recovery_trial(const Config& config, std::uint64_t seed) {
  RecoveryTrial out;
  out.true_f_hz = config.clock_a.f_hz;
  const auto sim = simulate_window(config, RngHandle{seed, 0}, config.run_duration_s);
  try {
    out.estimate = recover_frequency(sim.tags, 1.0 / config.gates.f_b_hz, config.sample,
                                     epsilon_for(config), guard_for(config));
  } catch (const RecoveryError& e) {
    out.error = e.what();
  }
  return out;
}

Config track_config(const std::string& system) {
  Config c = default_config();
  c.run_duration_s = 200.0;
  c.track_interval_s = 2.0;
  if (system == "1GHz") {
    c.clock_a.f_hz = 1e9;
    c.clock_b.f_hz = 1e9;
    c.gates.f_b_hz = 1e9;
    c.detector.gate_width_fs = 300000;  // 0.3 ns, inside the 1 ns period
    c.gates.gate_width_fs = 300000;
    c.clock_a.fast_drift_var = 1.6e-15;  // 4e-8 Hz per-round std
    c.clock_a.slow_drift_var = 1.6e-19;
  } else {
    c.clock_a.f_hz = 2e7;  // aligned start; drift opens the gap
    c.clock_a.fast_drift_var = 6.4e-15;  // 8e-8 Hz per-round std
    c.clock_a.slow_drift_var = 6.4e-19;
  }
  return c;
}

TrackRunResult run_track_pair(const Config& config, std::uint64_t seed) {
  const double interval_s = config.track_interval_s;
  const auto n_chunks =
      static_cast<int>(std::llround(config.run_duration_s / interval_s));
  const std::int64_t rounds_per_chunk = rounds_for(interval_s, config.clock_a.f_hz);
  const RngHandle rng{seed, 0};

  struct Arm {
    ClockState a;
    double f_b;
    PhaseAccumulator gate;  // center of the next chunk's first gate
    std::uint64_t round = 0;
    TrackTrace trace;
  };
  Arm tracked{config.clock_a, config.gates.f_b_hz,
              PhaseAccumulator{config.gates.delay, 0.0}};
  Arm untracked = tracked;

  auto run_chunk = [&](Arm& arm, bool do_track, int chunk) {
    GateSchedule g = config.gates;
    g.f_b_hz = arm.f_b;
    SimOptions opts;
    opts.start_round = arm.round;
    opts.stream_salt = static_cast<std::uint64_t>(chunk) + 1;
    opts.gate_origin = arm.gate;
    const PhaseAccumulator chunk_gate0 = arm.gate;
    auto res =
        simulate(config.protocol, config.detector, g, arm.a, rounds_per_chunk, rng, opts);

    const double t_s = (chunk + 1) * interval_s;
    const double tau_b_fs = kFsPerSecond / arm.f_b;
    PhaseAccumulator pulse{res.final_clock_a.phase, res.final_clock_a.phase_frac_fs};
    const double off_fs = pulse.minus(res.final_gate_center);
    TrackTrace::Row row;
    row.t_s = t_s;
    row.delta_f_hz = res.final_clock_a.f_hz - arm.f_b;
    row.arrival_misalign_ps = off_fs / 1000.0;
    row.round_misalign = std::llround(off_fs / tau_b_fs);
    arm.trace.rows.push_back(row);

    PhaseAccumulator next_gate = res.final_gate_center;
    if (do_track) {
      const double tau_b_s = 1.0 / arm.f_b;
      const double eps = default_epsilon_threshold(
          tau_b_s, config.detector.jitter_sigma_fs / kFsPerSecond);
      PhaseAccumulator origin = chunk_gate0;
      origin.advance(-0.5 * tau_b_fs);
      try {
        const auto est =
            track(res.tags, tau_b_s, eps, origin.t, origin.frac, guard_for(config));
        next_gate.advance(-static_cast<double>(est.delay_correction.fs));
        arm.f_b = est.frequency_hz;
      } catch (const RecoveryError& e) {
        arm.trace.events.emplace_back(t_s, std::string("lock-lost: ") + e.what());
        try {
          SampleConfig sc;
          sc.sample_duration_fs = fs_from_seconds(interval_s);
          sc.bin_duration_fs = 40000000000LL;  // 25 kHz re-acquisition sampling
          sc.target_resolution_hz = 1.0 / interval_s;
          sc.max_expected_beat_hz = 12500.0;
          const auto est = recover_frequency(res.tags, tau_b_s, sc, eps, guard_for(config));
          arm.f_b = est.frequency_hz;
          arm.trace.events.emplace_back(t_s, "re-acquired");
        } catch (const std::exception& e2) {
          arm.trace.events.emplace_back(t_s, std::string("re-acquire failed: ") + e2.what());
        }
      }
    }
    arm.a = res.final_clock_a;
    arm.gate = next_gate;
    arm.round += static_cast<std::uint64_t>(rounds_per_chunk);
  };

  for (int chunk = 0; chunk < n_chunks; ++chunk) {
    run_chunk(tracked, true, chunk);
    run_chunk(untracked, false, chunk);
  }

  return {std::move(tracked.trace), std::move(untracked.trace)};
}

double measured_snr(const Spectrum& spectrum, int k_p) {
  const Eigen::Index k_hi = spectrum.psd.size() / 2;
  double sum = 0;
  Eigen::Index n = 0;
  for (Eigen::Index k = 1; k <= k_hi; ++k) {
    const Eigen::Index near = k % k_p;
    if (near <= 1 || near >= k_p - 1) continue;  // drop harmonics +/- one bin
    sum += spectrum.psd[k];
    ++n;
  }
  if (n == 0) return 0;
  return spectrum.psd[k_p] / (sum / static_cast<double>(n));
}

namespace {

SweepPoint sweep_point(const Config& c, std::uint64_t seed, std::uint64_t block, int trials,
                       double beat_hz) {
  std::vector<double> snrs;
  for (int t = 0; t < trials; ++t) {
    const auto sim = simulate(c.protocol, c.detector, c.gates, c.clock_a,
                              rounds_for(c.run_duration_s * 1.01, c.clock_a.f_hz),
                              trial_handle(seed, block, static_cast<std::uint64_t>(t)));
    const TimeInstant start = sim.tags.empty() ? TimeInstant{0} : sim.tags.front();
    const auto counts = bin_counts(sim.tags, c.sample, start);
    const auto spec = fft_spectrum(counts);
    const auto expected_kp = static_cast<int>(std::llround(beat_hz * c.sample.sample_seconds()));
    snrs.push_back(measured_snr(spec, expected_kp));
  }
  SweepPoint p;
  p.trials = trials;
  p.snr_mean = mean_of(snrs);
  p.snr_sem = std::sqrt(variance_of(snrs) / static_cast<double>(snrs.size()));
  return p;
}

}  // namespace

std::vector<SweepPoint> run_counts_sweep(const Config& config, std::uint64_t seed, int trials) {
  const double beat_hz = std::abs(config.clock_a.f_hz - config.gates.f_b_hz);
  const double k_periods = config.run_duration_s * beat_hz;
  const double rounds_per_beat = config.gates.f_b_hz / beat_hz;

  std::vector<SweepPoint> out;
  for (int i = 0; i <= 10; ++i) {  // 80 .. 800 in 1 dB steps
    const double total_qubit_counts = 80.0 * std::pow(10.0, i / 10.0);
    const double n_q_prime = total_qubit_counts / k_periods;
    Config c = config;
    c.protocol.channel_transmittance = transmittance_for_counts(c, n_q_prime, beat_hz);
    c.detector.dark_prob = n_q_prime / (4.0 * rounds_per_beat);  // keeps r = 4/5
    SweepPoint p = sweep_point(c, seed, static_cast<std::uint64_t>(i), trials, beat_hz);
    p.x = n_q_prime;
    p.aux = total_qubit_counts;
    out.push_back(p);
  }
  return out;
}

std::vector<SweepPoint> run_k_sweep(const Config& config, std::uint64_t seed, int trials) {
  const double beat_hz = std::abs(config.clock_a.f_hz - config.gates.f_b_hz);

  std::vector<SweepPoint> out;
  for (int i = 1; i <= 10; ++i) {  // K = 200 .. 2000, i.e. 1 s .. 10 s of data
    const double duration_s = static_cast<double>(i);
    const double k_periods = duration_s * beat_hz;
    Config c = config;
    c.run_duration_s = duration_s;
    c.sample.sample_duration_fs = fs_from_seconds(duration_s);
    c.sample.target_resolution_hz = 1.0 / duration_s;
    // fixed per-beat rates: 0.4 qubit counts per beat, defaults' dark level
    c.protocol.channel_transmittance = transmittance_for_counts(c, 0.4, beat_hz);
    SweepPoint p = sweep_point(c, seed, 100 + static_cast<std::uint64_t>(i), trials, beat_hz);
    p.x = k_periods;
    p.aux = duration_s;
    out.push_back(p);
  }
  return out;
}

namespace {

struct MismatchTrial {
  double true_delta_hz = 0;
  RecoveryTrial result;
};

MismatchTrial mismatch_trial(const Config& base, std::uint64_t seed, std::uint64_t block,
                             std::uint64_t trial) {
  MismatchTrial out;
  RngStream delta_stream(RngHandle{seed, 999983ULL * (block + 1)});
  out.true_delta_hz = (2.0 * delta_stream.uniform01_at(trial) - 1.0) * 1e4;

  Config c = base;
  c.clock_a.f_hz = c.gates.f_b_hz + out.true_delta_hz;
  c.sample.bin_duration_fs = 40000000000LL;  // 25 kHz, Nyquist-safe for 10 kHz beats
  c.sample.max_expected_beat_hz = 12500.0;
  const std::uint64_t trial_seed =
      detail::mix64(seed ^ ((block * 1000003ULL + trial + 1) * detail::kGolden));
  out.result = run_recovery_trial(c, trial_seed);
  return out;
}

}  // namespace

std::vector<ResolutionPoint> run_resolution_sweep(const Config& config, std::uint64_t seed,
                                                  int trials_per_level,
                                                  const std::vector<double>& transmittances) {
  std::vector<ResolutionPoint> out;
  std::uint64_t block = 0;
  for (double t : transmittances) {
    Config level = config;
    level.protocol.channel_transmittance = t;
    ResolutionPoint p;
    p.q_yield = yield_per_round(level.protocol, level.detector);
    p.trials = trials_per_level;
    double err_sum = 0;
    int ok = 0;
    for (int i = 0; i < trials_per_level; ++i) {
      const auto trial =
          mismatch_trial(level, seed + block, block, static_cast<std::uint64_t>(i));
      if (!trial.result.estimate) {
        ++p.failures;
        continue;
      }
      const auto& est = *trial.result.estimate;
      const int expected_sign = trial.true_delta_hz < 0 ? +1 : -1;
      if (est.sign != expected_sign) ++p.wrong_sign;
      err_sum += std::abs(est.frequency_hz - trial.result.true_f_hz);
      ++ok;
    }
    p.mean_abs_error_hz = ok > 0 ? err_sum / ok : 0.0;
    out.push_back(p);
    ++block;
  }
  return out;
}

SignCampaign run_sign_campaign(const Config& config, std::uint64_t seed, int trials) {
  SignCampaign c;
  c.trials = trials;
  for (int i = 0; i < trials; ++i) {
    const auto trial = mismatch_trial(config, seed, 7000, static_cast<std::uint64_t>(i));
    if (!trial.result.estimate) {
      if (trial.result.error.find("sign") != std::string::npos)
        ++c.ambiguous;
      else
        ++c.failed;
      continue;
    }
    const int expected_sign = trial.true_delta_hz < 0 ? +1 : -1;
    if (trial.result.estimate->sign == expected_sign) ++c.correct;
  }
  return c;
}

IsserlisResult run_psd_variance(const Config& config, std::uint64_t seed, int runs) {
  IsserlisResult out;
  out.runs = runs;
  std::vector<double> ratios;
  for (int r = 0; r < runs; ++r) {
    const auto sr = run_fast_spectrum(config, seed + static_cast<std::uint64_t>(r));
    if (!sr.peak) continue;
    const int k_p = sr.peak->k_p;
    const Eigen::Index k_hi = sr.spectrum.psd.size() / 2;
    std::vector<double> band;
    for (Eigen::Index k = 1; k <= k_hi; ++k) {
      const Eigen::Index near = k % k_p;
      if (near <= 1 || near >= k_p - 1) continue;
      band.push_back(sr.spectrum.psd[k]);
    }
    out.band_bins = band.size();
    const double m = mean_of(band);
    if (m > 0) ratios.push_back(variance_of(band) / (m * m));
  }
  out.var_over_mean_sq = mean_of(ratios);
  return out;
}

BenchResult run_bench(const Config& config, std::uint64_t seed) {
  Config c = config;
  c.gates.mode = GateMode::free_running;
  const auto sim = simulate_window(c, RngHandle{seed, 0}, c.run_duration_s);

  BenchResult out;
  const std::int64_t window_fs = c.sample.sample_duration_fs;

  const auto legacy = legacy_recover(sim.tags, 2e8, window_fs);
  out.legacy.samples = legacy.perf.sample_count;
  out.legacy.fft_seconds = legacy.perf.fft_seconds;
  out.legacy.spectrum_bytes = legacy.perf.spectrum_bytes;
  out.legacy.recovered_hz = legacy.frequency_hz;

  GateSchedule gated = config.gates;
  gated.mode = GateMode::gated;
  const auto filtered = digital_gate_filter(sim.tags, gated);
  const TimeInstant start = filtered.empty() ? TimeInstant{0} : filtered.front();
  const auto counts = bin_counts(filtered, c.sample, start);
  const auto begin = std::chrono::steady_clock::now();
  const auto spec = fft_spectrum(counts);
  const auto end = std::chrono::steady_clock::now();
  out.fast.samples = static_cast<std::uint64_t>(counts.bin_count());
  out.fast.fft_seconds = std::chrono::duration<double>(end - begin).count();
  out.fast.spectrum_bytes =
      static_cast<std::uint64_t>(spec.amplitudes.size()) * sizeof(std::complex<double>);
  try {
    const auto est =
        recover_frequency(filtered, 1.0 / gated.f_b_hz, c.sample, epsilon_for(config),
                          guard_for(config));
    out.fast.recovered_hz = est.frequency_hz;
  } catch (const RecoveryError&) {
    out.fast.recovered_hz = 0;
  }

  out.speedup = out.legacy.fft_seconds / std::max(out.fast.fft_seconds, 1e-12);
  out.memory_ratio = static_cast<double>(out.legacy.spectrum_bytes) /
                     static_cast<double>(out.fast.spectrum_bytes);
  return out;
}

// ---------------------------------------------------------------------------
// file emission

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

void write_manifest(const ExperimentSpec& spec) {
  std::ostringstream os;
  os << "# beatsync experiment manifest\n";
  os << "experiment = " << spec.name << "\n";
  os << "seed = " << spec.seed << "\n";
  os << "version = " << kVersion << "\n";
  for (const auto& o : spec.overrides) os << "override = " << o << "\n";
  os << "\n" << serialize_config(spec.config);
  write_text(std::filesystem::path(spec.out_dir) / "manifest.txt", os.str());
}

std::string g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

RunStatus emit_spectrum(const ExperimentSpec& spec) {
  Config c = spec.config;
  std::uint64_t seed = spec.seed;
  json summary;
  summary["seed"] = seed;
  std::ostringstream csv;
  csv << "k,freq_hz,psd\n";
  bool failed = false;

  if (spec.name == "spectrum-legacy") {
    Config fr = c;
    fr.gates.mode = GateMode::free_running;
    const auto sim = simulate_window(fr, RngHandle{seed, 0}, fr.run_duration_s);
    DecimatedPsd dec;
    try {
      const auto legacy = legacy_recover(sim.tags, 2e8, c.sample.sample_duration_fs, &dec);
      summary["peak_freq_hz"] = legacy.f_coa_hz;
      summary["recovered_hz"] = legacy.frequency_hz;
      summary["sample_count"] = legacy.perf.sample_count;
      summary["fft_seconds"] = legacy.perf.fft_seconds;
      const double res = 1.0 / seconds_from_fs(c.sample.sample_duration_fs);
      summary["decimation_block"] = dec.block;
      for (const auto& [k, v] : dec.rows)
        csv << k << "," << g(k * res) << "," << g(v) << "\n";
    } catch (const RecoveryError& e) {
      summary["error"] = e.what();
      failed = true;
    }
  } else {
    if (spec.name == "low-snr") {
      const double beat = std::abs(c.clock_a.f_hz - c.gates.f_b_hz);
      if (c.variant == "1to1") {
        // 200 qubit + 200 dark counts over 10 s
        c.run_duration_s = 10.0;
        c.sample.sample_duration_fs = fs_from_seconds(10.0);
        c.sample.target_resolution_hz = 0.1;
        c.protocol.channel_transmittance = transmittance_for_counts(c, 0.1, beat);
      } else {
        // 80 qubit + 20 dark counts over 1 s
        c.protocol.channel_transmittance = transmittance_for_counts(c, 0.4, beat);
      }
    }
    const auto run = run_fast_spectrum(c, seed);
    if (run.peak) {
      summary["peak_freq_hz"] = run.peak->beat_hz;
      summary["snr_observed"] = std::min(run.peak->snr_observed, 1e300);
      summary["snr_band_mean"] = measured_snr(run.spectrum, run.peak->k_p);
      summary["k_p"] = run.peak->k_p;
    } else {
      summary["error"] = run.error;
      failed = true;
    }
    const double res = run.spectrum.frequency_resolution_hz;
    for (Eigen::Index k = 0; k < run.spectrum.psd.size(); ++k)
      csv << k << "," << g(k * res) << "," << g(run.spectrum.psd[k]) << "\n";
  }

  write_text(std::filesystem::path(spec.out_dir) / "spectrum.csv", csv.str());
  write_text(std::filesystem::path(spec.out_dir) / "summary.json", summary.dump(2) + "\n");
  return failed ? RunStatus::recovery_errors : RunStatus::ok;
}

void emit_trace_csv(const std::filesystem::path& p, const TrackTrace& t) {
  std::ostringstream csv;
  csv << "t_s,delta_f_hz,arrival_misalign_ps,round_misalign\n";
  for (const auto& r : t.rows)
    csv << g(r.t_s) << "," << g(r.delta_f_hz) << "," << g(r.arrival_misalign_ps) << ","
        << r.round_misalign << "\n";
  write_text(p, csv.str());
}

RunStatus emit_track(const ExperimentSpec& spec) {
  Config c = spec.config;
  if (!c.variant.empty()) {
    // named system preset; the run-length knobs and seed stay the caller's
    Config preset = track_config(c.variant);
    preset.run_duration_s = c.run_duration_s;
    preset.track_interval_s = c.track_interval_s;
    c = preset;
  } else if (c.clock_a.fast_drift_var == 0 && c.clock_a.slow_drift_var == 0) {
    const Config preset = track_config("20MHz");
    c.clock_a = preset.clock_a;
  }
  const auto res = run_track_pair(c, spec.seed);
  const std::filesystem::path dir(spec.out_dir);
  emit_trace_csv(dir / "tracked.csv", res.tracked);
  emit_trace_csv(dir / "untracked.csv", res.untracked);

  std::ostringstream events;
  events << "t_s,event\n";
  for (const auto& [t, kind] : res.tracked.events) events << g(t) << "," << kind << "\n";
  write_text(dir / "events.csv", events.str());

  auto rms_df = [](const TrackTrace& t) {
    double s = 0;
    for (const auto& r : t.rows) s += r.delta_f_hz * r.delta_f_hz;
    return t.rows.empty() ? 0.0 : std::sqrt(s / static_cast<double>(t.rows.size()));
  };
  auto max_abs = [](const TrackTrace& t, auto proj) {
    double m = 0;
    for (const auto& r : t.rows) m = std::max(m, std::abs(proj(r)));
    return m;
  };
  json summary;
  summary["seed"] = spec.seed;
  summary["tracked_rms_delta_f_hz"] = rms_df(res.tracked);
  summary["tracked_max_arrival_misalign_ps"] =
      max_abs(res.tracked, [](const auto& r) { return r.arrival_misalign_ps; });
  summary["tracked_max_round_misalign"] =
      max_abs(res.tracked, [](const auto& r) { return static_cast<double>(r.round_misalign); });
  summary["untracked_max_delta_f_hz"] =
      max_abs(res.untracked, [](const auto& r) { return r.delta_f_hz; });
  summary["lock_events"] = res.tracked.events.size();
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  return RunStatus::ok;
}

RunStatus emit_sweep(const ExperimentSpec& spec) {
  const bool counts = spec.name == "snr-sweep-counts";
  const auto points = counts ? run_counts_sweep(spec.config, spec.seed, spec.config.trials)
                             : run_k_sweep(spec.config, spec.seed, spec.config.trials);
  std::ostringstream csv;
  csv << (counts ? "n_q_prime,total_qubit_counts,snr_mean,snr_sem,trials\n"
                 : "k_periods,sample_seconds,snr_mean,snr_sem,trials\n");
  std::vector<double> xs, ys;
  for (const auto& p : points) {
    csv << g(p.x) << "," << g(p.aux) << "," << g(p.snr_mean) << "," << g(p.snr_sem) << ","
        << p.trials << "\n";
    xs.push_back(p.x);
    ys.push_back(p.snr_mean);
  }
  write_text(std::filesystem::path(spec.out_dir) / "sweep.csv", csv.str());

  const LinearFit fit = linear_fit(xs, ys);
  json j;
  j["seed"] = spec.seed;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["r2"] = fit.r2;
  write_text(std::filesystem::path(spec.out_dir) / "fit.json", j.dump(2) + "\n");
  return RunStatus::ok;
}

RunStatus emit_psd_variance(const ExperimentSpec& spec) {
  const auto res = run_psd_variance(spec.config, spec.seed,
                                    std::max(spec.config.trials, 20));
  json j;
  j["seed"] = spec.seed;
  j["runs"] = res.runs;
  j["band_bins"] = res.band_bins;
  j["var_over_mean_sq"] = res.var_over_mean_sq;
  write_text(std::filesystem::path(spec.out_dir) / "summary.json", j.dump(2) + "\n");
  return RunStatus::ok;
}

RunStatus emit_resolution(const ExperimentSpec& spec) {
  const std::vector<double> ts{1.0, 0.5, 0.25, 0.125, 0.0625};
  const auto points =
      run_resolution_sweep(spec.config, spec.seed, std::max(spec.config.trials, 100), ts);

  std::ostringstream csv;
  csv << "q_yield,inv_sqrt_q,mean_abs_error_hz,trials,failures,wrong_sign\n";
  std::vector<double> xs, ys;
  int total_failures = 0, total_trials = 0;
  for (const auto& p : points) {
    csv << g(p.q_yield) << "," << g(1.0 / std::sqrt(p.q_yield)) << ","
        << g(p.mean_abs_error_hz) << "," << p.trials << "," << p.failures << ","
        << p.wrong_sign << "\n";
    xs.push_back(1.0 / std::sqrt(p.q_yield));
    ys.push_back(p.mean_abs_error_hz);
    total_failures += p.failures;
    total_trials += p.trials;
  }
  write_text(std::filesystem::path(spec.out_dir) / "resolution.csv", csv.str());

  const LinearFit fit = linear_fit(xs, ys);
  json j;
  j["seed"] = spec.seed;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["r2"] = fit.r2;
  j["failures"] = total_failures;
  j["trials"] = total_trials;
  write_text(std::filesystem::path(spec.out_dir) / "fit.json", j.dump(2) + "\n");
  return total_failures * 2 > total_trials ? RunStatus::recovery_errors : RunStatus::ok;
}

RunStatus emit_bench(const ExperimentSpec& spec) {
  const auto b = run_bench(spec.config, spec.seed);
  json j;
  j["seed"] = spec.seed;
  j["legacy"] = {{"samples", b.legacy.samples},
                 {"fft_s", b.legacy.fft_seconds},
                 {"spectrum_bytes", b.legacy.spectrum_bytes},
                 {"recovered_hz", b.legacy.recovered_hz}};
  j["fast"] = {{"samples", b.fast.samples},
               {"fft_s", b.fast.fft_seconds},
               {"spectrum_bytes", b.fast.spectrum_bytes},
               {"recovered_hz", b.fast.recovered_hz}};
  j["speedup"] = b.speedup;
  j["memory_ratio"] = b.memory_ratio;
  write_text(std::filesystem::path(spec.out_dir) / "bench.json", j.dump(2) + "\n");
  return RunStatus::ok;
}

}  // namespace

RunStatus run_experiment(const ExperimentSpec& spec) {
  const auto report = validate_config(spec.config.detector, spec.config.protocol,
                                      spec.config.sample, spec.config.clock_a,
                                      spec.config.clock_b);
  if (!report.pass()) {
    for (const auto& f : report.failures)
      std::fprintf(stderr, "config error: %s: %s\n", f.field.c_str(), f.message.c_str());
    return RunStatus::config_error;
  }

  std::filesystem::create_directories(spec.out_dir);
  write_manifest(spec);

  if (spec.name == "spectrum-fast" || spec.name == "spectrum-legacy" || spec.name == "low-snr")
    return emit_spectrum(spec);
  if (spec.name == "track") return emit_track(spec);
  if (spec.name == "snr-sweep-counts" || spec.name == "snr-sweep-K") return emit_sweep(spec);
  if (spec.name == "psd-variance") return emit_psd_variance(spec);
  if (spec.name == "resolution-sweep") return emit_resolution(spec);
  if (spec.name == "bench") return emit_bench(spec);

  std::fprintf(stderr, "unknown experiment: %s\n", spec.name.c_str());
  return RunStatus::config_error;
}

}  // namespace beatsync
