#include <doctest.h>

#include <cmath>
#include <complex>

#include "beatsync/config_io.hpp"
#include "beatsync/detector_sim.hpp"
#include "beatsync/recovery.hpp"
#include "beatsync/rng.hpp"
#include "beatsync/theory.hpp"

using namespace beatsync;

namespace {

TimeTagSeries periodic_tags(std::int64_t period_fs, std::size_t n, std::int64_t t0 = 0) {
  TimeTagSeries s;
  s.tags.reserve(n);
  for (std::size_t j = 0; j < n; ++j)
    s.tags.push_back({t0 + static_cast<std::int64_t>(j) * period_fs});
  return s;
}

SampleConfig sample_of(std::int64_t duration_fs, std::int64_t bin_fs) {
  SampleConfig sc;
  sc.sample_duration_fs = duration_fs;
  sc.bin_duration_fs = bin_fs;
  sc.target_resolution_hz = kFsPerSecond / static_cast<double>(duration_fs);
  sc.max_expected_beat_hz = 0;  // synthetic setups manage their own Nyquist margins
  return sc;
}

}  // namespace

TEST_CASE("bin_counts: empty input gives an all-zero series") {
  const auto counts = bin_counts(TimeTagSeries{}, sample_of(3000, 1000), TimeInstant{0});
  CHECK(counts.counts.sum() == 0.0);
  CHECK(counts.bin_count() == 3);
}

TEST_CASE("bin_counts: hand-enumerated example") {
  TimeTagSeries tags;  // 0.5, 1.2, 1.3, 2.7 ms with 1 ms bins
  tags.tags = {{500000000000}, {1200000000000}, {1300000000000}, {2700000000000}};
  const auto counts = bin_counts(tags, sample_of(3000000000000LL, 1000000000000LL), TimeInstant{0});
  REQUIRE(counts.bin_count() == 3);
  CHECK(counts.counts[0] == 1.0);
  CHECK(counts.counts[1] == 2.0);
  CHECK(counts.counts[2] == 1.0);
}

TEST_CASE("bin_counts: 1 s at 1 kHz gives exactly 1000 bins and conserves counts") {
  Config c = default_config();
  const auto sim =
      simulate(c.protocol, c.detector, c.gates, c.clock_a, 20200000, RngHandle{21, 0});
  const auto counts = bin_counts(sim.tags, c.sample, sim.tags.front());
  CHECK(counts.bin_count() == 1000);

  std::size_t in_window = 0;
  for (const auto& t : sim.tags.tags) {
    const auto d = t - sim.tags.front();
    if (d >= 0 && d < c.sample.sample_duration_fs) ++in_window;
  }
  CHECK(counts.counts.sum() == static_cast<double>(in_window));
}

TEST_CASE("bin_counts conservation on random tag sets") {
  RngStream r(RngHandle{22, 0});
  for (int trial = 0; trial < 20; ++trial) {
    TimeTagSeries tags;
    std::int64_t t = static_cast<std::int64_t>(r.next() % 1000000);
    for (int i = 0; i < 500; ++i) {
      t += static_cast<std::int64_t>(r.next() % 20000000);
      tags.tags.push_back({t});
    }
    const auto sc = sample_of(4000000000LL, 2000000LL);
    const TimeInstant start{static_cast<std::int64_t>(r.next() % 2000000000)};
    const auto counts = bin_counts(tags, sc, start);
    std::size_t expect = 0;
    for (const auto& tag : tags.tags) {
      const auto d = tag - start;
      if (d >= 0 && d < sc.sample_duration_fs) ++expect;
    }
    CHECK(counts.counts.sum() == static_cast<double>(expect));
  }
}

TEST_CASE("digital_gate_filter: always-open gate is the identity") {
  const auto tags = periodic_tags(50000000, 1000);
  GateSchedule g;
  g.f_b_hz = 2e7;
  g.gate_width_fs = 50000000;
  CHECK(digital_gate_filter(tags, g).tags == tags.tags);
}

TEST_CASE("digital_gate_filter: alignment dichotomy") {
  const auto tags = periodic_tags(50000000, 1000);
  GateSchedule g;
  g.f_b_hz = 2e7;
  g.gate_width_fs = 1000000;  // 1 ns
  g.delay.fs = 0;
  CHECK(digital_gate_filter(tags, g).size() == tags.size());
  g.delay.fs = 2 * g.gate_width_fs;  // a clean shift away from every tag
  CHECK(digital_gate_filter(tags, g).empty());
}

TEST_CASE("digital_gate_filter: mismatched periods retain about the duty cycle") {
  // source at 20.0002 MHz against 20 MHz gates: tags sweep the gate phase
  const double f_a = 2.00002e7;
  TimeTagSeries tags;
  const std::size_t n = 1000000;
  PhaseAccumulator acc;
  const double period = kFsPerSecond / f_a;
  for (std::size_t j = 0; j < n; ++j) {
    tags.tags.push_back(acc.t);
    acc.advance(period);
  }
  GateSchedule g;
  g.f_b_hz = 2e7;
  g.gate_width_fs = 1000000;
  const double retained =
      static_cast<double>(digital_gate_filter(tags, g).size()) / static_cast<double>(n);
  const double duty = static_cast<double>(g.gate_width_fs) / 50000000.0;  // 0.02
  CHECK(std::abs(retained - duty) / duty <= 0.2);
}

TEST_CASE("fft_spectrum: constant series is DC only") {
  CountSeries s;
  s.counts = Eigen::VectorXd::Constant(64, 3.0);
  s.bin_duration_fs = 1000000000000LL;
  const auto spec = fft_spectrum(s);
  CHECK(spec.amplitudes[0].real() == doctest::Approx(64 * 3.0));
  for (int k = 1; k < 64; ++k) CHECK(std::abs(spec.amplitudes[k]) < 1e-9);
}

TEST_CASE("fft_spectrum: impulse series is flat") {
  CountSeries s;
  s.counts = Eigen::VectorXd::Zero(32);
  s.counts[5] = 1.0;
  s.bin_duration_fs = 1000000000000LL;
  const auto spec = fft_spectrum(s);
  for (int k = 0; k < 32; ++k) CHECK(std::abs(spec.amplitudes[k]) == doctest::Approx(1.0));
}

TEST_CASE("fft_spectrum: comb series matches the closed-form line values") {
  const int L = 10, M = 100, n = 2 * M;
  const double n_q = 7.0, n_v = 2.0;
  CountSeries s;
  s.counts = Eigen::VectorXd::Constant(n, n_v);
  for (int l = 0; l < n; l += L) s.counts[l] = n_q;
  s.bin_duration_fs = 1000000000000LL;
  const auto spec = fft_spectrum(s);
  for (int k = 0; k < n; ++k) {
    const double expect = theory::expected_dft_line(n_q, n_v, L, M, k % n);
    CHECK(std::abs(spec.amplitudes[k]) == doctest::Approx(expect).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("fft_spectrum: Parseval and PSD symmetry on random series") {
  RngStream r(RngHandle{23, 0});
  CountSeries s;
  s.counts = Eigen::VectorXd::Zero(500);
  for (int i = 0; i < 500; ++i) s.counts[i] = static_cast<double>(r.next() % 20);
  s.bin_duration_fs = 1000000000000LL;
  const auto spec = fft_spectrum(s);

  const double time_energy = s.counts.squaredNorm();
  const double freq_energy = spec.psd.sum();
  CHECK(std::abs(time_energy - freq_energy) / time_energy < 1e-9);

  for (int k = 1; k < 250; ++k)
    CHECK(spec.psd[k] == doctest::Approx(spec.psd[500 - k]).epsilon(1e-9));
}

TEST_CASE("find_beat_peak: synthetic tone at bin 40") {
  CountSeries s;
  s.counts = Eigen::VectorXd::Zero(1000);
  for (int l = 0; l < 1000; ++l)
    s.counts[l] = 100.0 + 10.0 * std::cos(2 * M_PI * 40 * l / 1000.0);
  s.bin_duration_fs = 1000000000000LL;  // T_s = 1 s
  const auto peak = find_beat_peak(fft_spectrum(s), 2e7);
  CHECK(peak.k_p == 40);
  CHECK(peak.beat_hz == doctest::Approx(40.0));
  CHECK(peak.abs_period_delta_s == doctest::Approx(40.0 / (2e7 * 2e7)));
}

TEST_CASE("find_beat_peak: all-equal counts have no peak") {
  CountSeries s;
  s.counts = Eigen::VectorXd::Constant(1000, 7.0);
  s.bin_duration_fs = 1000000000000LL;
  CHECK_THROWS_AS((void)find_beat_peak(fft_spectrum(s), 2e7), RecoveryError);
}

TEST_CASE("find_beat_peak: circular shifts leave the peak index unchanged") {
  RngStream r(RngHandle{24, 0});
  CountSeries s;
  s.counts = Eigen::VectorXd::Zero(600);
  for (int l = 0; l < 600; ++l)
    s.counts[l] = (l % 30 == 0 ? 20.0 : 0.0) + static_cast<double>(r.next() % 3);
  s.bin_duration_fs = 1000000000000LL;
  const int k0 = find_beat_peak(fft_spectrum(s), 2e7).k_p;
  for (int shift : {1, 17, 100, 599}) {
    CountSeries t = s;
    for (int l = 0; l < 600; ++l) t.counts[l] = s.counts[(l + shift) % 600];
    CHECK(find_beat_peak(fft_spectrum(t), 2e7).k_p == k0);
  }
}

TEST_CASE("recentre_and_filter: exact period keeps everything at tau/2") {
  const std::int64_t period = 50000000;
  const auto tags = periodic_tags(period, 400);
  const double tau = seconds_from_fs(period);
  const auto d = recentre_and_filter(tags, tau, 0.05 * tau);
  CHECK(d.size() == 400);
  for (std::size_t i = 0; i < d.size(); ++i)
    CHECK(d.y_s[i] == doctest::Approx(tau / 2).epsilon(1e-9));
  CHECK(d.pivot_index == 200);
}

TEST_CASE("recentre_and_filter: linear drift loses exactly the wrap-adjacent points") {
  // residues walk tau/100 per round; eps just above tau/20 clips the band
  // edges (kept off the residue lattice so the comparison has no ties)
  const std::int64_t period = 50000000;
  const std::int64_t delta = period / 100;
  const auto tags = periodic_tags(period + delta, 200);
  const double tau = seconds_from_fs(period);
  const double eps = 0.055 * tau;
  const auto d = recentre_and_filter(tags, tau, eps);

  // independent enumeration of the construction
  const double tau_fs = static_cast<double>(period);
  std::size_t expect = 0;
  const double pivot = 100.0 * static_cast<double>(period + delta);
  for (int j = 0; j < 200; ++j) {
    double y = std::fmod(j * static_cast<double>(period + delta) - pivot + tau_fs / 2, tau_fs);
    if (y < 0) y += tau_fs;
    if (y > eps * 1e15 && tau_fs - y > eps * 1e15) ++expect;
  }
  CHECK(d.size() == expect);
  CHECK(d.size() < 200);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(d.y_s[i] > eps);
    CHECK(tau - d.y_s[i] > eps);
  }
  for (std::size_t i = 1; i < d.size(); ++i) CHECK(d.k[i] > d.k[i - 1]);
}

TEST_CASE("recentre_and_filter rejects invalid thresholds") {
  const auto tags = periodic_tags(50000000, 10);
  const double tau = 5e-8;
  CHECK_THROWS_AS((void)recentre_and_filter(tags, tau, 0.0), std::invalid_argument);
  CHECK_THROWS_AS((void)recentre_and_filter(tags, tau, 0.5 * tau), std::invalid_argument);
}

TEST_CASE("identify_sign on clean synthetic drifts") {
  const std::int64_t period = 50000000;
  const std::int64_t delta = 1000000;  // 2% of the period
  const double tau_b = seconds_from_fs(period);
  const double d_abs = seconds_from_fs(delta);
  const double eps = 0.05 * tau_b;

  SUBCASE("true period tau_B + delta gives sign +1") {
    const auto tags = periodic_tags(period + delta, 3000);
    const auto sd = identify_sign(tags, tau_b, d_abs, eps);
    CHECK(sd.sign == +1);
    CHECK(sd.d_plus < d_abs);
    CHECK(sd.d_minus > 100.0 * std::max(sd.d_plus, 1e-18));
  }
  SUBCASE("true period tau_B - delta gives sign -1") {
    const auto tags = periodic_tags(period - delta, 3000);
    const auto sd = identify_sign(tags, tau_b, d_abs, eps);
    CHECK(sd.sign == -1);
    CHECK(sd.d_minus < d_abs);
  }
  SUBCASE("single-point datasets surface as EmptyAfterFilter") {
    TimeTagSeries one;
    one.tags = {{0}};
    try {
      (void)identify_sign(one, tau_b, d_abs, eps);
      FAIL("expected RecoveryError");
    } catch (const RecoveryError& e) {
      CHECK(e.issue == RecoveryIssue::empty_after_filter);
    }
  }
}

TEST_CASE("identify_sign decision is invariant under global time translation") {
  const std::int64_t period = 50000000;
  const std::int64_t delta = 500000;
  RngStream r(RngHandle{25, 0});
  TimeTagSeries tags;
  std::int64_t t = 0;
  for (int j = 0; j < 2000; ++j) {
    t += (period + delta) * (1 + static_cast<std::int64_t>(r.next() % 3));
    tags.tags.push_back({t + static_cast<std::int64_t>(r.normal() * 5e4)});
  }
  const double tau_b = seconds_from_fs(period);
  const auto base = identify_sign(tags, tau_b, seconds_from_fs(delta), 0.05 * tau_b);

  TimeTagSeries shifted;
  for (const auto& tag : tags.tags) shifted.tags.push_back(tag + 777777777123LL);
  const auto moved = identify_sign(shifted, tau_b, seconds_from_fs(delta), 0.05 * tau_b);
  CHECK(base.sign == moved.sign);
  CHECK(base.d_plus == doctest::Approx(moved.d_plus).epsilon(1e-6));
  CHECK(base.d_minus == doctest::Approx(moved.d_minus).epsilon(1e-6));
}

TEST_CASE("lsr_fine_tune basics") {
  FilteredDataset d;
  d.modulus_s = 1.0;

  SUBCASE("exact line") {
    for (int k = 0; k < 50; ++k) {
      d.k.push_back(k);
      d.y_s.push_back(2.0 * k);
    }
    const auto r = lsr_fine_tune(d);
    CHECK(r.slope_s == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.residual_std_s == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  }
  SUBCASE("constant residues give zero slope") {
    for (int k = 0; k < 50; ++k) {
      d.k.push_back(3 * k + 1);
      d.y_s.push_back(0.25);
    }
    CHECK(lsr_fine_tune(d).slope_s == doctest::Approx(0.0).scale(1e-12));
  }
  SUBCASE("degenerate abscissa") {
    d.k = {5, 5};
    d.y_s = {0.1, 0.2};
    // strictly increasing k is the type invariant, but the regression guards anyway
    try {
      (void)lsr_fine_tune(d);
      FAIL("expected RecoveryError");
    } catch (const RecoveryError& e) {
      CHECK(e.issue == RecoveryIssue::degenerate_abscissa);
    }
  }
}

TEST_CASE("lsr_fine_tune: OLS slope error stays inside four predicted sigmas") {
  // y = a k + N(0, s^2), k = 0..999; slope std = s / sqrt(sum (k-kbar)^2)
  const double a = 3e-7, s = 2e-9;
  const double sxx = 83333250.0;  // sum over k=0..999, computed independently
  const double pred_sd = s / std::sqrt(sxx);
  int outside = 0;
  const int trials = 300;
  for (int trial = 0; trial < trials; ++trial) {
    RngStream r(RngHandle{30, static_cast<std::uint64_t>(trial)});
    FilteredDataset d;
    d.modulus_s = 1.0;
    for (int k = 0; k < 1000; ++k) {
      d.k.push_back(k);
      d.y_s.push_back(a * k + s * r.normal());
    }
    if (std::abs(lsr_fine_tune(d).slope_s - a) > 4.0 * pred_sd) ++outside;
  }
  CHECK(static_cast<double>(trials - outside) / trials >= 0.99);
}

TEST_CASE("lsr_fine_tune slope is translation invariant") {
  RngStream r(RngHandle{31, 0});
  FilteredDataset d;
  d.modulus_s = 1.0;
  for (int k = 0; k < 200; ++k) {
    d.k.push_back(2 * k);
    d.y_s.push_back(1e-8 * k + 1e-10 * r.normal());
  }
  const double base = lsr_fine_tune(d).slope_s;

  FilteredDataset shifted_y = d;
  for (auto& y : shifted_y.y_s) y += 0.123;
  CHECK(lsr_fine_tune(shifted_y).slope_s == doctest::Approx(base).epsilon(1e-9));

  FilteredDataset shifted_k = d;
  for (auto& k : shifted_k.k) k += 100000;
  CHECK(lsr_fine_tune(shifted_k).slope_s == doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("recover_frequency: noiseless gated tags recover tau_A to 1e-12") {
  const std::int64_t period_a = 50002520;  // ~ -1008 Hz off the 20 MHz gates
  const auto raw = periodic_tags(period_a, 100000);
  GateSchedule g;
  g.f_b_hz = 2e7;
  g.gate_width_fs = 1000000;
  const auto tags = digital_gate_filter(raw, g);
  REQUIRE(tags.size() > 500);

  const auto sc = sample_of(5000000000000LL, 100000000000LL);  // 5 ms window, 10 kHz bins
  const double tau_b = 5e-8;
  const auto est = recover_frequency(tags, tau_b, sc, 0.05 * tau_b);

  const double tau_a = seconds_from_fs(period_a);
  CHECK(est.sign == +1);
  CHECK(std::abs(est.period_s - tau_a) / tau_a < 1e-12);
  CHECK(std::abs(est.frequency_hz - 1.0 / tau_a) < 1e-4);
}

TEST_CASE("recover_frequency: zero mismatch surfaces NoPeak for the tracking stage") {
  const auto raw = periodic_tags(50000000, 100000);
  GateSchedule g;
  g.f_b_hz = 2e7;
  g.gate_width_fs = 1000000;
  const auto tags = digital_gate_filter(raw, g);  // fully aligned, always in gate
  const auto sc = sample_of(5000000000000LL, 100000000000LL);
  try {
    (void)recover_frequency(tags, 5e-8, sc, 0.05 * 5e-8);
    FAIL("expected NoPeak");
  } catch (const RecoveryError& e) {
    CHECK(e.issue == RecoveryIssue::no_peak);
  }
}

TEST_CASE("track: aligned rigid clocks give zero slope and zero delay correction") {
  const std::int64_t period = 50000000;
  TimeTagSeries tags;  // tags exactly at gate centers 0, tau, 2 tau, ...
  for (int j = 0; j < 1000; ++j) tags.tags.push_back({j * period});
  const double tau = seconds_from_fs(period);
  // frame origin half a period early puts the residues at tau/2
  const auto est = track(tags, tau, 0.05 * tau, TimeInstant{-period / 2});
  CHECK(est.tau_fin_s == doctest::Approx(0.0).scale(1e-12));
  CHECK(std::abs(est.delay_correction.fs) <= 1);
  CHECK(est.retained_points == 1000);
}

TEST_CASE("track: early pulses produce the matching delay correction") {
  const std::int64_t period = 50000000;
  const std::int64_t early = 3000000;  // pulses 3 ns before the gate centers
  TimeTagSeries tags;
  for (int j = 0; j < 1000; ++j) tags.tags.push_back({j * period - early});
  const double tau = seconds_from_fs(period);
  const auto est = track(tags, tau, 0.05 * tau, TimeInstant{-period / 2});
  // y = tau/2 - early, correction = tau/2 - ybar = +early
  CHECK(est.delay_correction.fs == doctest::Approx(static_cast<double>(early)).epsilon(1e-9));
}

TEST_CASE("track: residues outside the band mean loss of lock") {
  const std::int64_t period = 50000000;
  TimeTagSeries tags;
  for (int j = 0; j < 100; ++j) tags.tags.push_back({j * period});
  const double tau = seconds_from_fs(period);
  // frame origin at the tags themselves: residues sit at 0, inside eps
  try {
    (void)track(tags, tau, 0.2 * tau, TimeInstant{0});
    FAIL("expected EmptyAfterFilter");
  } catch (const RecoveryError& e) {
    CHECK(e.issue == RecoveryIssue::empty_after_filter);
  }
}

TEST_CASE("delay_scan on synthetic rate maps") {
  const double tau_b = 5e-8;
  const std::int64_t gate_fs = 1000000;
  const std::int64_t tau_fs = 50000000;

  SUBCASE("aligned source found within a quarter gate") {
    const std::int64_t d0 = 17300000;
    auto probe = [&](TimeInstant d) {
      std::int64_t diff = (d.fs - d0) % tau_fs;
      if (diff > tau_fs / 2) diff -= tau_fs;
      if (diff < -tau_fs / 2) diff += tau_fs;
      return std::abs(diff) <= gate_fs / 2 ? 100.0 : 0.01;
    };
    const auto found = delay_scan(probe, tau_b, gate_fs);
    std::int64_t err = (found.fs - d0) % tau_fs;
    if (err > tau_fs / 2) err -= tau_fs;
    if (err < -tau_fs / 2) err += tau_fs;
    CHECK(std::abs(err) <= gate_fs / 4);
  }
  SUBCASE("zero yield raises NotFound") {
    auto probe = [](TimeInstant) { return 0.0; };
    try {
      (void)delay_scan(probe, tau_b, gate_fs);
      FAIL("expected NotFound");
    } catch (const RecoveryError& e) {
      CHECK(e.issue == RecoveryIssue::not_found);
    }
  }
  SUBCASE("already-aligned source centers at zero") {
    auto probe = [&](TimeInstant d) {
      std::int64_t diff = d.fs % tau_fs;
      if (diff > tau_fs / 2) diff -= tau_fs;
      return std::abs(diff) <= gate_fs / 2 ? 50.0 : 0.0;
    };
    const auto found = delay_scan(probe, tau_b, gate_fs);
    std::int64_t err = found.fs % tau_fs;
    if (err > tau_fs / 2) err -= tau_fs;
    CHECK(std::abs(err) <= gate_fs / 4);
  }
}

TEST_CASE("legacy_recover: clean tone comes back at the FFT resolution") {
  // scaled-down instance: 200.002 kHz source sampled at 2 MHz for 1 s
  const std::int64_t period = 4999950000LL;  // fs
  const double f_a = kFsPerSecond / static_cast<double>(period);
  const auto tags = periodic_tags(period, 200001);
  const auto res = legacy_recover(tags, 2e6, kFsPerSecondInt);
  CHECK(res.perf.sample_count == 2000000);
  CHECK(std::abs(res.f_coa_hz - f_a) <= 1.0);
  CHECK(std::abs(res.frequency_hz - f_a) / f_a < 1e-9);
  CHECK(res.perf.spectrum_bytes >= 1000000 * sizeof(std::complex<float>));
}

TEST_CASE("default_epsilon_threshold follows the documented clamp") {
  CHECK(default_epsilon_threshold(1.0, 0.0) == doctest::Approx(0.05));
  CHECK(default_epsilon_threshold(1.0, 0.02) == doctest::Approx(0.08));
  CHECK(default_epsilon_threshold(1.0, 10.0) == doctest::Approx(0.25));
}
