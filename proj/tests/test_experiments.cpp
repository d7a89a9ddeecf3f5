#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "beatsync/experiments.hpp"

using namespace beatsync;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("fast spectrum run finds the 200 Hz beat") {
  const auto run = run_fast_spectrum(default_config(), 1234);
  REQUIRE(run.peak.has_value());
  CHECK(run.peak->beat_hz == doctest::Approx(200.0).epsilon(0.005));
  CHECK(run.peak->snr_observed > 10.0);
  CHECK(run.counts.bin_count() == 1000);
}

TEST_CASE("recovery trial at the standard setup is within 1e-2 Hz") {
  const auto trial = run_recovery_trial(default_config(), 99);
  REQUIRE(trial.estimate.has_value());
  CHECK(std::abs(trial.estimate->frequency_hz - trial.true_f_hz) <= 1e-2);
  CHECK(trial.estimate->sign == -1);  // f_A above f_B means a shorter period
}

TEST_CASE("track pair with zero drift stays identical and aligned") {
  Config c = default_config();
  c.clock_a.f_hz = 2e7;  // no mismatch, no drift
  c.run_duration_s = 4.0;
  c.track_interval_s = 2.0;
  const auto res = run_track_pair(c, 7);
  REQUIRE(res.tracked.rows.size() == 2);
  REQUIRE(res.untracked.rows.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(std::abs(res.tracked.rows[i].delta_f_hz) < 1e-6);
    CHECK(std::abs(res.tracked.rows[i].arrival_misalign_ps) < 1.0);
    CHECK(res.tracked.rows[i].round_misalign == 0);
    CHECK(res.untracked.rows[i].round_misalign == 0);
    CHECK(std::abs(res.tracked.rows[i].arrival_misalign_ps -
                   res.untracked.rows[i].arrival_misalign_ps) < 1e-6);
  }
  CHECK(res.tracked.events.empty());
}

TEST_CASE("measured_snr on a synthetic spectrum") {
  CountSeries s;
  s.counts = Eigen::VectorXd::Zero(1000);
  for (int l = 0; l < 1000; ++l) s.counts[l] = (l % 5 == 0) ? 25.0 : 0.0;
  s.bin_duration_fs = 1000000000000LL;
  const auto spec = fft_spectrum(s);
  // a noiseless comb has an (almost) empty noise band
  CHECK(measured_snr(spec, 200) > 1e6);
}

TEST_CASE("resolution sweep smoke run") {
  Config c = default_config();
  const auto pts = run_resolution_sweep(c, 5, 4, {1.0, 0.25});
  REQUIRE(pts.size() == 2);
  for (const auto& p : pts) {
    CHECK(p.trials == 4);
    CHECK(p.failures + p.wrong_sign <= p.trials);
    CHECK(p.q_yield > 0);
  }
  CHECK(pts[0].q_yield > pts[1].q_yield);
}

TEST_CASE("run_experiment writes deterministic outputs and a manifest") {
  const auto dir = std::filesystem::temp_directory_path() / "beatsync_exp_test";
  std::filesystem::remove_all(dir);

  ExperimentSpec spec;
  spec.name = "spectrum-fast";
  spec.config = default_config();
  spec.config.run_duration_s = 0.2;
  spec.config.sample.sample_duration_fs = fs_from_seconds(0.2);
  spec.config.sample.target_resolution_hz = 5.0;
  spec.seed = 31337;
  spec.out_dir = (dir / "runA").string();

  REQUIRE(run_experiment(spec) == RunStatus::ok);
  CHECK(std::filesystem::exists(dir / "runA" / "manifest.txt"));
  CHECK(std::filesystem::exists(dir / "runA" / "spectrum.csv"));
  CHECK(std::filesystem::exists(dir / "runA" / "summary.json"));

  const auto csv = slurp(dir / "runA" / "spectrum.csv");
  CHECK(csv.rfind("k,freq_hz,psd\n", 0) == 0);
  const auto manifest = slurp(dir / "runA" / "manifest.txt");
  CHECK(manifest.find("seed = 31337") != std::string::npos);

  spec.out_dir = (dir / "runB").string();
  REQUIRE(run_experiment(spec) == RunStatus::ok);
  CHECK(slurp(dir / "runB" / "spectrum.csv") == csv);
  CHECK(slurp(dir / "runB" / "summary.json") == slurp(dir / "runA" / "summary.json"));

  std::filesystem::remove_all(dir);
}

TEST_CASE("run_experiment rejects invalid configs with the config status") {
  ExperimentSpec spec;
  spec.name = "spectrum-fast";
  spec.config = default_config();
  spec.config.detector.gate_width_fs = 0;
  spec.out_dir = (std::filesystem::temp_directory_path() / "beatsync_cfg_err").string();
  CHECK(run_experiment(spec) == RunStatus::config_error);
  CHECK(run_experiment({.name = "no-such-experiment",
                        .config = default_config(),
                        .seed = 1,
                        .out_dir = spec.out_dir}) == RunStatus::config_error);
  std::filesystem::remove_all(spec.out_dir);
}
