#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "beatsync/config_io.hpp"
#include "beatsync/params.hpp"
#include "beatsync/rng.hpp"
#include "beatsync/tag_io.hpp"
#include "beatsync/time_base.hpp"

using namespace beatsync;

TEST_CASE("round_fs is round-half-to-even") {
  CHECK(round_fs(2.5) == 2);
  CHECK(round_fs(3.5) == 4);
  CHECK(round_fs(-2.5) == -2);
  CHECK(round_fs(2.4999) == 2);
  CHECK(fs_from_seconds(1.0) == kFsPerSecondInt);
}

TEST_CASE("time tag series invariants") {
  TimeTagSeries s;
  s.tags = {{10}, {20}, {45}};
  CHECK(s.is_sorted());
  CHECK(s.min_gap_fs() == 10);
  CHECK(s.span_fs() == 35);
  s.tags.push_back({40});
  CHECK_FALSE(s.is_sorted());
}

TEST_CASE("rng determinism and stream independence") {
  RngStream a(RngHandle{123, 7});
  RngStream b(RngHandle{123, 7});
  RngStream c(RngHandle{123, 8});
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next();
    all_equal = all_equal && (x == b.next());
    any_diff = any_diff || (x != c.next());
  }
  CHECK(all_equal);
  CHECK(any_diff);

  // keyed access matches the sequential order
  RngStream d(RngHandle{5, 1});
  RngStream e(RngHandle{5, 1});
  for (std::uint64_t i = 0; i < 100; ++i) CHECK(d.next() == e.at(i));
}

TEST_CASE("rng distributions") {
  RngStream s(RngHandle{99, 0});
  double sum = 0, sumsq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sumsq += u * u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sumsq / n - (sum / n) * (sum / n) == doctest::Approx(1.0 / 12).epsilon(0.02));

  RngStream g(RngHandle{99, 1});
  double nsum = 0, nsq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = g.normal();
    nsum += x;
    nsq += x * x;
  }
  CHECK(nsum / n == doctest::Approx(0.0).epsilon(1).scale(0.02));
  CHECK(nsq / n == doctest::Approx(1.0).epsilon(0.02));

  RngStream u(RngHandle{99, 2});
  double csum = 0, csq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = u.uniform_centered(2.0);
    csum += x;
    csq += x * x;
  }
  CHECK(csq / n == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("validate_config accepts the standard setup") {
  const Config c = default_config();
  const auto r = validate_config(c.detector, c.protocol, c.sample, c.clock_a, c.clock_b);
  for (const auto& f : r.failures) MESSAGE(f.field, ": ", f.message);
  CHECK(r.pass());
}

TEST_CASE("validate_config rejects a zero gate width") {
  Config c = default_config();
  c.detector.gate_width_fs = 0;
  const auto r = validate_config(c.detector, c.protocol, c.sample, c.clock_a, c.clock_b);
  REQUIRE_FALSE(r.pass());
  bool found = false;
  for (const auto& f : r.failures)
    found = found || f.message.find("gate_width must be positive") != std::string::npos;
  CHECK(found);
}

TEST_CASE("validate_config enforces the Nyquist bound on the sampling rate") {
  Config c = default_config();
  c.sample.bin_duration_fs = 10000000000000LL;  // 10 ms -> f'_s = 100 Hz
  c.sample.max_expected_beat_hz = 200.0;
  const auto r = validate_config(c.detector, c.protocol, c.sample, c.clock_a, c.clock_b);
  REQUIRE_FALSE(r.pass());
  bool found = false;
  for (const auto& f : r.failures)
    found = found || f.message.find("Nyquist") != std::string::npos;
  CHECK(found);
}

TEST_CASE("validate_config rejects a gate wider than the period") {
  Config c = default_config();
  c.detector.gate_width_fs = 50000000;  // 50 ns = one full 20 MHz period
  const auto r = validate_config(c.detector, c.protocol, c.sample, c.clock_a, c.clock_b);
  CHECK_FALSE(r.pass());
}

TEST_CASE("config round-trips through the text format") {
  Config c = default_config();
  CHECK(parse_config(serialize_config(c)) == c);

  // awkward values survive the 17-digit round trip
  RngStream s(RngHandle{2024, 0});
  for (int trial = 0; trial < 20; ++trial) {
    Config r = default_config();
    r.detector.efficiency = s.uniform01();
    r.detector.jitter_sigma_fs = s.uniform01() * 1e6;
    r.detector.dark_prob = s.uniform01() * 1e-5;
    r.detector.afterpulse_rate_per_fs = 1e-9 + s.uniform01() * 1e-7;
    r.protocol.intensities = {{s.uniform01(), 0.25}, {s.uniform01(), 0.75}};
    r.protocol.channel_transmittance = s.uniform01();
    r.clock_a.f_hz = 2e7 * (1 + (s.uniform01() - 0.5) * 1e-4);
    r.clock_a.phase.fs = static_cast<std::int64_t>(s.next() % (1ULL << 50));
    r.clock_a.phase_frac_fs = s.uniform01();
    r.clock_a.fast_drift_var = s.uniform01() * 1e-13;
    r.clock_a.slow_drift_var = r.clock_a.fast_drift_var * 1e-4 * s.uniform01();
    r.run_duration_s = s.uniform01() * 100;
    r.variant = trial % 2 ? "1to1" : "";
    CHECK(parse_config(serialize_config(r)) == r);
  }
}

TEST_CASE("config overrides") {
  Config c = default_config();
  apply_override(c, "detector.dark_prob=1e-5");
  CHECK(c.detector.dark_prob == doctest::Approx(1e-5));
  apply_override(c, "gates.mode=free_running");
  CHECK(c.gates.mode == GateMode::free_running);
  CHECK_THROWS_AS(apply_override(c, "nonsense"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "detector.bogus=1"), ConfigError);
}

TEST_CASE("tag files round-trip") {
  const auto dir = std::filesystem::temp_directory_path() / "beatsync_tagio_test";
  std::filesystem::create_directories(dir);

  TimeTagSeries s;
  RngStream r(RngHandle{77, 0});
  std::int64_t t = 0;
  for (int i = 0; i < 5000; ++i) {
    t += static_cast<std::int64_t>(r.next() % 100000000);
    s.tags.push_back({t});
  }

  const auto bin = (dir / "tags.ttag").string();
  write_tags_binary(bin, s);
  CHECK(read_tags_binary(bin).tags == s.tags);

  const auto raw = (dir / "tags.raw").string();
  write_tags_binary(raw, s, /*with_header=*/false);
  CHECK(read_tags_binary(raw).tags == s.tags);

  const auto csv = (dir / "tags.csv").string();
  write_tags_csv(csv, s);
  CHECK(read_tags_csv(csv).tags == s.tags);

  std::filesystem::remove_all(dir);
}
