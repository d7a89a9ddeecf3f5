#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "beatsync/params.hpp"

namespace beatsync {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Full experiment configuration. Serializes to a flat `[section]` /
/// `key = value` text format; parsing the serialized form reproduces the
/// value exactly (doubles are written with 17 significant digits).
struct Config {
  DetectorParams detector;
  ProtocolParams protocol;
  SampleConfig sample;
  ClockState clock_a;
  ClockState clock_b;
  GateSchedule gates;

  // experiment knobs
  double run_duration_s = 1.0;
  double track_interval_s = 2.0;
  int trials = 10;
  std::string variant;  // free-form selector, e.g. low-snr case

  friend bool operator==(const Config&, const Config&) = default;
};

/// The 20 MHz gated-mode setup used throughout: 20.0002 MHz source against
/// 20 MHz gates, eta = 0.2, T_g = 1 ns, sigma = 50 ps, T_d = 1 us,
/// P_ap = 2%, p_d = 1e-6, 1 kHz low-speed sampling over 1 s.
Config default_config();

std::string serialize_config(const Config& c);
Config parse_config(const std::string& text);
Config load_config_file(const std::string& path);

/// Applies a `section.key=value` override in place; throws ConfigError on
/// unknown keys or malformed values.
void apply_override(Config& c, const std::string& assignment);

}  // namespace beatsync
