#include "beatsync/config_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace beatsync {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ConfigError("bad number for " + where + ": " + s);
  return v;
}

std::int64_t parse_i64(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') throw ConfigError("bad integer for " + where + ": " + s);
  return v;
}

// Intensity list as "mu:prob, mu:prob, ...".
std::string fmt_intensities(const std::vector<ProtocolParams::Intensity>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += fmt_double(v[i].mean_photons) + ":" + fmt_double(v[i].probability);
  }
  return out;
}

std::vector<ProtocolParams::Intensity> parse_intensities(const std::string& s) {
  std::vector<ProtocolParams::Intensity> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError("intensity entry needs mu:prob: " + item);
    out.push_back({parse_double(trim(item.substr(0, colon)), "protocol.intensities"),
                   parse_double(trim(item.substr(colon + 1)), "protocol.intensities")});
  }
  if (out.empty()) throw ConfigError("empty intensity list");
  return out;
}

void emit_clock(std::ostream& os, const char* section, const ClockState& c) {
  os << "[" << section << "]\n";
  os << "f_hz = " << fmt_double(c.f_hz) << "\n";
  os << "phase_fs = " << c.phase.fs << "\n";
  os << "phase_frac_fs = " << fmt_double(c.phase_frac_fs) << "\n";
  os << "fast_drift_var = " << fmt_double(c.fast_drift_var) << "\n";
  os << "slow_drift_var = " << fmt_double(c.slow_drift_var) << "\n";
  os << "fast_component = " << fmt_double(c.fast_component) << "\n";
  os << "slow_component = " << fmt_double(c.slow_component) << "\n";
}

bool set_clock_key(ClockState& c, const std::string& key, const std::string& val,
                   const std::string& where) {
  if (key == "f_hz") c.f_hz = parse_double(val, where);
  else if (key == "phase_fs") c.phase.fs = parse_i64(val, where);
  else if (key == "phase_frac_fs") c.phase_frac_fs = parse_double(val, where);
  else if (key == "fast_drift_var") c.fast_drift_var = parse_double(val, where);
  else if (key == "slow_drift_var") c.slow_drift_var = parse_double(val, where);
  else if (key == "fast_component") c.fast_component = parse_double(val, where);
  else if (key == "slow_component") c.slow_component = parse_double(val, where);
  else return false;
  return true;
}

void set_key(Config& c, const std::string& section, const std::string& key,
             const std::string& val) {
  const std::string where = section + "." + key;
  if (section == "detector") {
    auto& d = c.detector;
    if (key == "efficiency") d.efficiency = parse_double(val, where);
    else if (key == "gate_width_fs") d.gate_width_fs = parse_i64(val, where);
    else if (key == "jitter_sigma_fs") d.jitter_sigma_fs = parse_double(val, where);
    else if (key == "dead_time_fs") d.dead_time_fs = parse_i64(val, where);
    else if (key == "afterpulse_prob") d.afterpulse_prob = parse_double(val, where);
    else if (key == "afterpulse_rate_per_fs") d.afterpulse_rate_per_fs = parse_double(val, where);
    else if (key == "dark_prob") d.dark_prob = parse_double(val, where);
    else throw ConfigError("unknown key " + where);
  } else if (section == "protocol") {
    auto& p = c.protocol;
    if (key == "intensities") p.intensities = parse_intensities(val);
    else if (key == "channel_transmittance") p.channel_transmittance = parse_double(val, where);
    else if (key == "state_settings_note") p.state_settings_note = val;
    else throw ConfigError("unknown key " + where);
  } else if (section == "sample") {
    auto& s = c.sample;
    if (key == "sample_duration_fs") s.sample_duration_fs = parse_i64(val, where);
    else if (key == "bin_duration_fs") s.bin_duration_fs = parse_i64(val, where);
    else if (key == "target_resolution_hz") s.target_resolution_hz = parse_double(val, where);
    else if (key == "max_expected_beat_hz") s.max_expected_beat_hz = parse_double(val, where);
    else throw ConfigError("unknown key " + where);
  } else if (section == "clock_a") {
    if (!set_clock_key(c.clock_a, key, val, where)) throw ConfigError("unknown key " + where);
  } else if (section == "clock_b") {
    if (!set_clock_key(c.clock_b, key, val, where)) throw ConfigError("unknown key " + where);
  } else if (section == "gates") {
    auto& g = c.gates;
    if (key == "f_b_hz") g.f_b_hz = parse_double(val, where);
    else if (key == "delay_fs") g.delay.fs = parse_i64(val, where);
    else if (key == "gate_width_fs") g.gate_width_fs = parse_i64(val, where);
    else if (key == "mode") {
      if (val == "gated") g.mode = GateMode::gated;
      else if (val == "free_running") g.mode = GateMode::free_running;
      else throw ConfigError("gates.mode must be gated|free_running");
    } else throw ConfigError("unknown key " + where);
  } else if (section == "run") {
    if (key == "duration_s") c.run_duration_s = parse_double(val, where);
    else if (key == "track_interval_s") c.track_interval_s = parse_double(val, where);
    else if (key == "trials") c.trials = static_cast<int>(parse_i64(val, where));
    else if (key == "variant") c.variant = val;
    else throw ConfigError("unknown key " + where);
  } else {
    throw ConfigError("unknown section [" + section + "]");
  }
}

}  // namespace

Config default_config() {
  Config c;
  c.clock_a.f_hz = 2.00002e7;  // 20.0002 MHz source -> 200 Hz beat
  c.clock_b.f_hz = 2e7;
  c.gates.f_b_hz = 2e7;
  c.gates.gate_width_fs = c.detector.gate_width_fs;
  return c;
}

std::string serialize_config(const Config& c) {
  std::ostringstream os;
  os << "[detector]\n";
  os << "efficiency = " << fmt_double(c.detector.efficiency) << "\n";
  os << "gate_width_fs = " << c.detector.gate_width_fs << "\n";
  os << "jitter_sigma_fs = " << fmt_double(c.detector.jitter_sigma_fs) << "\n";
  os << "dead_time_fs = " << c.detector.dead_time_fs << "\n";
  os << "afterpulse_prob = " << fmt_double(c.detector.afterpulse_prob) << "\n";
  os << "afterpulse_rate_per_fs = " << fmt_double(c.detector.afterpulse_rate_per_fs) << "\n";
  os << "dark_prob = " << fmt_double(c.detector.dark_prob) << "\n";
  os << "\n[protocol]\n";
  os << "intensities = " << fmt_intensities(c.protocol.intensities) << "\n";
  os << "channel_transmittance = " << fmt_double(c.protocol.channel_transmittance) << "\n";
  if (!c.protocol.state_settings_note.empty())
    os << "state_settings_note = " << c.protocol.state_settings_note << "\n";
  os << "\n[sample]\n";
  os << "sample_duration_fs = " << c.sample.sample_duration_fs << "\n";
  os << "bin_duration_fs = " << c.sample.bin_duration_fs << "\n";
  os << "target_resolution_hz = " << fmt_double(c.sample.target_resolution_hz) << "\n";
  os << "max_expected_beat_hz = " << fmt_double(c.sample.max_expected_beat_hz) << "\n";
  os << "\n";
  emit_clock(os, "clock_a", c.clock_a);
  os << "\n";
  emit_clock(os, "clock_b", c.clock_b);
  os << "\n[gates]\n";
  os << "f_b_hz = " << fmt_double(c.gates.f_b_hz) << "\n";
  os << "delay_fs = " << c.gates.delay.fs << "\n";
  os << "gate_width_fs = " << c.gates.gate_width_fs << "\n";
  os << "mode = " << (c.gates.mode == GateMode::gated ? "gated" : "free_running") << "\n";
  os << "\n[run]\n";
  os << "duration_s = " << fmt_double(c.run_duration_s) << "\n";
  os << "track_interval_s = " << fmt_double(c.track_interval_s) << "\n";
  os << "trials = " << c.trials << "\n";
  if (!c.variant.empty()) os << "variant = " << c.variant << "\n";
  return os.str();
}

Config parse_config(const std::string& text) {
  Config c = default_config();
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section at line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value at line " + std::to_string(lineno));
    if (section.empty()) throw ConfigError("key outside any section at line " + std::to_string(lineno));
    set_key(c, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

Config load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_override(Config& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override needs section.key=value: " + assignment);
  const std::string path = trim(assignment.substr(0, eq));
  const auto dot = path.find('.');
  if (dot == std::string::npos) throw ConfigError("override needs section.key=value: " + assignment);
  set_key(c, path.substr(0, dot), path.substr(dot + 1), trim(assignment.substr(eq + 1)));
}

}  // namespace beatsync
