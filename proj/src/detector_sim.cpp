#include "beatsync/detector_sim.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>

namespace beatsync {

namespace {

// Stream roles hanging off one run handle. Keeping one stream per effect
// means toggling afterpulses (say) never shifts the detection draws.
enum Stream : std::uint64_t {
  kFastDrift = 0,
  kSlowDrift = 1,
  kJitter = 2,
  kDetect = 3,
  kAfterpulse = 4,
  kDark = 5,
};

struct IntensityTable {
  struct Row {
    double cum_start;   // cumulative probability at segment start
    double prob;        // segment width
    double yield;       // click probability given this intensity
  };
  std::vector<Row> rows;
  double dark_prob;

  static IntensityTable build(const ProtocolParams& p, const DetectorParams& d) {
    IntensityTable t;
    t.dark_prob = d.dark_prob;
    double cum = 0;
    for (const auto& i : p.intensities) {
      const double q =
          1.0 - (1.0 - d.dark_prob) *
                    std::exp(-i.mean_photons * p.channel_transmittance * d.efficiency);
      t.rows.push_back({cum, i.probability, q});
      cum += i.probability;
    }
    return t;
  }

  // Single-uniform decision: picks the round's intensity and resolves the
  // click in one draw. Returns {clicked, dark, sub} where sub in [0,1) is the
  // rescaled residual uniform (reused to place in-gate dark counts).
  struct Outcome {
    bool clicked;
    bool dark;
    double sub;
  };
  Outcome decide(double u) const {
    for (const auto& row : rows) {
      if (u < row.cum_start + row.prob || &row == &rows.back()) {
        const double v = (u - row.cum_start) / row.prob;
        if (v < row.yield) {
          const bool dark = v < dark_prob;
          return {true, dark, dark ? v / dark_prob : 0.0};
        }
        return {false, false, 0.0};
      }
    }
    return {false, false, 0.0};
  }
};

void drift_step(ClockState& c, RngStream& fast, RngStream& slow) {
  if (c.fast_drift_var > 0)
    c.fast_component = fast.uniform_centered(std::sqrt(c.fast_drift_var));
  else
    c.fast_component = 0;
  if (c.slow_drift_var > 0)
    c.slow_component = slow.uniform_centered(std::sqrt(c.slow_drift_var));
  else
    c.slow_component = 0;
  c.f_hz += c.fast_component + c.slow_component;
  if (!(c.f_hz > 0)) throw std::domain_error("clock frequency drifted to <= 0");
}

// Keyed variant: the same update drawn at an explicit round index, so chunked
// runs and paired (tracked/untracked) arms see one common drift realization.
void drift_step_at(ClockState& c, const RngStream& fast, const RngStream& slow,
                   std::uint64_t round) {
  if (c.fast_drift_var > 0)
    c.fast_component = fast.uniform_centered_at(round, std::sqrt(c.fast_drift_var));
  else
    c.fast_component = 0;
  if (c.slow_drift_var > 0)
    c.slow_component = slow.uniform_centered_at(round, std::sqrt(c.slow_drift_var));
  else
    c.slow_component = 0;
  c.f_hz += c.fast_component + c.slow_component;
  if (!(c.f_hz > 0)) throw std::domain_error("clock frequency drifted to <= 0");
}

}  // namespace

double yield_per_round(const ProtocolParams& protocol, const DetectorParams& detector) {
  double q = 0;
  for (const auto& i : protocol.intensities)
    q += i.probability *
         (1.0 - (1.0 - detector.dark_prob) *
                    std::exp(-i.mean_photons * protocol.channel_transmittance *
                             detector.efficiency));
  return q;
}

ClockState step_clock(const ClockState& state, ClockRngs& rng, double jitter_sigma_fs) {
  ClockState next = state;
  drift_step(next, rng.fast, rng.slow);
  PhaseAccumulator acc{next.phase, next.phase_frac_fs};
  double dt = next.period_fs();
  if (jitter_sigma_fs > 0) dt += jitter_sigma_fs * rng.jitter.normal();
  acc.advance(dt);
  next.phase = acc.t;
  next.phase_frac_fs = acc.frac;
  return next;
}

SimRunResult simulate(const ProtocolParams& protocol, const DetectorParams& detector,
                      const GateSchedule& gates, const ClockState& clock_a,
                      std::int64_t n_rounds, RngHandle rng, const SimOptions& opts) {
  if (n_rounds <= 0) throw std::invalid_argument("n_rounds must be positive");
  const double worst_period =
      std::max(clock_a.period_fs(), gates.mode == GateMode::gated ? gates.period_fs() : 0.0);
  if (static_cast<double>(clock_a.phase.fs) + worst_period * (n_rounds + 2) > 4.5e18)
    throw std::overflow_error("time base overflow: run exceeds the int64 fs range");

  RngStream fast_rng(rng.derive(kFastDrift));
  RngStream slow_rng(rng.derive(kSlowDrift));
  RngStream jitter_rng(rng.derive(kJitter));
  RngStream detect_rng(rng.derive(kDetect));
  RngStream ap_rng(rng.derive(kAfterpulse));
  RngStream dark_rng(rng.derive(kDark).derive(opts.stream_salt));

  const IntensityTable table = IntensityTable::build(protocol, detector);
  const bool gated = gates.mode == GateMode::gated;
  const double sigma = detector.jitter_sigma_fs;
  const double t_g = static_cast<double>(gates.gate_width_fs);
  const double half_gate = t_g / 2.0;
  const double near_band = half_gate + 8.0 * sigma;
  const std::int64_t t_dead = detector.dead_time_fs;
  const double p_ap = detector.afterpulse_prob;
  const double ap_rate = detector.afterpulse_rate_per_fs;

  const double period_b = gates.period_fs();
  const double period_b_int = std::floor(period_b);
  const double period_b_frac = period_b - period_b_int;

  ClockState a = clock_a;
  PhaseAccumulator pulse{a.phase, a.phase_frac_fs};
  PhaseAccumulator gate = opts.gate_origin.value_or(PhaseAccumulator{gates.delay, 0.0});

  // Offset of the pulse from the nearest gate center, kept wrapped into
  // (-period/2, period/2]; the wrap count is the round misalignment.
  double offset = pulse.minus(gate);
  std::int64_t round_misalign = 0;
  if (gated) {
    const double wraps = std::nearbyint(offset / period_b);
    round_misalign = static_cast<std::int64_t>(wraps);
    offset -= wraps * period_b;
  }

  SimRunResult out;
  out.tags.origin_note = "simulate";
  if (opts.record_emission_times) out.true_emission_times.emplace();

  // out-of-gate dark counts (p_d per gate); in-gate rounds fold p_d into Q
  std::uint64_t next_dark = UINT64_MAX;
  if (gated && detector.dark_prob > 0)
    next_dark = dark_rng.geometric_gap(detector.dark_prob) - 1;

  using PendingAp = std::pair<std::int64_t, std::uint64_t>;  // (time, parent round)
  std::priority_queue<PendingAp, std::vector<PendingAp>, std::greater<>> pending_ap;
  std::int64_t last_recorded = INT64_MIN / 2;

  auto record = [&](std::int64_t t_fs, TagCause cause, std::uint64_t round) -> bool {
    if (t_fs - last_recorded < t_dead) {
      ++out.counters.dead_suppressed;
      return false;
    }
    out.tags.tags.push_back({t_fs});
    out.causes.push_back(cause);
    out.rounds.push_back(round);
    last_recorded = t_fs;
    switch (cause) {
      case TagCause::qubit: ++out.counters.qubit_clicks; break;
      case TagCause::dark: ++out.counters.dark_clicks; break;
      case TagCause::afterpulse: ++out.counters.afterpulse_clicks; break;
    }
    return true;
  };

  auto flush_ap_before = [&](std::int64_t t_fs) {
    while (!pending_ap.empty() && pending_ap.top().first <= t_fs) {
      const auto [t_ap, parent] = pending_ap.top();
      pending_ap.pop();
      record(t_ap, TagCause::afterpulse, parent);
    }
  };

  for (std::int64_t j = 0; j < n_rounds; ++j) {
    const std::uint64_t global = opts.start_round + static_cast<std::uint64_t>(j);
    if (opts.record_emission_times) out.true_emission_times->push_back(pulse.t);

    bool in_gate = false;
    double chi = 0;
    if (gated) {
      if (offset > period_b / 2) {
        offset -= period_b;
        ++round_misalign;
      } else if (offset < -period_b / 2) {
        offset += period_b;
        --round_misalign;
      }
      if (std::abs(offset) <= near_band) {
        if (sigma > 0) chi = sigma * jitter_rng.normal_at(global);
        in_gate = std::abs(offset + chi) <= half_gate;
      }
    } else {
      in_gate = true;  // free-running detector is always live
      if (sigma > 0) chi = sigma * jitter_rng.normal_at(global);
    }

    bool have_candidate = false;
    std::int64_t cand_t = 0;
    TagCause cand_cause = TagCause::qubit;
    if (in_gate) {
      ++out.counters.in_gate_rounds;
      const auto o = table.decide(detect_rng.uniform01_at(global));
      if (o.clicked) {
        have_candidate = true;
        if (o.dark) {
          cand_cause = TagCause::dark;
          // place the dark count uniformly inside the live window
          const double span = gated ? t_g : a.period_fs();
          const double anchor = gated ? -offset : 0.0;
          cand_t = pulse.t.fs + round_fs(pulse.frac + anchor + (o.sub - 0.5) * span);
        } else {
          cand_cause = TagCause::qubit;
          cand_t = pulse.t.fs + round_fs(pulse.frac + chi);
        }
      }
    }

    // dark counts in gates the pulse missed
    if (gated && global == next_dark) {
      const double upos = dark_rng.uniform01();
      if (!in_gate && !have_candidate) {
        have_candidate = true;
        cand_cause = TagCause::dark;
        cand_t = pulse.t.fs + round_fs(pulse.frac - offset + (upos - 0.5) * t_g);
      }
      next_dark += dark_rng.geometric_gap(detector.dark_prob);
    }

    if (have_candidate) {
      flush_ap_before(cand_t);
      if (record(cand_t, cand_cause, global) && p_ap > 0) {
        if (ap_rng.uniform01_at(2 * global) < p_ap) {
          const double eps = -std::log1p(-ap_rng.uniform01_at(2 * global + 1)) / ap_rate;
          pending_ap.push({cand_t + t_dead + round_fs(eps), global});
        }
      }
    }

    drift_step_at(a, fast_rng, slow_rng, global);
    const double period_a = a.period_fs();
    pulse.advance(period_a);
    if (gated) offset += period_a - period_b_int - period_b_frac;
    gate.advance(period_b);
  }

  flush_ap_before(pulse.t.fs);

  // Afterpulses can interleave out of order with later candidates only in
  // pathological configs (jitter comparable to the period); keep the
  // sortedness contract regardless.
  if (!out.tags.is_sorted()) {
    std::vector<std::size_t> idx(out.tags.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
      return out.tags.tags[x] < out.tags.tags[y];
    });
    TimeTagSeries sorted;
    sorted.origin_note = out.tags.origin_note;
    std::vector<TagCause> causes;
    std::vector<std::uint64_t> rounds;
    sorted.tags.reserve(idx.size());
    causes.reserve(idx.size());
    rounds.reserve(idx.size());
    for (std::size_t i : idx) {
      sorted.tags.push_back(out.tags.tags[i]);
      causes.push_back(out.causes[i]);
      rounds.push_back(out.rounds[i]);
    }
    out.tags = std::move(sorted);
    out.causes = std::move(causes);
    out.rounds = std::move(rounds);
  }

  a.phase = pulse.t;
  a.phase_frac_fs = pulse.frac;
  out.final_clock_a = a;
  out.final_gate_center = gate;
  out.final_round_misalign = round_misalign;
  return out;
}

}  // namespace beatsync
