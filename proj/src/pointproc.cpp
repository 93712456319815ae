#include "latrank/pointproc.hpp"

#include <algorithm>
#include <cmath>

#include "latrank/errors.hpp"

namespace latrank {

namespace {

constexpr std::size_t kMaxSimulatedEvents = 10'000'000;

void check_stability(const HawkesParams& p, const SimulateOptions& opt) {
  if (!opt.allow_unstable && p.excitation > 0.0 && p.excitation >= p.decay) {
    throw InputError(
        "nonstationary Hawkes regime (excitation >= decay); "
        "pass allow_unstable to simulate anyway");
  }
  if (p.baseline < 0.0 || p.excitation < 0.0 || p.decay <= 0.0) {
    throw InputError("Hawkes parameters must satisfy baseline >= 0, "
                     "excitation >= 0, decay > 0");
  }
}

double excitation_sum_at(std::span<const double> history, double decay,
                         double t) {
  double s = 0.0;
  for (double tk : history) {
    if (tk <= t) s += std::exp(-decay * (t - tk));
  }
  return s;
}

}  // namespace

int StateTrajectory::state_at(double t) const {
  // right-continuous path: the new state holds from the switch time onward
  auto n_before = std::upper_bound(switch_times.begin(), switch_times.end(), t) -
                  switch_times.begin();
  return (n_before % 2 == 0) ? initial_state : 1 - initial_state;
}

double StateTrajectory::time_in_state(int state, double from, double to) const {
  double total = 0.0;
  double seg_start = t_begin;
  int z = initial_state;
  for (std::size_t k = 0; k <= switch_times.size(); ++k) {
    double seg_end = k < switch_times.size() ? switch_times[k] : t_end;
    double lo = std::max(seg_start, from);
    double hi = std::min(seg_end, to);
    if (z == state && hi > lo) total += hi - lo;
    seg_start = seg_end;
    z = 1 - z;
  }
  return total;
}

double hawkes_intensity(const HawkesParams& p, std::span<const double> history,
                        double t) {
  double s = 0.0;
  for (double tk : history) {
    if (tk < t) s += std::exp(-p.decay * (t - tk));
  }
  return p.baseline + p.excitation * s;
}

double hawkes_compensator(const HawkesParams& p, std::span<const double> history,
                          double t0, double t1) {
  if (t1 < t0) throw InputError("compensator interval end precedes start");
  double acc = 0.0;
  for (double tk : history) {
    if (tk >= t1) continue;
    double lo = std::max(t0, tk);
    acc += std::exp(-p.decay * (lo - tk)) - std::exp(-p.decay * (t1 - tk));
  }
  return p.baseline * (t1 - t0) + (p.excitation / p.decay) * acc;
}

std::vector<double> simulate_hawkes_window(const HawkesParams& p, double t_begin,
                                           double t_end,
                                           std::span<const double> prefix,
                                           Rng& rng,
                                           const SimulateOptions& opt) {
  check_stability(p, opt);
  std::vector<double> events;
  double s = excitation_sum_at(prefix, p.decay, t_begin);
  double t = t_begin;
  while (true) {
    // the intensity only decays until the next event, so its current value
    // is an exact local bound for thinning
    double bound = p.baseline + p.excitation * s;
    if (bound <= 0.0) break;
    double tc = t + rng.exponential(bound);
    if (tc > t_end) break;
    double sc = s * std::exp(-p.decay * (tc - t));
    double rate = p.baseline + p.excitation * sc;
    double u = rng.uniform();
    t = tc;
    s = sc;
    if (u * bound <= rate) {
      events.push_back(t);
      s += 1.0;
      if (events.size() > kMaxSimulatedEvents) {
        throw NumericalError("simulation produced too many events; "
                             "the process is likely explosive");
      }
    }
  }
  return events;
}

std::vector<double> simulate_hawkes(const HawkesParams& p, double horizon,
                                    Rng& rng, const SimulateOptions& opt) {
  if (horizon <= 0.0) throw InputError("simulation horizon must be positive");
  return simulate_hawkes_window(p, 0.0, horizon, {}, rng, opt);
}

std::vector<double> simulate_hawkes(const HawkesParams& p, double horizon,
                                    std::uint64_t seed,
                                    const SimulateOptions& opt) {
  Rng rng(seed);
  return simulate_hawkes(p, horizon, rng, opt);
}

CtmcMatrix ctmc_transition(const CtmcParams& c, double dt) {
  double s = c.leave_active + c.leave_inactive;
  double e = std::exp(-s * dt);
  double pi_a = c.leave_inactive / s;
  double pi_i = c.leave_active / s;
  CtmcMatrix m;
  m.p[kActive][kActive] = pi_a + pi_i * e;
  m.p[kActive][kInactive] = pi_i * (1.0 - e);
  m.p[kInactive][kActive] = pi_a * (1.0 - e);
  m.p[kInactive][kInactive] = pi_i + pi_a * e;
  return m;
}

std::pair<double, double> ctmc_stationary(const CtmcParams& c) {
  double s = c.leave_active + c.leave_inactive;
  return {c.leave_inactive / s, c.leave_active / s};
}

StateTrajectory simulate_ctmc_window(const CtmcParams& c, int z0, double t_begin,
                                     double t_end, Rng& rng) {
  StateTrajectory traj;
  traj.initial_state = z0;
  traj.t_begin = t_begin;
  traj.t_end = t_end;
  double t = t_begin;
  int z = z0;
  while (true) {
    double rate = z == kActive ? c.leave_active : c.leave_inactive;
    if (rate <= 0.0) break;
    t += rng.exponential(rate);
    if (t > t_end) break;
    traj.switch_times.push_back(t);
    z = 1 - z;
  }
  return traj;
}

StateTrajectory simulate_ctmc(const CtmcParams& c, int z0, double horizon,
                              Rng& rng) {
  if (horizon <= 0.0) throw InputError("simulation horizon must be positive");
  return simulate_ctmc_window(c, z0, 0.0, horizon, rng);
}

namespace {

MmhpSim simulate_mmhp_states_first(const HawkesParams& h, double inactive_rate,
                                   const CtmcParams& c, int z0, double t_begin,
                                   double t_end, std::span<const double> prefix,
                                   Rng& rng, const SimulateOptions& opt) {
  check_stability(h, opt);
  if (inactive_rate < 0.0) throw InputError("inactive rate must be >= 0");
  MmhpSim sim;
  sim.states = simulate_ctmc_window(c, z0, t_begin, t_end, rng);

  double s = excitation_sum_at(prefix, h.decay, t_begin);
  double t = t_begin;
  double seg_start = t_begin;
  int z = z0;
  for (std::size_t k = 0; k <= sim.states.switch_times.size(); ++k) {
    double seg_end =
        k < sim.states.switch_times.size() ? sim.states.switch_times[k] : t_end;
    while (t < seg_end) {
      double bound =
          z == kActive ? h.baseline + h.excitation * s : inactive_rate;
      if (bound <= 0.0) {
        s *= std::exp(-h.decay * (seg_end - t));
        t = seg_end;
        break;
      }
      double tc = t + rng.exponential(bound);
      if (tc > seg_end) {
        s *= std::exp(-h.decay * (seg_end - t));
        t = seg_end;
        break;
      }
      double sc = s * std::exp(-h.decay * (tc - t));
      double rate = z == kActive ? h.baseline + h.excitation * sc : inactive_rate;
      double u = rng.uniform();
      t = tc;
      s = sc;
      if (u * bound <= rate) {
        sim.events.push_back(t);
        s += 1.0; // events excite later intensity no matter which state fired them
        if (sim.events.size() > kMaxSimulatedEvents) {
          throw NumericalError("simulation produced too many events; "
                               "the process is likely explosive");
        }
      }
    }
    seg_start = seg_end;
    z = 1 - z;
  }
  (void)seg_start;
  return sim;
}

}  // namespace

MmhpSim simulate_mmhp(const HawkesParams& h, double inactive_rate,
                      const CtmcParams& c, double horizon, Rng& rng,
                      const CtmcInit& init, const SimulateOptions& opt) {
  if (horizon <= 0.0) throw InputError("simulation horizon must be positive");
  int z0;
  if (init.use_fixed) {
    z0 = init.fixed_state;
  } else {
    double p_active = ctmc_stationary(c).first;
    z0 = rng.uniform() < p_active ? kActive : kInactive;
  }
  return simulate_mmhp_states_first(h, inactive_rate, c, z0, 0.0, horizon, {},
                                    rng, opt);
}

MmhpSim simulate_mmhp(const HawkesParams& h, double inactive_rate,
                      const CtmcParams& c, double horizon, std::uint64_t seed,
                      const CtmcInit& init, const SimulateOptions& opt) {
  Rng rng(seed);
  return simulate_mmhp(h, inactive_rate, c, horizon, rng, init, opt);
}

MmhpSim simulate_mmhp_window(const HawkesParams& h, double inactive_rate,
                             const CtmcParams& c, double t_begin, double t_end,
                             std::span<const double> prefix, double p_active0,
                             Rng& rng, const SimulateOptions& opt) {
  if (t_end < t_begin) throw InputError("window end precedes window begin");
  int z0 = rng.uniform() < p_active0 ? kActive : kInactive;
  return simulate_mmhp_states_first(h, inactive_rate, c, z0, t_begin, t_end,
                                    prefix, rng, opt);
}

std::vector<double> rescaled_times(
    const std::function<double(double, double)>& compensator,
    std::span<const double> history) {
  std::vector<double> out;
  out.reserve(history.size());
  double prev = 0.0;
  for (double t : history) {
    out.push_back(compensator(prev, t));
    prev = t;
  }
  return out;
}

}  // namespace latrank
