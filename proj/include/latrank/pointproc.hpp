#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "latrank/rng.hpp"

namespace latrank {

// Latent-state index convention used across the library: 0 = active
// (excited regime), 1 = inactive (quiet regime).
inline constexpr int kActive = 0;
inline constexpr int kInactive = 1;

struct HawkesParams {
  double baseline = 0.0;   // events per hour when no excitation is live
  double excitation = 0.0; // jump added to the rate at each event
  double decay = 1.0;      // 1/hour; exponential forgetting of past events
};

struct CtmcParams {
  double leave_active = 1.0;   // rate of leaving the active state
  double leave_inactive = 1.0; // rate of leaving the inactive state
};

// Piecewise-constant two-state path on (t_begin, t_end].  The state at
// t_begin is initial_state and flips at each switch time.
struct StateTrajectory {
  int initial_state = kActive;
  double t_begin = 0.0;
  double t_end = 0.0;
  std::vector<double> switch_times; // strictly increasing, in (t_begin, t_end]

  int state_at(double t) const;
  double time_in_state(int state, double from, double to) const;
};

// λ(t) = baseline + excitation · Σ_{t_k < t} exp(−decay · (t − t_k)).
// Only strictly earlier events contribute.
double hawkes_intensity(const HawkesParams& p, std::span<const double> history,
                        double t);

// ∫_{t0}^{t1} λ(s) ds in closed form.
double hawkes_compensator(const HawkesParams& p, std::span<const double> history,
                          double t0, double t1);

struct SimulateOptions {
  bool allow_unstable = false; // permit excitation >= decay
};

// Ogata thinning on (0, T].
std::vector<double> simulate_hawkes(const HawkesParams& p, double horizon,
                                    Rng& rng, const SimulateOptions& = {});
std::vector<double> simulate_hawkes(const HawkesParams& p, double horizon,
                                    std::uint64_t seed,
                                    const SimulateOptions& = {});

// Continuation variant: events on (t_begin, t_end] given an earlier history
// whose excitation carries across t_begin.
std::vector<double> simulate_hawkes_window(const HawkesParams& p, double t_begin,
                                           double t_end,
                                           std::span<const double> prefix,
                                           Rng& rng,
                                           const SimulateOptions& = {});

// Transition matrix of the two-state chain over an interval dt; row/column
// order [active, inactive].  Rows sum to 1.
struct CtmcMatrix {
  double p[2][2];
};
CtmcMatrix ctmc_transition(const CtmcParams& c, double dt);

// (P(active), P(inactive)) in the long run.
std::pair<double, double> ctmc_stationary(const CtmcParams& c);

struct CtmcInit {
  // start from the stationary law unless a fixed state is requested
  bool use_fixed = false;
  int fixed_state = kActive;
};

StateTrajectory simulate_ctmc(const CtmcParams& c, int z0, double horizon,
                              Rng& rng);
StateTrajectory simulate_ctmc_window(const CtmcParams& c, int z0, double t_begin,
                                     double t_end, Rng& rng);

struct MmhpSim {
  std::vector<double> events;
  StateTrajectory states;
};

// Two-state Markov-modulated process: Hawkes dynamics (h) while active,
// homogeneous Poisson at inactive_rate while inactive.  The excitation sum
// includes all earlier events regardless of the state they occurred in.
MmhpSim simulate_mmhp(const HawkesParams& h, double inactive_rate,
                      const CtmcParams& c, double horizon, Rng& rng,
                      const CtmcInit& init = {}, const SimulateOptions& = {});
MmhpSim simulate_mmhp(const HawkesParams& h, double inactive_rate,
                      const CtmcParams& c, double horizon, std::uint64_t seed,
                      const CtmcInit& init = {}, const SimulateOptions& = {});

// Continuation variant on (t_begin, t_end] with carried-in excitation and an
// initial-state distribution (probability of starting active).
MmhpSim simulate_mmhp_window(const HawkesParams& h, double inactive_rate,
                             const CtmcParams& c, double t_begin, double t_end,
                             std::span<const double> prefix, double p_active0,
                             Rng& rng, const SimulateOptions& = {});

// Λ_m = compensator(t_{m−1}, t_m) for each inter-event interval, t_0 = 0.
// Under a correctly specified intensity these are i.i.d. Exp(1).
std::vector<double> rescaled_times(
    const std::function<double(double, double)>& compensator,
    std::span<const double> history);

}  // namespace latrank
