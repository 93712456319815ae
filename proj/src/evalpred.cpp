#include "latrank/evalpred.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <variant>

#include "latrank/errors.hpp"
#include "latrank/parallel.hpp"
#include "latrank/pointproc.hpp"

namespace latrank {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

HawkesParams chp_pair(const ChpParams& p, int i, int j) {
  return HawkesParams{p.baseline,
                      excitation_strength(p.eta, p.ranks[i], p.ranks[j]),
                      p.decay};
}

HawkesParams dchp_pair(const DchpParams& p, int i, int j) {
  return HawkesParams{p.out_rate[i] + p.in_rate[j],
                      excitation_strength(p.eta, p.ranks[i], p.ranks[j]),
                      p.decay};
}

// Per-interval compensator under the smoothed state mixture.  Interval m
// runs from event m-1 (or 0) to event m (or T); the final censored interval
// is included only when requested.
std::vector<double> mmhp_mixture_intervals(const MmhpPairRates& r,
                                           std::span<const double> events,
                                           double T, bool include_final) {
  MmhpFilter f = mmhp_filter(r, events, T);
  std::size_t m_count = events.size() + (include_final ? 1 : 0);
  std::vector<double> out(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    auto mi = static_cast<Eigen::Index>(m);
    double p_act = f.smoothed(mi, kActive);
    out[m] = p_act * f.active_compensator[mi] +
             (1.0 - p_act) * r.inactive_rate * f.durations[mi];
  }
  return out;
}

// P(active at t | events up to t) from the censored forward pass.
double mmhp_filtered_p_active(const MmhpPairRates& r,
                              std::span<const double> events, double t) {
  if (!(t > 0.0)) {
    return ctmc_stationary(CtmcParams{r.leave_active, r.leave_inactive}).first;
  }
  MmhpFilter f = mmhp_filter(r, events, t);
  Eigen::Index last = f.log_forward.rows() - 1;
  return std::exp(f.log_forward(last, kActive) - f.loglik);
}

template <typename PairFn>
RescaledSet rescaled_hawkes_impl(int n, const PairHistories& h, double T,
                                 PairFn pair_params) {
  RescaledSet out;
  out.nodes = n;
  out.times.resize(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      HawkesParams hp = pair_params(i, j);
      std::span<const double> events(h.times(i, j));
      out.pair(i, j) = rescaled_times(
          [&hp, events](double t0, double t1) {
            return hawkes_compensator(hp, events, t0, t1);
          },
          events);
      (void)T;
    }
  }
  return out;
}

template <typename RatesFn>
RescaledSet rescaled_mmhp_impl(int n, const PairHistories& h, double T,
                               RatesFn rates) {
  RescaledSet out;
  out.nodes = n;
  out.times.resize(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& events = h.times(i, j);
      if (events.empty()) continue;
      out.pair(i, j) = mmhp_mixture_intervals(rates(i, j), events, T, false);
    }
  }
  return out;
}

template <typename PairFn>
Eigen::MatrixXd compensator_hawkes_impl(int n, const PairHistories& h, double T,
                                        PairFn pair_params) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      HawkesParams hp = pair_params(i, j);
      out(i, j) = hawkes_compensator(hp, h.times(i, j), 0.0, T);
    }
  }
  return out;
}

template <typename RatesFn>
Eigen::MatrixXd compensator_mmhp_impl(int n, const PairHistories& h, double T,
                                      RatesFn rates) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      auto pieces = mmhp_mixture_intervals(rates(i, j), h.times(i, j), T, true);
      out(i, j) = std::accumulate(pieces.begin(), pieces.end(), 0.0);
    }
  }
  return out;
}

}  // namespace

std::optional<double> ks_statistic(std::span<const double> values) {
  if (values.empty()) return std::nullopt;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    double f0 = 1.0 - std::exp(-sorted[k]);
    double hi = (static_cast<double>(k) + 1.0) / n - f0;
    double lo = f0 - static_cast<double>(k) / n;
    d = std::max(d, std::max(hi, lo));
  }
  return std::min(d, 1.0);
}

double ks_critical_value(int n) {
  if (n <= 0) throw InputError("sample size must be positive");
  return 1.3581 / std::sqrt(static_cast<double>(n));
}

RescaledSet rescaled_set(const ChpParams& p, const PairHistories& h, double T) {
  return rescaled_hawkes_impl(h.n_nodes(), h, T,
                              [&](int i, int j) { return chp_pair(p, i, j); });
}

RescaledSet rescaled_set(const DchpParams& p, const PairHistories& h, double T) {
  return rescaled_hawkes_impl(h.n_nodes(), h, T,
                              [&](int i, int j) { return dchp_pair(p, i, j); });
}

RescaledSet rescaled_set(const CmmhpParams& p, const PairHistories& h, double T) {
  return rescaled_mmhp_impl(h.n_nodes(), h, T,
                            [&](int i, int j) { return cmmhp_rates(p, i, j); });
}

RescaledSet rescaled_set(const ImmhpParams& p, const PairHistories& h, double T) {
  return rescaled_mmhp_impl(h.n_nodes(), h, T,
                            [&](int i, int j) { return immhp_rates(p, i, j); });
}

RescaledSet rescaled_set(const ModelParams& p, const PairHistories& h, double T) {
  return std::visit([&](const auto& q) { return rescaled_set(q, h, T); }, p);
}

RescaledSet rescaled_set_poisson(const Eigen::MatrixXd& rates,
                                 const PairHistories& h, double T) {
  int n = h.n_nodes();
  if (rates.rows() != n || rates.cols() != n) {
    throw InputError("rate matrix shape does not match the histories");
  }
  return rescaled_hawkes_impl(n, h, T, [&](int i, int j) {
    return HawkesParams{rates(i, j), 0.0, 1.0};
  });
}

KsMatrix ks_matrix(const RescaledSet& r) {
  int n = r.nodes;
  KsMatrix out;
  out.stat = Eigen::MatrixXd::Constant(n, n, kNaN);
  out.sample_size = Eigen::MatrixXi::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& values = r.pair(i, j);
      out.sample_size(i, j) = static_cast<int>(values.size());
      if (auto d = ks_statistic(values)) out.stat(i, j) = *d;
    }
  }
  return out;
}

Eigen::MatrixXd compensator_matrix(const ChpParams& p, const PairHistories& h,
                                   double T) {
  return compensator_hawkes_impl(h.n_nodes(), h, T,
                                 [&](int i, int j) { return chp_pair(p, i, j); });
}

Eigen::MatrixXd compensator_matrix(const DchpParams& p, const PairHistories& h,
                                   double T) {
  return compensator_hawkes_impl(h.n_nodes(), h, T,
                                 [&](int i, int j) { return dchp_pair(p, i, j); });
}

Eigen::MatrixXd compensator_matrix(const CmmhpParams& p, const PairHistories& h,
                                   double T) {
  return compensator_mmhp_impl(h.n_nodes(), h, T,
                               [&](int i, int j) { return cmmhp_rates(p, i, j); });
}

Eigen::MatrixXd compensator_matrix(const ImmhpParams& p, const PairHistories& h,
                                   double T) {
  return compensator_mmhp_impl(h.n_nodes(), h, T,
                               [&](int i, int j) { return immhp_rates(p, i, j); });
}

Eigen::MatrixXd compensator_matrix(const ModelParams& p, const PairHistories& h,
                                   double T) {
  return std::visit([&](const auto& q) { return compensator_matrix(q, h, T); },
                    p);
}

Eigen::MatrixXd compensator_matrix_poisson(const Eigen::MatrixXd& rates,
                                           const PairHistories& h, double T) {
  int n = h.n_nodes();
  if (rates.rows() != n || rates.cols() != n) {
    throw InputError("rate matrix shape does not match the histories");
  }
  Eigen::MatrixXd out = rates * T;
  out.diagonal().setZero();
  return out;
}

ResidualMatrix pearson_residuals(const Eigen::MatrixXd& compensator,
                                 const PairHistories& h) {
  int n = h.n_nodes();
  if (compensator.rows() != n || compensator.cols() != n) {
    throw InputError("compensator shape does not match the histories");
  }
  ResidualMatrix out;
  out.compensator = compensator;
  out.residual = Eigen::MatrixXd::Constant(n, n, kNaN);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double lam = compensator(i, j);
      if (!(lam > 0.0)) continue;
      double count = static_cast<double>(h.times(i, j).size());
      out.residual(i, j) = (count - lam) / std::sqrt(lam);
    }
  }
  return out;
}

Eigen::MatrixXd intensity_matrix(const ModelParams& p, const PairHistories& h,
                                 double t) {
  int n = h.n_nodes();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      std::span<const double> events(h.times(i, j));
      // only strictly earlier events drive the intensity at t
      auto cut = std::lower_bound(events.begin(), events.end(), t);
      std::span<const double> head(events.data(),
                                   static_cast<std::size_t>(cut - events.begin()));
      if (std::holds_alternative<ChpParams>(p)) {
        out(i, j) = hawkes_intensity(chp_pair(std::get<ChpParams>(p), i, j), head, t);
      } else if (std::holds_alternative<DchpParams>(p)) {
        out(i, j) = hawkes_intensity(dchp_pair(std::get<DchpParams>(p), i, j), head, t);
      } else {
        MmhpPairRates r = std::holds_alternative<CmmhpParams>(p)
                              ? cmmhp_rates(std::get<CmmhpParams>(p), i, j)
                              : immhp_rates(std::get<ImmhpParams>(p), i, j);
        double p_act = mmhp_filtered_p_active(r, head, t);
        HawkesParams active{r.active_rate, r.excitation, r.decay};
        out(i, j) = p_act * hawkes_intensity(active, head, t) +
                    (1.0 - p_act) * r.inactive_rate;
      }
    }
  }
  return out;
}

namespace {

std::vector<int> descending_order(const Eigen::VectorXd& score) {
  std::vector<int> order(static_cast<std::size_t>(score.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (score[a] != score[b]) return score[a] > score[b];
    return a < b;
  });
  return order;
}

}  // namespace

OutdegreeRank outdegree_rank(const ModelParams& p, const PairHistories& h,
                             double t) {
  OutdegreeRank out;
  out.score = intensity_matrix(p, h, t).rowwise().sum();
  out.order = descending_order(out.score);
  return out;
}

OutdegreeRank outdegree_rank(const PosteriorDraws& draws,
                             const PairHistories& h, double t) {
  if (draws.n_draws() == 0) throw InputError("empty posterior draws");
  OutdegreeRank out;
  Eigen::VectorXd total = Eigen::VectorXd::Zero(h.n_nodes());
  for (Eigen::Index k = 0; k < draws.n_draws(); ++k) {
    total += intensity_matrix(draws.params_at(k), h, t).rowwise().sum();
  }
  out.score = total / static_cast<double>(draws.n_draws());
  out.order = descending_order(out.score);
  return out;
}

WindowSim simulate_window(const ModelParams& p, const PairHistories& prefix,
                          double t_begin, double t_end, Rng& rng) {
  int n = prefix.n_nodes();
  if (model_n_nodes(p) != n) {
    throw InputError("parameter dimension does not match the histories");
  }
  WindowSim out;
  out.counts = Eigen::MatrixXi::Zero(n, n);
  out.intensity_at_end = Eigen::MatrixXd::Zero(n, n);
  bool modulated = std::holds_alternative<CmmhpParams>(p) ||
                   std::holds_alternative<ImmhpParams>(p);
  if (modulated) out.states.resize(static_cast<std::size_t>(n) * n);
  SimulateOptions opts;
  opts.allow_unstable = true; // short window; the event-count guard still holds

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      std::span<const double> pre(prefix.times(i, j));
      std::vector<double> fresh;
      double lam_end = 0.0;
      if (std::holds_alternative<ChpParams>(p) ||
          std::holds_alternative<DchpParams>(p)) {
        HawkesParams hp = std::holds_alternative<ChpParams>(p)
                              ? chp_pair(std::get<ChpParams>(p), i, j)
                              : dchp_pair(std::get<DchpParams>(p), i, j);
        fresh = simulate_hawkes_window(hp, t_begin, t_end, pre, rng, opts);
        std::vector<double> full(pre.begin(), pre.end());
        full.insert(full.end(), fresh.begin(), fresh.end());
        lam_end = hawkes_intensity(hp, full, t_end);
      } else {
        MmhpPairRates r = std::holds_alternative<CmmhpParams>(p)
                              ? cmmhp_rates(std::get<CmmhpParams>(p), i, j)
                              : immhp_rates(std::get<ImmhpParams>(p), i, j);
        double p_act = mmhp_filtered_p_active(r, pre, t_begin);
        HawkesParams active{r.active_rate, r.excitation, r.decay};
        MmhpSim sim = simulate_mmhp_window(
            active, r.inactive_rate, CtmcParams{r.leave_active, r.leave_inactive},
            t_begin, t_end, pre, p_act, rng, opts);
        fresh = std::move(sim.events);
        std::vector<double> full(pre.begin(), pre.end());
        full.insert(full.end(), fresh.begin(), fresh.end());
        lam_end = sim.states.state_at(t_end) == kActive
                      ? hawkes_intensity(active, full, t_end)
                      : r.inactive_rate;
        out.states[static_cast<std::size_t>(i) * n + j] = std::move(sim.states);
      }
      out.counts(i, j) = static_cast<int>(fresh.size());
      out.intensity_at_end(i, j) = lam_end;
      for (double t : fresh) {
        EventRecord e;
        e.time = t;
        e.winner = i;
        e.loser = j;
        out.events.push_back(e);
      }
    }
  }
  std::sort(out.events.begin(), out.events.end(),
            [](const EventRecord& a, const EventRecord& b) {
              if (a.time != b.time) return a.time < b.time;
              if (a.winner != b.winner) return a.winner < b.winner;
              return a.loser < b.loser;
            });
  return out;
}

namespace {

void check_prediction_window(const PosteriorDraws& draws, const EventDataset& ds,
                             int split_day, int horizon_day) {
  if (draws.n_draws() == 0) throw InputError("empty posterior draws");
  if (draws.n_nodes != ds.n_nodes) {
    throw InputError("draws and dataset disagree on the number of nodes");
  }
  if (split_day < 0 || horizon_day < split_day || horizon_day > ds.n_days()) {
    throw InputError("prediction window must satisfy 0 <= split <= horizon <= " +
                     std::to_string(ds.n_days()) + " days");
  }
}

Eigen::Index strided_draw(const PosteriorDraws& draws, int sim, int n_sims) {
  auto total = static_cast<std::uint64_t>(draws.n_draws());
  auto k = static_cast<std::uint64_t>(sim) * total /
           static_cast<std::uint64_t>(std::max(1, n_sims));
  return static_cast<Eigen::Index>(k % total);
}

}  // namespace

PredictionRun posterior_predict(const PosteriorDraws& draws,
                                const EventDataset& ds, int split_day,
                                int horizon_day, const PredictConfig& config) {
  check_prediction_window(draws, ds, split_day, horizon_day);
  if (config.n_sims < 1) throw InputError("need at least one simulation");
  int n = ds.n_nodes;

  PredictionRun run;
  run.split_day = split_day;
  run.horizon_day = horizon_day;
  run.t_split = ds.day_end(split_day);
  run.t_horizon = ds.day_end(horizon_day);
  run.sim_counts.assign(static_cast<std::size_t>(config.n_sims),
                        Eigen::MatrixXi::Zero(n, n));

  PairHistories prefix = build_pair_histories(ds, run.t_split);
  std::vector<Eigen::VectorXd> outdeg(static_cast<std::size_t>(config.n_sims));

  parallel_for(config.n_sims, config.threads, [&](int s) {
    Rng rng(stream_seed(config.seed, 811, static_cast<std::uint64_t>(s)));
    ModelParams p = draws.params_at(strided_draw(draws, s, config.n_sims));
    WindowSim w = simulate_window(p, prefix, run.t_split, run.t_horizon, rng);
    run.sim_counts[static_cast<std::size_t>(s)] = std::move(w.counts);
    outdeg[static_cast<std::size_t>(s)] = w.intensity_at_end.rowwise().sum();
  });

  run.mean_counts = Eigen::MatrixXd::Zero(n, n);
  for (const auto& c : run.sim_counts) run.mean_counts += c.cast<double>();
  run.mean_counts /= static_cast<double>(config.n_sims);

  run.median_counts = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> cell(static_cast<std::size_t>(config.n_sims));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      for (int s = 0; s < config.n_sims; ++s) {
        cell[static_cast<std::size_t>(s)] =
            run.sim_counts[static_cast<std::size_t>(s)](i, j);
      }
      std::sort(cell.begin(), cell.end());
      std::size_t half = cell.size() / 2;
      run.median_counts(i, j) = cell.size() % 2 == 1
                                    ? cell[half]
                                    : 0.5 * (cell[half - 1] + cell[half]);
    }
  }

  run.outdegree_mean = Eigen::VectorXd::Zero(n);
  for (const auto& v : outdeg) run.outdegree_mean += v;
  run.outdegree_mean /= static_cast<double>(config.n_sims);
  return run;
}

double prediction_mae(const Eigen::MatrixXd& predicted,
                      const Eigen::MatrixXd& actual) {
  if (predicted.rows() != actual.rows() || predicted.cols() != actual.cols() ||
      predicted.rows() != predicted.cols()) {
    throw InputError("prediction matrices must be square and equally sized");
  }
  Eigen::Index n = predicted.rows();
  if (n < 2) throw InputError("need at least two nodes");
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      total += std::abs(predicted(i, j) - actual(i, j));
    }
  }
  return total / static_cast<double>(n * (n - 1));
}

GlickoForecast glicko_forecast(const PosteriorDraws& draws,
                               const EventDataset& ds, int split_day,
                               int horizon_day, const GlickoConfig& gc,
                               const PredictConfig& pc) {
  check_prediction_window(draws, ds, split_day, horizon_day);
  if (pc.n_sims < 1) throw InputError("need at least one simulation");
  int n = ds.n_nodes;
  double t_split = ds.day_end(split_day);
  double t_horizon = ds.day_end(horizon_day);

  std::vector<EventRecord> prefix_events;
  for (const auto& e : ds.events) {
    if (e.time <= t_split) prefix_events.push_back(e);
  }
  PairHistories prefix = build_pair_histories(ds, t_split);

  std::vector<std::vector<EventRecord>> continuations(
      static_cast<std::size_t>(pc.n_sims));
  parallel_for(pc.n_sims, pc.threads, [&](int s) {
    Rng rng(stream_seed(pc.seed, 977, static_cast<std::uint64_t>(s)));
    ModelParams p = draws.params_at(strided_draw(draws, s, pc.n_sims));
    WindowSim w = simulate_window(p, prefix, t_split, t_horizon, rng);
    for (auto& e : w.events) e.day = day_for_time(ds, e.time);
    continuations[static_cast<std::size_t>(s)] = std::move(w.events);
  });

  std::size_t longest = 0;
  for (const auto& c : continuations) longest = std::max(longest, c.size());
  std::size_t k_max = prefix_events.size() + longest;

  GlickoForecast out;
  out.split_day = split_day;
  out.horizon_day = horizon_day;
  out.t_split = t_split;
  out.prefix_events = prefix_events.size();

  // Welford update per grid cell: the naive sum-of-squares form loses the
  // prefix rows (identical across simulations) to cancellation.
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k_max) + 1, n);
  Eigen::MatrixXd m2 = mean;
  EventDataset combined;
  combined.cohort = ds.cohort;
  combined.n_nodes = n;
  combined.horizon = t_horizon;
  combined.day_boundaries = ds.day_boundaries;
  double count = 0.0;
  for (const auto& cont : continuations) {
    combined.events = prefix_events;
    combined.events.insert(combined.events.end(), cont.begin(), cont.end());
    GlickoTrajectory traj = glicko_scores(combined, gc);
    Eigen::MatrixXd grid = glicko_rating_grid(traj, k_max);
    count += 1.0;
    Eigen::MatrixXd delta = grid - mean;
    mean += delta / count;
    m2 += delta.cwiseProduct(grid - mean);
  }
  out.mean = std::move(mean);
  if (pc.n_sims > 1) {
    out.sd = (m2 / (count - 1.0)).cwiseMax(0.0).cwiseSqrt();
  } else {
    out.sd = Eigen::MatrixXd::Zero(out.mean.rows(), n);
  }
  return out;
}

}  // namespace latrank
