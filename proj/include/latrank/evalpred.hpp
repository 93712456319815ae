#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "latrank/baselines.hpp"
#include "latrank/data.hpp"
#include "latrank/inference.hpp"
#include "latrank/models.hpp"
#include "latrank/pointproc.hpp"

namespace latrank {

// Kolmogorov-Smirnov distance of the empirical distribution to Exp(1);
// empty input is undefined.
std::optional<double> ks_statistic(std::span<const double> values);

// Time-rescaled inter-event durations per directed pair under a fitted
// model.  For the Markov-modulated models each inter-event interval uses
// the forward-backward smoothed state mixture of the two regime
// compensators.
struct RescaledSet {
  int nodes = 0;
  std::vector<std::vector<double>> times; // row-major (i * nodes + j)

  const std::vector<double>& pair(int i, int j) const {
    return times[static_cast<std::size_t>(i) * nodes + j];
  }
  std::vector<double>& pair(int i, int j) {
    return times[static_cast<std::size_t>(i) * nodes + j];
  }
};

RescaledSet rescaled_set(const ChpParams& p, const PairHistories& h, double T);
RescaledSet rescaled_set(const DchpParams& p, const PairHistories& h, double T);
RescaledSet rescaled_set(const CmmhpParams& p, const PairHistories& h, double T);
RescaledSet rescaled_set(const ImmhpParams& p, const PairHistories& h, double T);
RescaledSet rescaled_set(const ModelParams& p, const PairHistories& h, double T);
// constant-rate reference: entry (i, j) of `rates` drives pair (i, j)
RescaledSet rescaled_set_poisson(const Eigen::MatrixXd& rates,
                                 const PairHistories& h, double T);

struct KsMatrix {
  Eigen::MatrixXd stat;        // NaN where undefined (no events or diagonal)
  Eigen::MatrixXi sample_size; // events per pair

  bool defined(int i, int j) const { return sample_size(i, j) > 0 && i != j; }
};

KsMatrix ks_matrix(const RescaledSet& r);

// 5% asymptotic two-sided critical value for a sample of size n.
double ks_critical_value(int n);

// Fitted compensator over (0, T] per directed pair; the smoothed state
// mixture for the Markov-modulated models.
Eigen::MatrixXd compensator_matrix(const ChpParams& p, const PairHistories& h,
                                   double T);
Eigen::MatrixXd compensator_matrix(const DchpParams& p, const PairHistories& h,
                                   double T);
Eigen::MatrixXd compensator_matrix(const CmmhpParams& p, const PairHistories& h,
                                   double T);
Eigen::MatrixXd compensator_matrix(const ImmhpParams& p, const PairHistories& h,
                                   double T);
Eigen::MatrixXd compensator_matrix(const ModelParams& p, const PairHistories& h,
                                   double T);
Eigen::MatrixXd compensator_matrix_poisson(const Eigen::MatrixXd& rates,
                                           const PairHistories& h, double T);

struct ResidualMatrix {
  Eigen::MatrixXd residual;    // NaN where the compensator vanishes
  Eigen::MatrixXd compensator;
};

// Pearson count residuals (observed - expected) / sqrt(expected) per pair.
ResidualMatrix pearson_residuals(const Eigen::MatrixXd& compensator,
                                 const PairHistories& h);

// Fitted pairwise intensity at time t given the history up to t; the
// Markov-modulated models mix regimes by the filtered state probability.
Eigen::MatrixXd intensity_matrix(const ModelParams& p, const PairHistories& h,
                                 double t);

struct OutdegreeRank {
  Eigen::VectorXd score;   // row sums of the pairwise intensity matrix
  std::vector<int> order;  // nodes by descending score, ties by index
};

OutdegreeRank outdegree_rank(const ModelParams& p, const PairHistories& h,
                             double t);
OutdegreeRank outdegree_rank(const PosteriorDraws& draws,
                             const PairHistories& h, double t);

// One simulated continuation of every pair over (t_begin, t_end], seeded
// with the true history (excitation and regime memory carried across the
// boundary).
struct WindowSim {
  std::vector<EventRecord> events; // time-sorted, day labels filled by caller
  Eigen::MatrixXi counts;
  Eigen::MatrixXd intensity_at_end; // pairwise intensity on the simulated path
  // regime paths, row-major (i * nodes + j); empty for models without regimes
  std::vector<StateTrajectory> states;
};

WindowSim simulate_window(const ModelParams& p, const PairHistories& prefix,
                          double t_begin, double t_end, Rng& rng);

struct PredictConfig {
  int n_sims = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct PredictionRun {
  int split_day = 0;
  int horizon_day = 0;
  double t_split = 0.0;
  double t_horizon = 0.0;
  Eigen::MatrixXd mean_counts;   // window counts averaged over simulations
  Eigen::MatrixXd median_counts;
  std::vector<Eigen::MatrixXi> sim_counts;
  Eigen::VectorXd outdegree_mean; // per-node intensity row sums at the horizon
};

// Posterior-predictive continuation: each simulation picks a posterior draw
// (evenly strided) and simulates every pair over (t_split, t_horizon] with
// the observed history up to the split carried in.
PredictionRun posterior_predict(const PosteriorDraws& draws,
                                const EventDataset& ds, int split_day,
                                int horizon_day, const PredictConfig& config = {});

// Mean absolute difference over the off-diagonal cells.
double prediction_mae(const Eigen::MatrixXd& predicted,
                      const Eigen::MatrixXd& actual);

struct GlickoForecast {
  int split_day = 0;
  int horizon_day = 0;
  double t_split = 0.0;
  std::size_t prefix_events = 0; // shared true-history prefix length
  Eigen::MatrixXd mean; // rows = cumulative event index 0.., cols = nodes
  Eigen::MatrixXd sd;
};

// Rating bands over simulated continuations: each simulation extends the
// true pre-split history, ratings are recomputed from scratch and sampled
// on the cumulative event-count grid (carry-forward past each simulation's
// final event).
GlickoForecast glicko_forecast(const PosteriorDraws& draws,
                               const EventDataset& ds, int split_day,
                               int horizon_day, const GlickoConfig& gc = {},
                               const PredictConfig& pc = {});

} // namespace latrank
