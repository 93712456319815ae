#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "latrank/data.hpp"

namespace latrank {

// Reordering-based dominance ranking.  An ordering lists node indices from
// most to least dominant; its quality is the pair (inconsistencies,
// inconsistency strength) of the reordered win matrix.
struct Ordering {
  std::vector<int> order; // order[0] = most dominant node (0-based index)
  int inconsistencies = 0;
  int strength = 0;
};

// Counts ordered pairs where the lower-ranked node holds strictly more wins
// over the higher-ranked one, and the rank-distance-weighted total.
std::pair<int, int> count_inconsistencies(const Eigen::MatrixXi& wins,
                                          const std::vector<int>& order);

struct IsiConfig {
  std::uint64_t seed = 1;
  int anneal_steps = 20000;
  int restarts = 8;
};

// Minimizes (inconsistencies, strength) lexicographically.  Exhaustive for
// up to 8 nodes, simulated annealing with greedy polish above that.  Among
// optima the result is deterministic: nodes are preferred by total wins,
// then by index.
Ordering isi_rank(const Eigen::MatrixXi& wins, const IsiConfig& config = {});

struct GlickoConfig {
  double initial_rating = 1500.0;
  double initial_deviation = 350.0;
  double c = 34.6;      // deviation regrowth per period
  double period = 1.0;  // rating-period length in days
};

struct GlickoPoint {
  std::size_t event_index = 0; // 0 = initial state, k = after the k-th event
  double rating = 0.0;
  double deviation = 0.0;
};

struct GlickoTrajectory {
  std::vector<std::vector<GlickoPoint>> by_node;
  Eigen::VectorXd final_rating;
  Eigen::VectorXd final_deviation;
};

// Sequential paired-comparison ratings: one update per event in time order,
// winner scoring 1.  Deviations regrow between rating periods and are capped
// at the initial deviation.
GlickoTrajectory glicko_scores(const EventDataset& ds,
                               const GlickoConfig& config = {});

// Ratings sampled on the global event-index grid 0..n_events; rows are event
// indices, columns nodes, values carried forward between a node's updates.
Eigen::MatrixXd glicko_rating_grid(const GlickoTrajectory& traj,
                                   std::size_t n_events);

struct AggregateConfig {
  std::uint64_t seed = 1;
  int max_iter = 400;
  double tol = 1e-9;
  int restarts = 3;
};

// Poisson regression on aggregate win counts: N_ij ~ Poisson(T exp(a + b(f_i - f_j)))
// with ranks f on [0,1], slope b >= 0.
struct AggregateRankFit {
  Eigen::VectorXd ranks;
  double intercept = 0.0;
  double slope = 0.0;
  double log_posterior = 0.0;
  bool degenerate = false; // all-zero win matrix; ranks fall back to 0.5
};

AggregateRankFit aggregate_rank_fit(const Eigen::MatrixXi& wins, double window,
                                    const AggregateConfig& config = {});

// Rank correlation with average ranks for ties; empty when either input has
// zero rank variance.
std::optional<double> spearman(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& y);

// Average-rank transform used by spearman; exposed for rank summaries.
Eigen::VectorXd average_ranks(const Eigen::VectorXd& x);

} // namespace latrank
