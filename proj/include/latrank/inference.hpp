#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "latrank/models.hpp"
#include "latrank/rng.hpp"

namespace latrank {

// Unconstrained reparameterization: every positive parameter moves to a log
// coordinate and every rank to a logit coordinate, in a fixed layout shared
// by the optimizer, the sampler, and the draws file format.
struct TransformLayout {
  std::vector<std::string> names;
  std::vector<bool> is_logit; // true: logit coordinate, false: log coordinate

  int size() const { return static_cast<int>(names.size()); }
};

TransformLayout transform_layout(ModelTag tag, int n_nodes);

// Constrained parameters as a flat vector in layout order.
Eigen::VectorXd flatten_params(const ModelParams& params);
ModelParams unflatten_params(ModelTag tag, int n_nodes, const Eigen::VectorXd& x);

// Bijection between the support interior and R^d.  Boundary values are
// nudged 1e-9 into the interior (a warning is printed once per process).
Eigen::VectorXd to_unconstrained(const ModelParams& params);
ModelParams from_unconstrained(ModelTag tag, int n_nodes,
                               const Eigen::VectorXd& theta);

// log |d constrained / d theta|, the change-of-variables term the sampler
// adds to the log posterior.
double transform_log_jacobian(ModelTag tag, int n_nodes,
                              const Eigen::VectorXd& theta);

struct MapConfig {
  int max_iter = 400;
  double tol = 1e-9;   // relative objective-change stopping rule
  int restarts = 3;
  std::uint64_t seed = 1;
  int threads = 1;
};

struct MapResult {
  ModelParams params;
  double log_posterior = 0.0;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0; // reported so non-convergence is inspectable
};

// Maximum a posteriori fit: quasi-Newton ascent with backtracking line
// search in unconstrained space, analytic gradients for chp/dchp, central
// finite differences otherwise; best result over `restarts` jittered
// initializations around a data-driven starting point.
MapResult map_fit(ModelTag tag, const PairHistories& h, double T,
                  const MapConfig& config = {});

// Single-stream Hawkes MAP fit (half-normal priors), for one directed
// event sequence in isolation.
struct HawkesFit {
  HawkesParams params;
  double log_posterior = 0.0;
  bool converged = false;
  double grad_norm = 0.0;
};
HawkesFit map_fit_hawkes(std::span<const double> events, double T,
                         const MapConfig& config = {});

struct SampleConfig {
  int chains = 4;
  int warmup = 1000;
  int draws = 1000; // per chain
  std::uint64_t seed = 1;
  int threads = 1;
  bool prior_only = false; // test hook: sample the prior, ignore the data
  std::optional<Eigen::VectorXd> init; // unconstrained start (e.g. the MAP)
};

struct PosteriorDraws {
  ModelTag tag = ModelTag::chp;
  int n_nodes = 0;
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // one row per draw, constrained space
  Eigen::VectorXd log_post; // prior + likelihood at each draw
  std::vector<int> chain;   // chain id per draw
  std::vector<double> accept_rate; // per chain, post-warmup
  double split_rhat_max = 0.0;
  std::uint64_t seed = 0;
  int warmup = 0;
  int draws_per_chain = 0;

  Eigen::Index n_draws() const { return values.rows(); }
  ModelParams params_at(Eigen::Index k) const;
};

// Adaptive random-walk Metropolis in unconstrained space; the proposal
// covariance and scale adapt during warmup only and the scale targets an
// acceptance rate around 0.3 (kept within roughly 0.23-0.4).
PosteriorDraws sample_posterior(ModelTag tag, const PairHistories& h, double T,
                                const SampleConfig& config = {});

// The sampler core on an arbitrary log target; exposed so its calibration
// can be checked on analytic distributions.
struct RwmResult {
  Eigen::MatrixXd draws;
  Eigen::VectorXd log_target;
  double accept_rate = 0.0;
};
RwmResult adaptive_rwm(const std::function<double(const Eigen::VectorXd&)>& log_target,
                       const Eigen::VectorXd& init, int warmup, int draws,
                       Rng& rng);

// Delimited-text serialization: metadata lines, then one row per draw.
void write_draws(const PosteriorDraws& d, std::ostream& out);
void write_draws_file(const PosteriorDraws& d, const std::string& path);
PosteriorDraws read_draws(std::istream& in);
PosteriorDraws read_draws_file(const std::string& path);

// Latent-state decoding for the Markov-modulated model: per event, the
// Viterbi label and the forward-backward smoothed probability of the active
// state, over the same interval chain as the forward likelihood.
struct PairDecoding {
  std::vector<int> labels;        // per event, kActive or kInactive
  std::vector<double> prob_active; // per event, smoothed
};

struct StateDecoding {
  int nodes = 0;
  std::vector<PairDecoding> pairs; // row-major (i * nodes + j)

  const PairDecoding& pair(int i, int j) const {
    return pairs[static_cast<std::size_t>(i) * nodes + j];
  }
  PairDecoding& pair(int i, int j) {
    return pairs[static_cast<std::size_t>(i) * nodes + j];
  }
};

StateDecoding decode_states(const CmmhpParams& p, const PairHistories& h,
                            double T);

// Central finite differences with a relative step of 1e-5.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x);

// General-purpose maximizer over R^d (quasi-Newton with finite-difference
// gradients); reused by fit routines that carry their own parameterization.
struct MaximizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};
MaximizeResult maximize(const std::function<double(const Eigen::VectorXd&)>& f,
                        const Eigen::VectorXd& x0, int max_iter = 400,
                        double tol = 1e-9);

}  // namespace latrank
