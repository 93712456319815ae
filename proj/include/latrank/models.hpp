#pragma once

#include <Eigen/Core>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "latrank/data.hpp"
#include "latrank/pointproc.hpp"

namespace latrank {

// Latent dominance ranks, one value in [0,1] per node.
using LatentRanks = Eigen::VectorXd;

// Parameters of the pairwise excitation function.  scale multiplies the
// whole jump; rank_decay damps it in |f_i - f_j|; asymmetry sharpens the
// winner/loser imbalance through a logistic factor.
struct EtaParams {
  double scale = 1.0;
  double rank_decay = 0.0;
  double asymmetry = 0.0;
};

// Hawkes network with a shared baseline: each directed pair (i, j) fires at
// baseline + excitation_strength(eta, f_i, f_j) * (decaying sum of its own
// past events).
struct ChpParams {
  double baseline = 0.1;
  EtaParams eta;
  double decay = 1.0;
  LatentRanks ranks;

  int n_nodes() const { return static_cast<int>(ranks.size()); }
};

// Degree-corrected variant: pair (i, j) has baseline out_rate[i] + in_rate[j].
struct DchpParams {
  Eigen::VectorXd out_rate; // per-node baseline for initiating
  Eigen::VectorXd in_rate;  // per-node baseline for receiving
  EtaParams eta;
  double decay = 1.0;
  LatentRanks ranks;

  int n_nodes() const { return static_cast<int>(ranks.size()); }
};

// Markov-modulated variant: each pair alternates between an active Hawkes
// regime and a quiet Poisson regime via a latent two-state chain.
struct CmmhpParams {
  Eigen::VectorXd out_rate;
  Eigen::VectorXd in_rate;
  double active_boost = 1.0; // active baseline = quiet baseline * (1 + boost)
  EtaParams eta;
  double decay = 1.0;
  LatentRanks ranks;

  int n_nodes() const { return static_cast<int>(ranks.size()); }
};

// Independent per-pair MMHP with no structure across nodes; used as a
// prediction comparison model.
struct ImmhpPairParams {
  double inactive_rate = 0.1;
  double active_boost = 1.0;
  double excitation = 0.5;
  double decay = 1.0;
  double leave_active = 1.0;
  double leave_inactive = 1.0;
};

struct ImmhpParams {
  int nodes = 0;
  std::vector<ImmhpPairParams> pairs; // row-major (i * nodes + j), diagonal unused

  int n_nodes() const { return nodes; }
  ImmhpPairParams& pair(int i, int j) { return pairs[static_cast<std::size_t>(i) * nodes + j]; }
  const ImmhpPairParams& pair(int i, int j) const {
    return pairs[static_cast<std::size_t>(i) * nodes + j];
  }
};

ImmhpParams make_immhp_params(int n_nodes);

enum class ModelTag { chp, dchp, cmmhp, immhp };

std::string model_name(ModelTag tag);
ModelTag model_tag_from_name(const std::string& name);

using ModelParams = std::variant<ChpParams, DchpParams, CmmhpParams, ImmhpParams>;

ModelTag model_tag(const ModelParams& params);
int model_n_nodes(const ModelParams& params);

// Excitation jump for the directed pair (i beats j):
//   scale * f_i * f_j * exp(-rank_decay |f_i - f_j|) * logistic(asymmetry (f_i - f_j))
double excitation_strength(const EtaParams& eta, double f_i, double f_j);

struct ExcitationGrad {
  double d_scale = 0.0;
  double d_rank_decay = 0.0;
  double d_asymmetry = 0.0;
  double d_fi = 0.0;
  double d_fj = 0.0;
};
double excitation_strength_grad(const EtaParams& eta, double f_i, double f_j,
                                ExcitationGrad& grad);

double logistic(double x);

// Intensity of the (i, j) stream under the shared-baseline model; identical
// to hawkes_intensity with the pair's derived excitation.
double chp_intensity(const ChpParams& p, int i, int j,
                     std::span<const double> history, double t);

// Full-network log-likelihoods over (0, T].  Pairs with no events contribute
// only their survival term.  An event sitting at zero intensity yields -inf.
double chp_loglik(const ChpParams& p, const PairHistories& h, double T);
double dchp_loglik(const DchpParams& p, const PairHistories& h, double T);
double cmmhp_loglik(const CmmhpParams& p, const PairHistories& h, double T);
double immhp_loglik(const ImmhpParams& p, const PairHistories& h, double T);

struct EtaGrad {
  double scale = 0.0;
  double rank_decay = 0.0;
  double asymmetry = 0.0;
};

struct ChpGrad {
  double baseline = 0.0;
  EtaGrad eta;
  double decay = 0.0;
  Eigen::VectorXd ranks;
};

struct DchpGrad {
  Eigen::VectorXd out_rate;
  Eigen::VectorXd in_rate;
  EtaGrad eta;
  double decay = 0.0;
  Eigen::VectorXd ranks;
};

// Log-likelihood together with its gradient in the natural (constrained)
// parameterization.  Returns -inf with an unspecified gradient when an event
// has zero intensity.
double chp_loglik_grad(const ChpParams& p, const PairHistories& h, double T,
                       ChpGrad& grad);
double dchp_loglik_grad(const DchpParams& p, const PairHistories& h, double T,
                        DchpGrad& grad);

// Per-pair rate bundle of the Markov-modulated models.
struct MmhpPairRates {
  double inactive_rate = 0.0; // quiet-regime Poisson rate
  double active_rate = 0.0;   // active-regime baseline
  double excitation = 0.0;    // active-regime jump per past event
  double decay = 1.0;
  double leave_active = 1.0;
  double leave_inactive = 1.0;
};

MmhpPairRates cmmhp_rates(const CmmhpParams& p, int i, int j);
MmhpPairRates immhp_rates(const ImmhpParams& p, int i, int j);

// Marginal log-likelihood of one pair's events under the two-state model:
// the latent state is held constant on each inter-event interval, the chain
// steps between intervals, and the recursion marginalizes in the log domain.
// The excitation sum always includes every earlier event.
double mmhp_pair_loglik(const MmhpPairRates& r, std::span<const double> events,
                        double T);

// Forward-backward and Viterbi over the same interval chain; row m of each
// matrix refers to interval m+1 in 1-based terms, columns [active, inactive].
struct MmhpFilter {
  Eigen::MatrixXd log_forward;
  Eigen::MatrixXd log_backward;
  Eigen::MatrixXd smoothed; // rows sum to 1
  std::vector<int> viterbi;
  double loglik = 0.0;
  Eigen::VectorXd durations;           // per-interval lengths
  Eigen::VectorXd active_compensator;  // active-regime integral per interval
};
MmhpFilter mmhp_filter(const MmhpPairRates& r, std::span<const double> events,
                       double T);

// Log prior densities; -inf encodes a support violation.  Rates and shape
// parameters carry half-normal(0,1) priors, ranks are uniform on [0,1], and
// the per-node degree corrections carry Laplace(0,1) priors restricted to
// nonnegative values.
double log_prior(const ChpParams& p);
double log_prior(const DchpParams& p);
double log_prior(const CmmhpParams& p);
double log_prior(const ImmhpParams& p);
double log_prior(const ModelParams& params);

// Adds the prior's gradient contribution and returns the log prior.
double log_prior_grad(const ChpParams& p, ChpGrad& grad);
double log_prior_grad(const DchpParams& p, DchpGrad& grad);

double loglik(const ModelParams& params, const PairHistories& h, double T);

// log_prior + log-likelihood; a -inf prior short-circuits the likelihood.
double log_posterior(const ModelParams& params, const PairHistories& h,
                     double T);

}  // namespace latrank
