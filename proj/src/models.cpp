#include "latrank/models.hpp"

#include <cmath>
#include <limits>

#include "latrank/errors.hpp"

namespace latrank {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sqrt(2/pi)), normalizer of the half-normal(0,1) density
const double kLogHalfNormalNorm = 0.5 * std::log(2.0 / M_PI);
const double kLog2 = std::log(2.0);

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  double m = a > b ? a : b;
  return m + std::log1p(std::exp((a > b ? b : a) - m));
}

double half_normal_lp(double x) {
  if (x < 0.0 || !std::isfinite(x)) return kNegInf;
  return kLogHalfNormalNorm - 0.5 * x * x;
}

double uniform01_lp(double f) {
  if (f < 0.0 || f > 1.0 || !std::isfinite(f)) return kNegInf;
  return 0.0;
}

double laplace_nonneg_lp(double x) {
  if (x < 0.0 || !std::isfinite(x)) return kNegInf;
  return -kLog2 - x;
}

// One directed pair's Hawkes log-likelihood over (0, T], with optional
// gradient accumulation via the O(M) recursions
//   S_m = e^{-b d}(S_{m-1} + 1),  R_m = e^{-b d}(R_{m-1} + d (S_{m-1} + 1))
// where S tracks the excitation sum and R its decay derivative.
struct PairHawkesEval {
  double loglik = 0.0;
  double d_baseline = 0.0;
  double d_excitation = 0.0;
  double d_decay = 0.0;
};

template <bool WithGrad>
PairHawkesEval pair_hawkes_eval(double baseline, double excitation, double decay,
                                std::span<const double> events, double T) {
  PairHawkesEval ev;
  ev.loglik = -baseline * T;
  if (WithGrad) ev.d_baseline = -T;

  double s = 0.0;
  double r = 0.0;
  double prev = 0.0;
  bool first = true;
  for (double t : events) {
    if (!first) {
      double d = t - prev;
      double e = std::exp(-decay * d);
      if (WithGrad) r = e * (r + d * (s + 1.0));
      s = e * (s + 1.0);
    }
    first = false;
    double lam = baseline + excitation * s;
    if (lam <= 0.0) {
      ev.loglik = kNegInf;
      return ev;
    }
    ev.loglik += std::log(lam);
    if (WithGrad) {
      ev.d_baseline += 1.0 / lam;
      ev.d_excitation += s / lam;
      ev.d_decay -= excitation * r / lam;
    }
    prev = t;
  }

  double acc = 0.0;
  double acc_u = 0.0;
  for (double tk : events) {
    double u = T - tk;
    double eu = std::exp(-decay * u);
    acc += 1.0 - eu;
    if (WithGrad) acc_u += u * eu;
  }
  ev.loglik -= excitation / decay * acc;
  if (WithGrad) {
    ev.d_excitation -= acc / decay;
    ev.d_decay += excitation / (decay * decay) * acc - excitation / decay * acc_u;
  }
  return ev;
}

}  // namespace

ImmhpParams make_immhp_params(int n_nodes) {
  ImmhpParams p;
  p.nodes = n_nodes;
  p.pairs.assign(static_cast<std::size_t>(n_nodes) * n_nodes, ImmhpPairParams{});
  return p;
}

std::string model_name(ModelTag tag) {
  switch (tag) {
    case ModelTag::chp: return "chp";
    case ModelTag::dchp: return "dchp";
    case ModelTag::cmmhp: return "cmmhp";
    case ModelTag::immhp: return "immhp";
  }
  return "?";
}

ModelTag model_tag_from_name(const std::string& name) {
  if (name == "chp") return ModelTag::chp;
  if (name == "dchp") return ModelTag::dchp;
  if (name == "cmmhp") return ModelTag::cmmhp;
  if (name == "immhp") return ModelTag::immhp;
  throw InputError("unknown model '" + name + "' (expected chp, dchp, cmmhp, or immhp)");
}

ModelTag model_tag(const ModelParams& params) {
  return std::visit(
      [](const auto& p) -> ModelTag {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ChpParams>) return ModelTag::chp;
        if constexpr (std::is_same_v<P, DchpParams>) return ModelTag::dchp;
        if constexpr (std::is_same_v<P, CmmhpParams>) return ModelTag::cmmhp;
        if constexpr (std::is_same_v<P, ImmhpParams>) return ModelTag::immhp;
      },
      params);
}

int model_n_nodes(const ModelParams& params) {
  return std::visit([](const auto& p) { return p.n_nodes(); }, params);
}

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// |delta| is smoothed to sqrt(delta^2 + eps): the raw kink at equal ranks
// acts like an L1 penalty that fuses fitted ranks into exact ties during
// optimization.  The smoothing width (1e-4) is invisible at data scale.
constexpr double kRankGapSmooth2 = 1e-8;

static inline double rank_gap(double delta) {
  return std::sqrt(delta * delta + kRankGapSmooth2);
}

double excitation_strength(const EtaParams& eta, double f_i, double f_j) {
  double delta = f_i - f_j;
  return eta.scale * f_i * f_j * std::exp(-eta.rank_decay * rank_gap(delta)) *
         logistic(eta.asymmetry * delta);
}

double excitation_strength_grad(const EtaParams& eta, double f_i, double f_j,
                                ExcitationGrad& grad) {
  double delta = f_i - f_j;
  double gap = rank_gap(delta);
  double sgn = delta / gap; // d gap / d delta
  double damp = std::exp(-eta.rank_decay * gap);
  double lg = logistic(eta.asymmetry * delta);
  double lg_c = logistic(-eta.asymmetry * delta); // 1 - lg, computed stably
  double g = eta.scale * f_i * f_j * damp * lg;
  grad.d_scale = f_i * f_j * damp * lg;
  grad.d_rank_decay = -gap * g;
  grad.d_asymmetry = delta * lg_c * g;
  grad.d_fi = eta.scale * f_j * damp * lg +
              g * (-eta.rank_decay * sgn + eta.asymmetry * lg_c);
  grad.d_fj = eta.scale * f_i * damp * lg +
              g * (eta.rank_decay * sgn - eta.asymmetry * lg_c);
  return g;
}

double chp_intensity(const ChpParams& p, int i, int j,
                     std::span<const double> history, double t) {
  HawkesParams hp{p.baseline, excitation_strength(p.eta, p.ranks[i], p.ranks[j]),
                  p.decay};
  return hawkes_intensity(hp, history, t);
}

double chp_loglik(const ChpParams& p, const PairHistories& h, double T) {
  double ll = 0.0;
  int n = h.n_nodes();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double a = excitation_strength(p.eta, p.ranks[i], p.ranks[j]);
      double pll =
          pair_hawkes_eval<false>(p.baseline, a, p.decay, h.times(i, j), T).loglik;
      if (pll == kNegInf) return kNegInf;
      ll += pll;
    }
  }
  return ll;
}

double dchp_loglik(const DchpParams& p, const PairHistories& h, double T) {
  double ll = 0.0;
  int n = h.n_nodes();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double b = p.out_rate[i] + p.in_rate[j];
      double a = excitation_strength(p.eta, p.ranks[i], p.ranks[j]);
      double pll = pair_hawkes_eval<false>(b, a, p.decay, h.times(i, j), T).loglik;
      if (pll == kNegInf) return kNegInf;
      ll += pll;
    }
  }
  return ll;
}

double chp_loglik_grad(const ChpParams& p, const PairHistories& h, double T,
                       ChpGrad& grad) {
  int n = h.n_nodes();
  grad = ChpGrad{};
  grad.ranks = Eigen::VectorXd::Zero(n);
  double ll = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      ExcitationGrad eg;
      double a = excitation_strength_grad(p.eta, p.ranks[i], p.ranks[j], eg);
      auto ev = pair_hawkes_eval<true>(p.baseline, a, p.decay, h.times(i, j), T);
      if (ev.loglik == kNegInf) return kNegInf;
      ll += ev.loglik;
      grad.baseline += ev.d_baseline;
      grad.decay += ev.d_decay;
      grad.eta.scale += ev.d_excitation * eg.d_scale;
      grad.eta.rank_decay += ev.d_excitation * eg.d_rank_decay;
      grad.eta.asymmetry += ev.d_excitation * eg.d_asymmetry;
      grad.ranks[i] += ev.d_excitation * eg.d_fi;
      grad.ranks[j] += ev.d_excitation * eg.d_fj;
    }
  }
  return ll;
}

double dchp_loglik_grad(const DchpParams& p, const PairHistories& h, double T,
                        DchpGrad& grad) {
  int n = h.n_nodes();
  grad = DchpGrad{};
  grad.out_rate = Eigen::VectorXd::Zero(n);
  grad.in_rate = Eigen::VectorXd::Zero(n);
  grad.ranks = Eigen::VectorXd::Zero(n);
  double ll = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      ExcitationGrad eg;
      double a = excitation_strength_grad(p.eta, p.ranks[i], p.ranks[j], eg);
      double b = p.out_rate[i] + p.in_rate[j];
      auto ev = pair_hawkes_eval<true>(b, a, p.decay, h.times(i, j), T);
      if (ev.loglik == kNegInf) return kNegInf;
      ll += ev.loglik;
      grad.out_rate[i] += ev.d_baseline;
      grad.in_rate[j] += ev.d_baseline;
      grad.decay += ev.d_decay;
      grad.eta.scale += ev.d_excitation * eg.d_scale;
      grad.eta.rank_decay += ev.d_excitation * eg.d_rank_decay;
      grad.eta.asymmetry += ev.d_excitation * eg.d_asymmetry;
      grad.ranks[i] += ev.d_excitation * eg.d_fi;
      grad.ranks[j] += ev.d_excitation * eg.d_fj;
    }
  }
  return ll;
}

MmhpPairRates cmmhp_rates(const CmmhpParams& p, int i, int j) {
  MmhpPairRates r;
  double f_i = p.ranks[i];
  double f_j = p.ranks[j];
  r.inactive_rate = p.out_rate[i] + p.in_rate[j];
  r.active_rate = r.inactive_rate * (1.0 + p.active_boost);
  // no logistic factor here: the latent state plays that role
  r.excitation = p.eta.scale * f_i * f_j *
                 std::exp(-p.eta.rank_decay * rank_gap(f_i - f_j));
  r.decay = p.decay;
  r.leave_active = std::exp(-p.eta.asymmetry * f_i);
  r.leave_inactive = std::exp(-p.eta.asymmetry * f_j);
  return r;
}

MmhpPairRates immhp_rates(const ImmhpParams& p, int i, int j) {
  const ImmhpPairParams& q = p.pair(i, j);
  MmhpPairRates r;
  r.inactive_rate = q.inactive_rate;
  r.active_rate = q.inactive_rate * (1.0 + q.active_boost);
  r.excitation = q.excitation;
  r.decay = q.decay;
  r.leave_active = q.leave_active;
  r.leave_inactive = q.leave_inactive;
  return r;
}

double mmhp_pair_loglik(const MmhpPairRates& r, std::span<const double> events,
                        double T) {
  double rate_sum = r.leave_active + r.leave_inactive;
  if (!(rate_sum > 0.0)) {
    throw InputError("CTMC leave rates must not both be zero");
  }
  double pi_a = r.leave_inactive / rate_sum;
  double la = std::log(pi_a);
  double li = std::log1p(-pi_a);

  double esum = 0.0; // excitation sum at the left endpoint of the interval
  double prev = 0.0;
  std::size_t m = 0;
  auto advance = [&](double t_end_interval, bool has_event) {
    double d = t_end_interval - prev;
    if (m > 0) {
      CtmcMatrix P = ctmc_transition(
          CtmcParams{r.leave_active, r.leave_inactive}, d);
      double na = log_sum_exp(la + std::log(P.p[kActive][kActive]),
                              li + std::log(P.p[kInactive][kActive]));
      double ni = log_sum_exp(la + std::log(P.p[kActive][kInactive]),
                              li + std::log(P.p[kInactive][kInactive]));
      la = na;
      li = ni;
    }
    double e = std::exp(-r.decay * d);
    double comp_a = r.active_rate * d + r.excitation / r.decay * esum * (1.0 - e);
    if (has_event) {
      double lam_end = r.active_rate + r.excitation * esum * e;
      la += std::log(lam_end) - comp_a;
      li += std::log(r.inactive_rate) - r.inactive_rate * d;
      esum = esum * e + 1.0;
    } else {
      la -= comp_a;
      li -= r.inactive_rate * d;
    }
    prev = t_end_interval;
    ++m;
  };

  for (double t : events) advance(t, true);
  advance(T, false);
  return log_sum_exp(la, li);
}

MmhpFilter mmhp_filter(const MmhpPairRates& r, std::span<const double> events,
                       double T) {
  double rate_sum = r.leave_active + r.leave_inactive;
  if (!(rate_sum > 0.0)) {
    throw InputError("CTMC leave rates must not both be zero");
  }
  int M = static_cast<int>(events.size());
  int n_int = M + 1;

  Eigen::VectorXd dur(n_int), em_a(n_int), em_i(n_int), comp_a(n_int);
  Eigen::MatrixXd logP(2 * n_int, 2); // transition into interval m stored at rows 2m..2m+1
  {
    double esum = 0.0;
    double prev = 0.0;
    for (int m = 0; m < n_int; ++m) {
      bool has_event = m < M;
      double t_end = has_event ? events[static_cast<std::size_t>(m)] : T;
      double d = t_end - prev;
      dur[m] = d;
      CtmcMatrix P =
          ctmc_transition(CtmcParams{r.leave_active, r.leave_inactive}, d);
      logP(2 * m + kActive, kActive) = std::log(P.p[kActive][kActive]);
      logP(2 * m + kActive, kInactive) = std::log(P.p[kActive][kInactive]);
      logP(2 * m + kInactive, kActive) = std::log(P.p[kInactive][kActive]);
      logP(2 * m + kInactive, kInactive) = std::log(P.p[kInactive][kInactive]);
      double e = std::exp(-r.decay * d);
      comp_a[m] = r.active_rate * d + r.excitation / r.decay * esum * (1.0 - e);
      if (has_event) {
        double lam_end = r.active_rate + r.excitation * esum * e;
        em_a[m] = std::log(lam_end) - comp_a[m];
        em_i[m] = std::log(r.inactive_rate) - r.inactive_rate * d;
        esum = esum * e + 1.0;
      } else {
        em_a[m] = -comp_a[m];
        em_i[m] = -r.inactive_rate * d;
      }
      prev = t_end;
    }
  }

  MmhpFilter out;
  out.log_forward.resize(n_int, 2);
  out.log_backward.resize(n_int, 2);
  out.smoothed.resize(n_int, 2);
  out.viterbi.assign(static_cast<std::size_t>(n_int), kActive);

  double pi_a = r.leave_inactive / rate_sum;
  out.log_forward(0, kActive) = std::log(pi_a) + em_a[0];
  out.log_forward(0, kInactive) = std::log1p(-pi_a) + em_i[0];
  for (int m = 1; m < n_int; ++m) {
    for (int z = 0; z < 2; ++z) {
      double v = log_sum_exp(out.log_forward(m - 1, kActive) + logP(2 * m + kActive, z),
                             out.log_forward(m - 1, kInactive) + logP(2 * m + kInactive, z));
      out.log_forward(m, z) = v + (z == kActive ? em_a[m] : em_i[m]);
    }
  }
  out.loglik =
      log_sum_exp(out.log_forward(n_int - 1, kActive), out.log_forward(n_int - 1, kInactive));

  out.log_backward.row(n_int - 1).setZero();
  for (int m = n_int - 2; m >= 0; --m) {
    for (int z = 0; z < 2; ++z) {
      double to_a = logP(2 * (m + 1) + z, kActive) + em_a[m + 1] +
                    out.log_backward(m + 1, kActive);
      double to_i = logP(2 * (m + 1) + z, kInactive) + em_i[m + 1] +
                    out.log_backward(m + 1, kInactive);
      out.log_backward(m, z) = log_sum_exp(to_a, to_i);
    }
  }

  for (int m = 0; m < n_int; ++m) {
    double sa = out.log_forward(m, kActive) + out.log_backward(m, kActive);
    double si = out.log_forward(m, kInactive) + out.log_backward(m, kInactive);
    double norm = log_sum_exp(sa, si);
    out.smoothed(m, kActive) = std::exp(sa - norm);
    out.smoothed(m, kInactive) = std::exp(si - norm);
  }

  // Viterbi over the same chain; ties resolve to the active state
  Eigen::MatrixXd score(n_int, 2);
  Eigen::MatrixXi from(n_int, 2);
  score(0, kActive) = std::log(pi_a) + em_a[0];
  score(0, kInactive) = std::log1p(-pi_a) + em_i[0];
  for (int m = 1; m < n_int; ++m) {
    for (int z = 0; z < 2; ++z) {
      double via_a = score(m - 1, kActive) + logP(2 * m + kActive, z);
      double via_i = score(m - 1, kInactive) + logP(2 * m + kInactive, z);
      int best = via_a >= via_i ? kActive : kInactive;
      from(m, z) = best;
      score(m, z) = (best == kActive ? via_a : via_i) +
                    (z == kActive ? em_a[m] : em_i[m]);
    }
  }
  int z = score(n_int - 1, kActive) >= score(n_int - 1, kInactive) ? kActive
                                                                   : kInactive;
  for (int m = n_int - 1; m >= 0; --m) {
    out.viterbi[static_cast<std::size_t>(m)] = z;
    if (m > 0) z = from(m, z);
  }

  out.durations = dur;
  out.active_compensator = comp_a;
  return out;
}

double cmmhp_loglik(const CmmhpParams& p, const PairHistories& h, double T) {
  double ll = 0.0;
  int n = h.n_nodes();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      ll += mmhp_pair_loglik(cmmhp_rates(p, i, j), h.times(i, j), T);
    }
  }
  return ll;
}

double immhp_loglik(const ImmhpParams& p, const PairHistories& h, double T) {
  double ll = 0.0;
  int n = h.n_nodes();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      ll += mmhp_pair_loglik(immhp_rates(p, i, j), h.times(i, j), T);
    }
  }
  return ll;
}

double log_prior(const ChpParams& p) {
  double lp = half_normal_lp(p.baseline) + half_normal_lp(p.eta.scale) +
              half_normal_lp(p.eta.rank_decay) + half_normal_lp(p.eta.asymmetry) +
              half_normal_lp(p.decay);
  for (int i = 0; i < p.ranks.size(); ++i) lp += uniform01_lp(p.ranks[i]);
  return lp;
}

double log_prior(const DchpParams& p) {
  double lp = half_normal_lp(p.eta.scale) + half_normal_lp(p.eta.rank_decay) +
              half_normal_lp(p.eta.asymmetry) + half_normal_lp(p.decay);
  for (int i = 0; i < p.out_rate.size(); ++i) lp += laplace_nonneg_lp(p.out_rate[i]);
  for (int i = 0; i < p.in_rate.size(); ++i) lp += laplace_nonneg_lp(p.in_rate[i]);
  for (int i = 0; i < p.ranks.size(); ++i) lp += uniform01_lp(p.ranks[i]);
  return lp;
}

double log_prior(const CmmhpParams& p) {
  double lp = half_normal_lp(p.eta.scale) + half_normal_lp(p.eta.rank_decay) +
              half_normal_lp(p.eta.asymmetry) + half_normal_lp(p.decay) +
              half_normal_lp(p.active_boost);
  for (int i = 0; i < p.out_rate.size(); ++i) lp += laplace_nonneg_lp(p.out_rate[i]);
  for (int i = 0; i < p.in_rate.size(); ++i) lp += laplace_nonneg_lp(p.in_rate[i]);
  for (int i = 0; i < p.ranks.size(); ++i) lp += uniform01_lp(p.ranks[i]);
  return lp;
}

double log_prior(const ImmhpParams& p) {
  double lp = 0.0;
  for (int i = 0; i < p.nodes; ++i) {
    for (int j = 0; j < p.nodes; ++j) {
      if (i == j) continue;
      const ImmhpPairParams& q = p.pair(i, j);
      lp += half_normal_lp(q.inactive_rate) + half_normal_lp(q.active_boost) +
            half_normal_lp(q.excitation) + half_normal_lp(q.decay) +
            half_normal_lp(q.leave_active) + half_normal_lp(q.leave_inactive);
    }
  }
  return lp;
}

double log_prior(const ModelParams& params) {
  return std::visit([](const auto& p) { return log_prior(p); }, params);
}

double log_prior_grad(const ChpParams& p, ChpGrad& grad) {
  double lp = log_prior(p);
  if (lp == kNegInf) return lp;
  grad.baseline -= p.baseline;
  grad.eta.scale -= p.eta.scale;
  grad.eta.rank_decay -= p.eta.rank_decay;
  grad.eta.asymmetry -= p.eta.asymmetry;
  grad.decay -= p.decay;
  return lp;
}

double log_prior_grad(const DchpParams& p, DchpGrad& grad) {
  double lp = log_prior(p);
  if (lp == kNegInf) return lp;
  grad.eta.scale -= p.eta.scale;
  grad.eta.rank_decay -= p.eta.rank_decay;
  grad.eta.asymmetry -= p.eta.asymmetry;
  grad.decay -= p.decay;
  grad.out_rate.array() -= 1.0;
  grad.in_rate.array() -= 1.0;
  return lp;
}

double loglik(const ModelParams& params, const PairHistories& h, double T) {
  return std::visit(
      [&](const auto& p) -> double {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ChpParams>) return chp_loglik(p, h, T);
        if constexpr (std::is_same_v<P, DchpParams>) return dchp_loglik(p, h, T);
        if constexpr (std::is_same_v<P, CmmhpParams>) return cmmhp_loglik(p, h, T);
        if constexpr (std::is_same_v<P, ImmhpParams>) return immhp_loglik(p, h, T);
      },
      params);
}

double log_posterior(const ModelParams& params, const PairHistories& h,
                     double T) {
  double lp = log_prior(params);
  if (lp == kNegInf) return kNegInf;
  return lp + loglik(params, h, T);
}

}  // namespace latrank
