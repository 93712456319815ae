#include "latrank/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include <Eigen/Cholesky>

#include "latrank/errors.hpp"
#include "latrank/io.hpp"
#include "latrank/parallel.hpp"

namespace latrank {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kBoundaryNudge = 1e-9;

double logit(double p) { return std::log(p) - std::log1p(-p); }

void warn_boundary_once() {
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true)) {
    std::fprintf(stderr,
                 "warning: parameter at the support boundary nudged inward by "
                 "%g before transforming\n",
                 kBoundaryNudge);
  }
}

double safe_log(double x) {
  if (x <= 0.0) {
    warn_boundary_once();
    x = kBoundaryNudge;
  }
  return std::log(x);
}

double safe_logit(double f) {
  if (f <= 0.0 || f >= 1.0) {
    warn_boundary_once();
    f = std::clamp(f, kBoundaryNudge, 1.0 - kBoundaryNudge);
  }
  return logit(f);
}

}  // namespace

TransformLayout transform_layout(ModelTag tag, int n_nodes) {
  TransformLayout lay;
  auto add = [&](const std::string& name, bool is_logit_coord) {
    lay.names.push_back(name);
    lay.is_logit.push_back(is_logit_coord);
  };
  auto add_eta_decay = [&]() {
    add("eta_scale", false);
    add("eta_rank_decay", false);
    add("eta_asymmetry", false);
    add("decay", false);
  };
  auto add_ranks = [&]() {
    for (int i = 1; i <= n_nodes; ++i) add("f_" + std::to_string(i), true);
  };
  switch (tag) {
    case ModelTag::chp:
      add("baseline", false);
      add_eta_decay();
      add_ranks();
      break;
    case ModelTag::dchp:
      for (int i = 1; i <= n_nodes; ++i) add("out_rate_" + std::to_string(i), false);
      for (int i = 1; i <= n_nodes; ++i) add("in_rate_" + std::to_string(i), false);
      add_eta_decay();
      add_ranks();
      break;
    case ModelTag::cmmhp:
      for (int i = 1; i <= n_nodes; ++i) add("out_rate_" + std::to_string(i), false);
      for (int i = 1; i <= n_nodes; ++i) add("in_rate_" + std::to_string(i), false);
      add("active_boost", false);
      add_eta_decay();
      add_ranks();
      break;
    case ModelTag::immhp:
      for (int i = 1; i <= n_nodes; ++i) {
        for (int j = 1; j <= n_nodes; ++j) {
          if (i == j) continue;
          std::string stem = "p_" + std::to_string(i) + "_" + std::to_string(j) + "_";
          add(stem + "inactive_rate", false);
          add(stem + "active_boost", false);
          add(stem + "excitation", false);
          add(stem + "decay", false);
          add(stem + "leave_active", false);
          add(stem + "leave_inactive", false);
        }
      }
      break;
  }
  return lay;
}

Eigen::VectorXd flatten_params(const ModelParams& params) {
  switch (model_tag(params)) {
    case ModelTag::chp: {
      const auto& p = std::get<ChpParams>(params);
      int n = p.n_nodes();
      Eigen::VectorXd x(5 + n);
      x << p.baseline, p.eta.scale, p.eta.rank_decay, p.eta.asymmetry, p.decay,
          p.ranks;
      return x;
    }
    case ModelTag::dchp: {
      const auto& p = std::get<DchpParams>(params);
      int n = p.n_nodes();
      Eigen::VectorXd x(3 * n + 4);
      x << p.out_rate, p.in_rate, p.eta.scale, p.eta.rank_decay, p.eta.asymmetry,
          p.decay, p.ranks;
      return x;
    }
    case ModelTag::cmmhp: {
      const auto& p = std::get<CmmhpParams>(params);
      int n = p.n_nodes();
      Eigen::VectorXd x(3 * n + 5);
      x << p.out_rate, p.in_rate, p.active_boost, p.eta.scale, p.eta.rank_decay,
          p.eta.asymmetry, p.decay, p.ranks;
      return x;
    }
    case ModelTag::immhp: {
      const auto& p = std::get<ImmhpParams>(params);
      int n = p.nodes;
      Eigen::VectorXd x(static_cast<Eigen::Index>(n) * (n - 1) * 6);
      Eigen::Index k = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (i == j) continue;
          const auto& q = p.pair(i, j);
          x[k++] = q.inactive_rate;
          x[k++] = q.active_boost;
          x[k++] = q.excitation;
          x[k++] = q.decay;
          x[k++] = q.leave_active;
          x[k++] = q.leave_inactive;
        }
      }
      return x;
    }
  }
  throw InputError("unreachable model tag");
}

ModelParams unflatten_params(ModelTag tag, int n_nodes, const Eigen::VectorXd& x) {
  switch (tag) {
    case ModelTag::chp: {
      ChpParams p;
      p.baseline = x[0];
      p.eta.scale = x[1];
      p.eta.rank_decay = x[2];
      p.eta.asymmetry = x[3];
      p.decay = x[4];
      p.ranks = x.segment(5, n_nodes);
      return p;
    }
    case ModelTag::dchp: {
      DchpParams p;
      p.out_rate = x.segment(0, n_nodes);
      p.in_rate = x.segment(n_nodes, n_nodes);
      p.eta.scale = x[2 * n_nodes];
      p.eta.rank_decay = x[2 * n_nodes + 1];
      p.eta.asymmetry = x[2 * n_nodes + 2];
      p.decay = x[2 * n_nodes + 3];
      p.ranks = x.segment(2 * n_nodes + 4, n_nodes);
      return p;
    }
    case ModelTag::cmmhp: {
      CmmhpParams p;
      p.out_rate = x.segment(0, n_nodes);
      p.in_rate = x.segment(n_nodes, n_nodes);
      p.active_boost = x[2 * n_nodes];
      p.eta.scale = x[2 * n_nodes + 1];
      p.eta.rank_decay = x[2 * n_nodes + 2];
      p.eta.asymmetry = x[2 * n_nodes + 3];
      p.decay = x[2 * n_nodes + 4];
      p.ranks = x.segment(2 * n_nodes + 5, n_nodes);
      return p;
    }
    case ModelTag::immhp: {
      ImmhpParams p = make_immhp_params(n_nodes);
      Eigen::Index k = 0;
      for (int i = 0; i < n_nodes; ++i) {
        for (int j = 0; j < n_nodes; ++j) {
          if (i == j) continue;
          auto& q = p.pair(i, j);
          q.inactive_rate = x[k++];
          q.active_boost = x[k++];
          q.excitation = x[k++];
          q.decay = x[k++];
          q.leave_active = x[k++];
          q.leave_inactive = x[k++];
        }
      }
      return p;
    }
  }
  throw InputError("unreachable model tag");
}

Eigen::VectorXd to_unconstrained(const ModelParams& params) {
  ModelTag tag = model_tag(params);
  TransformLayout lay = transform_layout(tag, model_n_nodes(params));
  Eigen::VectorXd x = flatten_params(params);
  Eigen::VectorXd theta(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    theta[k] = lay.is_logit[static_cast<std::size_t>(k)] ? safe_logit(x[k])
                                                         : safe_log(x[k]);
  }
  return theta;
}

ModelParams from_unconstrained(ModelTag tag, int n_nodes,
                               const Eigen::VectorXd& theta) {
  TransformLayout lay = transform_layout(tag, n_nodes);
  Eigen::VectorXd x(theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    x[k] = lay.is_logit[static_cast<std::size_t>(k)] ? logistic(theta[k])
                                                     : std::exp(theta[k]);
  }
  return unflatten_params(tag, n_nodes, x);
}

double transform_log_jacobian(ModelTag tag, int n_nodes,
                              const Eigen::VectorXd& theta) {
  TransformLayout lay = transform_layout(tag, n_nodes);
  double lj = 0.0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    if (lay.is_logit[static_cast<std::size_t>(k)]) {
      // d logistic / d theta = sigma(theta) sigma(-theta)
      lj += std::log(logistic(theta[k])) + std::log(logistic(-theta[k]));
    } else {
      lj += theta[k];
    }
  }
  return lj;
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    double h = 1e-5 * std::max(1.0, std::abs(x[k]));
    probe[k] = x[k] + h;
    double up = f(probe);
    probe[k] = x[k] - h;
    double dn = f(probe);
    probe[k] = x[k];
    g[k] = (up - dn) / (2.0 * h);
  }
  return g;
}

namespace {

// objective in unconstrained space: value plus gradient when available
struct Objective {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)> value_grad;
};

struct OptimOut {
  Eigen::VectorXd x;
  double fx = kNegInf;
  double gnorm = std::numeric_limits<double>::infinity();
  int iters = 0;
  bool converged = false;
};

// L-BFGS ascent with Armijo backtracking; memory 8, curvature-skipped pairs.
OptimOut lbfgs_maximize(const Objective& obj, Eigen::VectorXd x0, int max_iter,
                        double tol) {
  OptimOut out;
  const int mem = 8;
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd g(x.size());
  double fx = obj.value_grad(x, g);
  if (!std::isfinite(fx)) {
    out.x = x;
    out.fx = kNegInf;
    return out;
  }
  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  int consec_small = 0;
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    // two-loop recursion on the ascent direction
    Eigen::VectorXd q = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t h = s_hist.size(); h-- > 0;) {
      alpha[h] = rho_hist[h] * s_hist[h].dot(q);
      q -= alpha[h] * y_hist[h];
    }
    if (!s_hist.empty()) {
      const auto& s = s_hist.back();
      const auto& y = y_hist.back();
      q *= s.dot(y) / y.dot(y);
    }
    for (std::size_t h = 0; h < s_hist.size(); ++h) {
      double beta = rho_hist[h] * y_hist[h].dot(q);
      q += (alpha[h] - beta) * s_hist[h];
    }
    Eigen::VectorXd d = q;
    double dg = d.dot(g);
    if (!(dg > 0.0) || !d.allFinite()) {
      d = g;
      dg = g.squaredNorm();
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = iter == 0 ? 1.0 / (1.0 + g.norm()) : 1.0;
    Eigen::VectorXd x_new, g_new(x.size());
    double fx_new = kNegInf;
    bool ok = false;
    for (int bt = 0; bt < 40; ++bt) {
      x_new = x + step * d;
      fx_new = obj.value_grad(x_new, g_new);
      if (std::isfinite(fx_new) && fx_new >= fx + 1e-4 * step * dg) {
        ok = true;
        break;
      }
      step *= 0.5;
    }
    if (!ok) break;

    Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd y = g - g_new; // gradient change of the negated objective
    double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > mem) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }

    double change = fx_new - fx;
    x = std::move(x_new);
    g = g_new;
    fx = fx_new;
    double gnorm = g.norm();
    if (gnorm <= 1e-6 * (1.0 + std::abs(fx))) {
      out.converged = true;
      ++iter;
      break;
    }
    if (std::abs(change) <= tol * (1.0 + std::abs(fx))) {
      if (++consec_small >= 2) {
        out.converged = true;
        ++iter;
        break;
      }
    } else {
      consec_small = 0;
    }
  }
  out.x = std::move(x);
  out.fx = fx;
  out.gnorm = g.norm();
  out.iters = iter;
  return out;
}

Eigen::VectorXd grad_to_theta(const TransformLayout& lay,
                              const Eigen::VectorXd& x,
                              const Eigen::VectorXd& gx,
                              const Eigen::VectorXd& theta) {
  Eigen::VectorXd gt(gx.size());
  for (Eigen::Index k = 0; k < gx.size(); ++k) {
    if (lay.is_logit[static_cast<std::size_t>(k)]) {
      gt[k] = gx[k] * logistic(theta[k]) * logistic(-theta[k]);
    } else {
      gt[k] = gx[k] * x[k];
    }
  }
  return gt;
}

Eigen::VectorXd flatten_chp_grad(const ChpGrad& g) {
  Eigen::VectorXd v(5 + g.ranks.size());
  v << g.baseline, g.eta.scale, g.eta.rank_decay, g.eta.asymmetry, g.decay,
      g.ranks;
  return v;
}

Eigen::VectorXd flatten_dchp_grad(const DchpGrad& g) {
  Eigen::VectorXd v(3 * g.ranks.size() + 4);
  v << g.out_rate, g.in_rate, g.eta.scale, g.eta.rank_decay, g.eta.asymmetry,
      g.decay, g.ranks;
  return v;
}

// log posterior density in theta space, transform Jacobian included.  The
// Jacobian term is what makes the mode exist: with a flat prior on a bounded
// parameter the natural-space supremum can sit on the boundary, where the
// logit runs off to infinity and ranks collapse into exact ties.
double logpost_theta(ModelTag tag, int n_nodes, const Eigen::VectorXd& theta,
                     const PairHistories& h, double T) {
  ModelParams p = from_unconstrained(tag, n_nodes, theta);
  double base = log_posterior(p, h, T);
  if (!std::isfinite(base)) return kNegInf;
  return base + transform_log_jacobian(tag, n_nodes, theta);
}

// adds d(log|J|)/d(theta) in place and returns log|J|
double jacobian_with_grad(const TransformLayout& lay,
                          const Eigen::VectorXd& theta, Eigen::VectorXd& gt) {
  double lj = 0.0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    if (lay.is_logit[static_cast<std::size_t>(k)]) {
      double s = logistic(theta[k]);
      lj += std::log(s) + std::log(logistic(-theta[k]));
      gt[k] += 1.0 - 2.0 * s;
    } else {
      lj += theta[k];
      gt[k] += 1.0;
    }
  }
  return lj;
}

Objective make_map_objective(ModelTag tag, int n_nodes, const PairHistories& h,
                             double T) {
  Objective obj;
  obj.value = [=, &h](const Eigen::VectorXd& theta) {
    return logpost_theta(tag, n_nodes, theta, h, T);
  };
  if (tag == ModelTag::chp) {
    TransformLayout lay = transform_layout(tag, n_nodes);
    obj.value_grad = [=, &h](const Eigen::VectorXd& theta, Eigen::VectorXd& gt) {
      ModelParams mp = from_unconstrained(tag, n_nodes, theta);
      const auto& p = std::get<ChpParams>(mp);
      ChpGrad g;
      double ll = chp_loglik_grad(p, h, T, g);
      if (!std::isfinite(ll)) return kNegInf;
      double lp = log_prior_grad(p, g);
      Eigen::VectorXd gx = flatten_chp_grad(g);
      gt = grad_to_theta(lay, flatten_params(mp), gx, theta);
      return ll + lp + jacobian_with_grad(lay, theta, gt);
    };
  } else if (tag == ModelTag::dchp) {
    TransformLayout lay = transform_layout(tag, n_nodes);
    obj.value_grad = [=, &h](const Eigen::VectorXd& theta, Eigen::VectorXd& gt) {
      ModelParams mp = from_unconstrained(tag, n_nodes, theta);
      const auto& p = std::get<DchpParams>(mp);
      DchpGrad g;
      g.out_rate = Eigen::VectorXd::Zero(n_nodes);
      g.in_rate = Eigen::VectorXd::Zero(n_nodes);
      g.ranks = Eigen::VectorXd::Zero(n_nodes);
      double ll = dchp_loglik_grad(p, h, T, g);
      if (!std::isfinite(ll)) return kNegInf;
      double lp = log_prior_grad(p, g);
      Eigen::VectorXd gx = flatten_dchp_grad(g);
      gt = grad_to_theta(lay, flatten_params(mp), gx, theta);
      return ll + lp + jacobian_with_grad(lay, theta, gt);
    };
  } else {
    auto value = obj.value;
    obj.value_grad = [value](const Eigen::VectorXd& theta, Eigen::VectorXd& gt) {
      double fx = value(theta);
      if (!std::isfinite(fx)) return kNegInf;
      gt = fd_gradient(value, theta);
      return fx;
    };
  }
  return obj;
}

// data-driven starting point: ranks from win fractions, rates from moments
ModelParams smart_init(ModelTag tag, const PairHistories& h, double T) {
  int n = h.n_nodes();
  Eigen::VectorXd wins = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd losses = Eigen::VectorXd::Zero(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      auto m = static_cast<double>(h.times(i, j).size());
      wins[i] += m;
      losses[j] += m;
      total += m;
    }
  }
  Eigen::VectorXd ranks(n);
  for (int i = 0; i < n; ++i) {
    double games = wins[i] + losses[i];
    double frac = games > 0 ? wins[i] / games : 0.5;
    ranks[i] = std::clamp(frac, 0.05, 0.95);
  }
  double horizon = T > 0 ? T : 1.0;
  double n_pairs = static_cast<double>(n) * (n - 1);
  EtaParams eta{1.0, 0.5, 1.0};

  switch (tag) {
    case ModelTag::chp: {
      ChpParams p;
      p.baseline = 0.5 * total / (n_pairs * horizon) + 1e-4;
      p.eta = eta;
      p.decay = 1.0;
      p.ranks = ranks;
      return p;
    }
    case ModelTag::dchp:
    case ModelTag::cmmhp: {
      Eigen::VectorXd out_rate(n), in_rate(n);
      for (int i = 0; i < n; ++i) {
        out_rate[i] = 0.25 * wins[i] / ((n - 1) * horizon) + 1e-3;
        in_rate[i] = 0.25 * losses[i] / ((n - 1) * horizon) + 1e-3;
      }
      if (tag == ModelTag::dchp) {
        DchpParams p;
        p.out_rate = out_rate;
        p.in_rate = in_rate;
        p.eta = eta;
        p.decay = 1.0;
        p.ranks = ranks;
        return p;
      }
      CmmhpParams p;
      p.out_rate = out_rate;
      p.in_rate = in_rate;
      p.active_boost = 1.0;
      p.eta = eta;
      p.decay = 1.0;
      p.ranks = ranks;
      return p;
    }
    case ModelTag::immhp: {
      ImmhpParams p = make_immhp_params(n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (i == j) continue;
          auto& q = p.pair(i, j);
          q.inactive_rate =
              0.5 * static_cast<double>(h.times(i, j).size()) / horizon + 1e-3;
          q.active_boost = 1.0;
          q.excitation = 0.5;
          q.decay = 1.0;
          q.leave_active = 0.5;
          q.leave_inactive = 0.5;
        }
      }
      return p;
    }
  }
  throw InputError("unreachable model tag");
}

// 6-parameter log posterior of one independent MMHP pair in theta space
double immhp_pair_logpost_theta(const Eigen::VectorXd& theta,
                                std::span<const double> events, double T) {
  const double kLogHalfNormalNorm = 0.5 * std::log(2.0 / M_PI);
  MmhpPairRates r;
  double x0 = std::exp(theta[0]);
  double x1 = std::exp(theta[1]);
  double x2 = std::exp(theta[2]);
  double x3 = std::exp(theta[3]);
  double x4 = std::exp(theta[4]);
  double x5 = std::exp(theta[5]);
  r.inactive_rate = x0;
  r.active_rate = x0 * (1.0 + x1);
  r.excitation = x2;
  r.decay = x3;
  r.leave_active = x4;
  r.leave_inactive = x5;
  double lp = 6.0 * kLogHalfNormalNorm -
              0.5 * (x0 * x0 + x1 * x1 + x2 * x2 + x3 * x3 + x4 * x4 + x5 * x5);
  // theta.sum() is the all-log-layout Jacobian, so this is the theta density
  return lp + mmhp_pair_loglik(r, events, T) + theta.sum();
}

Eigen::VectorXd immhp_pair_init_theta(std::span<const double> events, double T) {
  Eigen::VectorXd theta(6);
  double rate = 0.5 * static_cast<double>(events.size()) / std::max(T, 1.0) + 1e-3;
  theta << std::log(rate), std::log(1.0), std::log(0.5), std::log(1.0),
      std::log(0.5), std::log(0.5);
  return theta;
}

OptimOut run_restarts(const Objective& obj, const Eigen::VectorXd& theta0,
                      const MapConfig& config, std::uint64_t salt) {
  OptimOut best;
  for (int r = 0; r < std::max(1, config.restarts); ++r) {
    Eigen::VectorXd start = theta0;
    if (r > 0) {
      Rng rng(stream_seed(config.seed, salt, static_cast<std::uint64_t>(r)));
      for (Eigen::Index k = 0; k < start.size(); ++k) start[k] += 0.5 * rng.normal();
    }
    OptimOut out = lbfgs_maximize(obj, start, config.max_iter, config.tol);
    if (out.fx > best.fx) best = std::move(out);
  }
  return best;
}

}  // namespace

MapResult map_fit(ModelTag tag, const PairHistories& h, double T,
                  const MapConfig& config) {
  int n = h.n_nodes();
  if (n < 2) throw InputError("need at least two nodes to fit");

  if (tag == ModelTag::immhp) {
    // pairs are independent: fit each 6-parameter block on its own
    ImmhpParams fit = make_immhp_params(n);
    struct Slot {
      OptimOut out;
      int i = 0, j = 0;
    };
    std::vector<Slot> slots;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j) slots.push_back({OptimOut{}, i, j});
      }
    }
    parallel_for(static_cast<int>(slots.size()), config.threads, [&](int s) {
      int i = slots[static_cast<std::size_t>(s)].i;
      int j = slots[static_cast<std::size_t>(s)].j;
      std::span<const double> events(h.times(i, j));
      Objective obj;
      obj.value = [events, T](const Eigen::VectorXd& theta) {
        return immhp_pair_logpost_theta(theta, events, T);
      };
      obj.value_grad = [&obj](const Eigen::VectorXd& theta, Eigen::VectorXd& g) {
        double fx = obj.value(theta);
        if (!std::isfinite(fx)) return kNegInf;
        g = fd_gradient(obj.value, theta);
        return fx;
      };
      MapConfig pair_config = config;
      pair_config.seed = stream_seed(config.seed, 501, static_cast<std::uint64_t>(s));
      slots[static_cast<std::size_t>(s)].out =
          run_restarts(obj, immhp_pair_init_theta(events, T), pair_config, 17);
    });
    MapResult res;
    double total = 0.0;
    double gnorm2 = 0.0;
    bool all_conv = true;
    int iters = 0;
    for (const auto& s : slots) {
      if (!std::isfinite(s.out.fx)) {
        throw NumericalError("non-finite objective at all initializations for pair " +
                             std::to_string(s.i + 1) + "->" + std::to_string(s.j + 1));
      }
      total += s.out.fx - s.out.x.sum(); // report the natural-space value
      gnorm2 += s.out.gnorm * s.out.gnorm;
      all_conv = all_conv && s.out.converged;
      iters = std::max(iters, s.out.iters);
      auto& q = fit.pair(s.i, s.j);
      q.inactive_rate = std::exp(s.out.x[0]);
      q.active_boost = std::exp(s.out.x[1]);
      q.excitation = std::exp(s.out.x[2]);
      q.decay = std::exp(s.out.x[3]);
      q.leave_active = std::exp(s.out.x[4]);
      q.leave_inactive = std::exp(s.out.x[5]);
    }
    res.params = fit;
    res.log_posterior = total;
    res.converged = all_conv;
    res.iterations = iters;
    res.grad_norm = std::sqrt(gnorm2);
    return res;
  }

  Objective obj = make_map_objective(tag, n, h, T);
  Eigen::VectorXd theta0 = to_unconstrained(smart_init(tag, h, T));
  OptimOut best = run_restarts(obj, theta0, config, 7);
  if (!std::isfinite(best.fx)) {
    throw NumericalError("non-finite objective at all initializations");
  }
  MapResult res;
  res.params = from_unconstrained(tag, n, best.x);
  res.log_posterior = best.fx - transform_log_jacobian(tag, n, best.x);
  res.converged = best.converged;
  res.iterations = best.iters;
  res.grad_norm = best.gnorm;
  return res;
}

HawkesFit map_fit_hawkes(std::span<const double> events, double T,
                         const MapConfig& config) {
  const double kLogHalfNormalNorm = 0.5 * std::log(2.0 / M_PI);
  Objective obj;
  obj.value = [events, T, kLogHalfNormalNorm](const Eigen::VectorXd& theta) {
    double b = std::exp(theta[0]);
    double a = std::exp(theta[1]);
    double beta = std::exp(theta[2]);
    double lp = 3.0 * kLogHalfNormalNorm - 0.5 * (b * b + a * a + beta * beta);
    double ll = 0.0;
    double s = 0.0;
    double prev = 0.0;
    for (std::size_t m = 0; m < events.size(); ++m) {
      double t = events[m];
      if (m > 0) s = std::exp(-beta * (t - prev)) * (s + 1.0);
      double lam = b + a * s;
      if (!(lam > 0.0)) return kNegInf;
      ll += std::log(lam);
      prev = t;
    }
    ll -= b * T;
    double acc = 0.0;
    for (double t : events) acc += 1.0 - std::exp(-beta * (T - t));
    ll -= a / beta * acc;
    return lp + ll + theta.sum(); // log-layout Jacobian keeps the mode interior
  };
  obj.value_grad = [&obj](const Eigen::VectorXd& theta, Eigen::VectorXd& g) {
    double fx = obj.value(theta);
    if (!std::isfinite(fx)) return kNegInf;
    g = fd_gradient(obj.value, theta);
    return fx;
  };
  double rate = 0.5 * static_cast<double>(events.size()) / std::max(T, 1.0) + 1e-4;
  Eigen::VectorXd theta0(3);
  theta0 << std::log(rate), std::log(0.5), std::log(1.0);
  OptimOut best = run_restarts(obj, theta0, config, 3571);
  if (!std::isfinite(best.fx)) {
    throw NumericalError("non-finite objective at all initializations");
  }
  HawkesFit fit;
  fit.params = HawkesParams{std::exp(best.x[0]), std::exp(best.x[1]),
                            std::exp(best.x[2])};
  fit.log_posterior = best.fx - best.x.sum();
  fit.converged = best.converged;
  fit.grad_norm = best.gnorm;
  return fit;
}

RwmResult adaptive_rwm(const std::function<double(const Eigen::VectorXd&)>& log_target,
                       const Eigen::VectorXd& init, int warmup, int draws,
                       Rng& rng) {
  const Eigen::Index d = init.size();
  Eigen::VectorXd x = init;
  double lp = log_target(x);
  if (!std::isfinite(lp)) {
    throw NumericalError("sampler initialization has non-finite target");
  }

  double log_scale = std::log(0.5 / std::sqrt(static_cast<double>(d)));
  Eigen::MatrixXd chol = Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd sum_x = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd sum_xx = Eigen::MatrixXd::Zero(d, d);
  long accepted_warm = 0;

  auto propose = [&](Eigen::VectorXd& prop) {
    Eigen::VectorXd z(d);
    for (Eigen::Index k = 0; k < d; ++k) z[k] = rng.normal();
    prop = x + std::exp(log_scale) * (chol * z);
  };

  Eigen::VectorXd prop(d);
  for (int k = 0; k < warmup; ++k) {
    propose(prop);
    double lpp = log_target(prop);
    double log_alpha = lpp - lp;
    double alpha = std::isfinite(lpp) ? std::exp(std::min(0.0, log_alpha)) : 0.0;
    if (std::isfinite(lpp) && std::log(1.0 - rng.uniform()) < log_alpha) {
      x = prop;
      lp = lpp;
      ++accepted_warm;
    }
    // Robbins-Monro drift of the proposal scale toward ~0.3 acceptance
    log_scale += std::pow(k + 1.0, -0.6) * (alpha - 0.3);
    log_scale = std::clamp(log_scale, -12.0, 4.0);
    sum_x += x;
    sum_xx += x * x.transpose();
    if ((k + 1) % 50 == 0 && k + 1 >= 2 * d + 10) {
      double count = k + 1.0;
      Eigen::VectorXd mean = sum_x / count;
      Eigen::MatrixXd cov = sum_xx / count - mean * mean.transpose();
      double jitter = 1e-8 + 1e-6 * cov.diagonal().mean();
      cov.diagonal().array() += jitter;
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() == Eigen::Success) chol = llt.matrixL();
    }
  }
  if (warmup > 0 && accepted_warm == 0) {
    throw NumericalError(
        "no proposal accepted during warmup (dimension " + std::to_string(d) +
        ", final log scale " + std::to_string(log_scale) + ")");
  }

  RwmResult out;
  out.draws.resize(draws, d);
  out.log_target.resize(draws);
  long accepted = 0;
  for (int k = 0; k < draws; ++k) {
    propose(prop);
    double lpp = log_target(prop);
    if (std::isfinite(lpp) && std::log(1.0 - rng.uniform()) < lpp - lp) {
      x = prop;
      lp = lpp;
      ++accepted;
    }
    out.draws.row(k) = x;
    out.log_target[k] = lp;
  }
  out.accept_rate = draws > 0 ? static_cast<double>(accepted) / draws : 0.0;
  return out;
}

namespace {

double split_rhat_max(const Eigen::MatrixXd& values, int chains, int per_chain) {
  if (chains < 1 || per_chain < 4) return 1.0;
  int half = per_chain / 2;
  int m = 2 * chains;
  double worst = 1.0;
  for (Eigen::Index p = 0; p < values.cols(); ++p) {
    Eigen::VectorXd means(m), vars(m);
    for (int c = 0; c < chains; ++c) {
      for (int s = 0; s < 2; ++s) {
        int offset = c * per_chain + s * half;
        auto seg = values.col(p).segment(offset, half);
        double mu = seg.mean();
        means[2 * c + s] = mu;
        vars[2 * c + s] = (seg.array() - mu).square().sum() / (half - 1);
      }
    }
    double mu_all = means.mean();
    double b = half * (means.array() - mu_all).square().sum() / (m - 1);
    double w = vars.mean();
    if (w <= 0.0) continue;
    double var_plus = (half - 1.0) / half * w + b / half;
    worst = std::max(worst, std::sqrt(var_plus / w));
  }
  return worst;
}

}  // namespace

PosteriorDraws sample_posterior(ModelTag tag, const PairHistories& h, double T,
                                const SampleConfig& config) {
  int n = h.n_nodes();
  TransformLayout lay = transform_layout(tag, n);
  int d = lay.size();
  int total = config.chains * config.draws;

  PosteriorDraws out;
  out.tag = tag;
  out.n_nodes = n;
  out.names = lay.names;
  out.values.resize(total, d);
  out.log_post.resize(total);
  out.chain.resize(static_cast<std::size_t>(total));
  out.accept_rate.assign(static_cast<std::size_t>(config.chains), 0.0);
  out.seed = config.seed;
  out.warmup = config.warmup;
  out.draws_per_chain = config.draws;

  if (tag == ModelTag::immhp) {
    // independent pairs: one 6-dimensional sampler per (pair, chain)
    struct PairRef {
      int i, j, col0;
    };
    std::vector<PairRef> prs;
    int col = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        prs.push_back({i, j, col});
        col += 6;
      }
    }
    int n_pairs = static_cast<int>(prs.size());
    std::vector<double> acc(static_cast<std::size_t>(config.chains) * n_pairs, 0.0);
    parallel_for(config.chains * n_pairs, config.threads, [&](int idx) {
      int c = idx / n_pairs;
      int s = idx % n_pairs;
      const PairRef& pr = prs[static_cast<std::size_t>(s)];
      std::span<const double> events(h.times(pr.i, pr.j));
      auto target = [&, events](const Eigen::VectorXd& theta) {
        return config.prior_only ? immhp_pair_logpost_theta(theta, {}, 0.0)
                                 : immhp_pair_logpost_theta(theta, events, T);
      };
      Eigen::VectorXd theta0 = immhp_pair_init_theta(events, T);
      Rng rng(stream_seed(config.seed, 211,
                          static_cast<std::uint64_t>(c) * 100003 +
                              static_cast<std::uint64_t>(s)));
      if (c > 0) {
        for (Eigen::Index k = 0; k < theta0.size(); ++k)
          theta0[k] += 0.5 * rng.normal();
      }
      RwmResult r = adaptive_rwm(target, theta0, config.warmup, config.draws, rng);
      acc[static_cast<std::size_t>(idx)] = r.accept_rate;
      for (int k = 0; k < config.draws; ++k) {
        int row = c * config.draws + k;
        for (int q = 0; q < 6; ++q) {
          out.values(row, pr.col0 + q) = std::exp(r.draws(k, q));
        }
      }
    });
    // per-draw log posterior recomputed from the assembled draws
    for (int c = 0; c < config.chains; ++c) {
      double mean_acc = 0.0;
      for (int s = 0; s < n_pairs; ++s) {
        mean_acc += acc[static_cast<std::size_t>(c) * n_pairs + s];
      }
      out.accept_rate[static_cast<std::size_t>(c)] = mean_acc / n_pairs;
      for (int k = 0; k < config.draws; ++k) {
        int row = c * config.draws + k;
        out.chain[static_cast<std::size_t>(row)] = c;
        ModelParams p = unflatten_params(tag, n, out.values.row(row).transpose());
        out.log_post[row] = config.prior_only ? log_prior(p) : log_posterior(p, h, T);
      }
    }
    out.split_rhat_max = split_rhat_max(out.values, config.chains, config.draws);
    return out;
  }

  Eigen::VectorXd theta0 =
      config.init ? *config.init : to_unconstrained(smart_init(tag, h, T));
  if (theta0.size() != d) throw InputError("init vector has the wrong dimension");

  parallel_for(config.chains, config.threads, [&](int c) {
    auto target = [&](const Eigen::VectorXd& theta) {
      ModelParams p = from_unconstrained(tag, n, theta);
      double base = config.prior_only ? log_prior(p) : log_posterior(p, h, T);
      if (!std::isfinite(base)) return kNegInf;
      return base + transform_log_jacobian(tag, n, theta);
    };
    Rng rng(stream_seed(config.seed, 101, static_cast<std::uint64_t>(c)));
    Eigen::VectorXd start = theta0;
    if (c > 0) {
      for (Eigen::Index k = 0; k < start.size(); ++k) start[k] += 0.5 * rng.normal();
    }
    RwmResult r = adaptive_rwm(target, start, config.warmup, config.draws, rng);
    out.accept_rate[static_cast<std::size_t>(c)] = r.accept_rate;
    for (int k = 0; k < config.draws; ++k) {
      int row = c * config.draws + k;
      out.chain[static_cast<std::size_t>(row)] = c;
      double jac = transform_log_jacobian(tag, n, r.draws.row(k).transpose());
      out.log_post[row] = r.log_target[k] - jac;
      for (int q = 0; q < d; ++q) {
        double th = r.draws(k, q);
        out.values(row, q) =
            lay.is_logit[static_cast<std::size_t>(q)] ? logistic(th) : std::exp(th);
      }
    }
  });
  out.split_rhat_max = split_rhat_max(out.values, config.chains, config.draws);
  return out;
}

ModelParams PosteriorDraws::params_at(Eigen::Index k) const {
  return unflatten_params(tag, n_nodes, values.row(k).transpose());
}

void write_draws(const PosteriorDraws& d, std::ostream& out) {
  out << "# model=" << model_name(d.tag) << "\n";
  out << "# n_nodes=" << d.n_nodes << "\n";
  out << "# chains=" << d.accept_rate.size() << "\n";
  out << "# warmup=" << d.warmup << "\n";
  out << "# draws_per_chain=" << d.draws_per_chain << "\n";
  out << "# seed=" << d.seed << "\n";
  out << "# accept_rates=";
  for (std::size_t c = 0; c < d.accept_rate.size(); ++c) {
    if (c) out << ",";
    out << format_double(d.accept_rate[c]);
  }
  out << "\n";
  out << "# split_rhat_max=" << format_double(d.split_rhat_max) << "\n";
  out << "chain,draw,log_post";
  for (const auto& name : d.names) out << "," << name;
  out << "\n";
  for (Eigen::Index k = 0; k < d.values.rows(); ++k) {
    int c = d.chain[static_cast<std::size_t>(k)];
    int within = d.draws_per_chain > 0 ? static_cast<int>(k) % d.draws_per_chain
                                       : static_cast<int>(k);
    out << c << "," << within << "," << format_double(d.log_post[k]);
    for (Eigen::Index q = 0; q < d.values.cols(); ++q) {
      out << "," << format_double(d.values(k, q));
    }
    out << "\n";
  }
}

void write_draws_file(const PosteriorDraws& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open output file: " + path);
  write_draws(d, out);
}

PosteriorDraws read_draws(std::istream& in) {
  PosteriorDraws d;
  std::string line;
  std::map<std::string, std::string> meta;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::size_t eq = line.find('=');
      if (eq != std::string::npos) {
        std::string key = line.substr(1, eq - 1);
        key.erase(0, key.find_first_not_of(' '));
        key.erase(key.find_last_not_of(' ') + 1);
        meta[key] = line.substr(eq + 1);
      }
      continue;
    }
    std::istringstream hs(line);
    std::string field;
    while (std::getline(hs, field, ',')) header.push_back(field);
    break;
  }
  if (header.size() < 4 || header[0] != "chain" || header[1] != "draw" ||
      header[2] != "log_post") {
    throw InputError("malformed draws header");
  }
  if (!meta.count("model") || !meta.count("n_nodes")) {
    throw InputError("draws file is missing model metadata");
  }
  d.tag = model_tag_from_name(meta["model"]);
  d.n_nodes = std::atoi(meta["n_nodes"].c_str());
  d.warmup = meta.count("warmup") ? std::atoi(meta["warmup"].c_str()) : 0;
  d.draws_per_chain =
      meta.count("draws_per_chain") ? std::atoi(meta["draws_per_chain"].c_str()) : 0;
  d.seed = meta.count("seed")
               ? static_cast<std::uint64_t>(std::strtoull(meta["seed"].c_str(), nullptr, 10))
               : 0;
  if (meta.count("split_rhat_max")) {
    d.split_rhat_max = std::strtod(meta["split_rhat_max"].c_str(), nullptr);
  }
  if (meta.count("accept_rates")) {
    std::istringstream as(meta["accept_rates"]);
    std::string piece;
    while (std::getline(as, piece, ',')) {
      d.accept_rate.push_back(std::strtod(piece.c_str(), nullptr));
    }
  }
  d.names.assign(header.begin() + 3, header.end());

  std::vector<std::vector<double>> rows;
  std::vector<int> chains;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream rs(line);
    std::string field;
    std::vector<double> row;
    int col = 0;
    int chain_id = 0;
    double log_post = 0.0;
    while (std::getline(rs, field, ',')) {
      if (col == 0) {
        chain_id = std::atoi(field.c_str());
      } else if (col == 2) {
        log_post = std::strtod(field.c_str(), nullptr);
      } else if (col > 2) {
        row.push_back(std::strtod(field.c_str(), nullptr));
      }
      ++col;
    }
    if (row.size() != d.names.size()) {
      throw InputError("draws row has the wrong number of fields");
    }
    row.push_back(log_post);
    rows.push_back(std::move(row));
    chains.push_back(chain_id);
  }
  d.values.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(d.names.size()));
  d.log_post.resize(static_cast<Eigen::Index>(rows.size()));
  d.chain = std::move(chains);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (std::size_t q = 0; q < d.names.size(); ++q) {
      d.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(q)) = rows[k][q];
    }
    d.log_post[static_cast<Eigen::Index>(k)] = rows[k].back();
  }
  return d;
}

PosteriorDraws read_draws_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file: " + path);
  return read_draws(in);
}

MaximizeResult maximize(const std::function<double(const Eigen::VectorXd&)>& f,
                        const Eigen::VectorXd& x0, int max_iter, double tol) {
  Objective obj;
  obj.value = f;
  obj.value_grad = [&f](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    double fx = f(x);
    if (!std::isfinite(fx)) return kNegInf;
    g = fd_gradient(f, x);
    return fx;
  };
  OptimOut out = lbfgs_maximize(obj, x0, max_iter, tol);
  MaximizeResult res;
  res.x = std::move(out.x);
  res.value = out.fx;
  res.grad_norm = out.gnorm;
  res.iterations = out.iters;
  res.converged = out.converged;
  return res;
}

StateDecoding decode_states(const CmmhpParams& p, const PairHistories& h,
                            double T) {
  int n = h.n_nodes();
  StateDecoding dec;
  dec.nodes = n;
  dec.pairs.resize(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& events = h.times(i, j);
      if (events.empty()) continue;
      MmhpFilter f = mmhp_filter(cmmhp_rates(p, i, j), events, T);
      PairDecoding& pd = dec.pair(i, j);
      pd.labels.resize(events.size());
      pd.prob_active.resize(events.size());
      for (std::size_t m = 0; m < events.size(); ++m) {
        pd.labels[m] = f.viterbi[m];
        pd.prob_active[m] = f.smoothed(static_cast<Eigen::Index>(m), kActive);
      }
    }
  }
  return dec;
}

}  // namespace latrank
