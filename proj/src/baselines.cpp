#include "latrank/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "latrank/errors.hpp"
#include "latrank/inference.hpp"
#include "latrank/models.hpp"
#include "latrank/rng.hpp"

namespace latrank {

std::pair<int, int> count_inconsistencies(const Eigen::MatrixXi& wins,
                                          const std::vector<int>& order) {
  int n = static_cast<int>(wins.rows());
  if (wins.cols() != n) throw InputError("win matrix must be square");
  if (static_cast<int>(order.size()) != n) {
    throw InputError("ordering length does not match the matrix size");
  }
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (int v : order) {
    if (v < 0 || v >= n || seen[static_cast<std::size_t>(v)]) {
      throw InputError("ordering is not a permutation of the nodes");
    }
    seen[static_cast<std::size_t>(v)] = 1;
  }
  int inc = 0, strength = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) {
      // position i sits below position j; more wins upward is inconsistent
      if (wins(order[i], order[j]) > wins(order[j], order[i])) {
        ++inc;
        strength += i - j;
      }
    }
  }
  return {inc, strength};
}

namespace {

// preference used for every deterministic tiebreak: total wins, then index
std::vector<int> preference_order(const Eigen::MatrixXi& wins) {
  int n = static_cast<int>(wins.rows());
  std::vector<int> nodes(static_cast<std::size_t>(n));
  std::iota(nodes.begin(), nodes.end(), 0);
  Eigen::VectorXi total = wins.rowwise().sum();
  std::sort(nodes.begin(), nodes.end(), [&](int a, int b) {
    if (total[a] != total[b]) return total[a] > total[b];
    return a < b;
  });
  return nodes;
}

long long order_cost(const Eigen::MatrixXi& wins, const std::vector<int>& order,
                     long long strength_cap) {
  auto [inc, strength] = count_inconsistencies(wins, order);
  return static_cast<long long>(inc) * strength_cap + strength;
}

Ordering finish(const Eigen::MatrixXi& wins, std::vector<int> order) {
  auto [inc, strength] = count_inconsistencies(wins, order);
  return Ordering{std::move(order), inc, strength};
}

Ordering isi_exhaustive(const Eigen::MatrixXi& wins) {
  int n = static_cast<int>(wins.rows());
  std::vector<int> pref = preference_order(wins);
  // permute preference slots in lexicographic slot order so that the first
  // optimum found is also the preferred one
  std::vector<int> slots(static_cast<std::size_t>(n));
  std::iota(slots.begin(), slots.end(), 0);
  long long cap = static_cast<long long>(n) * n * n + 1;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::vector<int> best;
  long long best_cost = 0;
  do {
    for (int k = 0; k < n; ++k) order[k] = pref[slots[k]];
    long long cost = order_cost(wins, order, cap);
    if (best.empty() || cost < best_cost) {
      best = order;
      best_cost = cost;
    }
  } while (std::next_permutation(slots.begin(), slots.end()));
  return finish(wins, std::move(best));
}

// steepest-descent polish: try all single-pair swaps and single-element
// moves until neither improves the cost
void polish(const Eigen::MatrixXi& wins, std::vector<int>& order,
            long long& cost, long long cap) {
  int n = static_cast<int>(order.size());
  bool improved = true;
  while (improved) {
    improved = false;
    for (int a = 0; a < n && !improved; ++a) {
      for (int b = a + 1; b < n && !improved; ++b) {
        std::swap(order[a], order[b]);
        long long c = order_cost(wins, order, cap);
        if (c < cost) {
          cost = c;
          improved = true;
        } else {
          std::swap(order[a], order[b]);
        }
      }
    }
    if (improved) continue;
    for (int a = 0; a < n && !improved; ++a) {
      for (int b = 0; b < n && !improved; ++b) {
        if (a == b) continue;
        std::vector<int> moved = order;
        int node = moved[a];
        moved.erase(moved.begin() + a);
        moved.insert(moved.begin() + b, node);
        long long c = order_cost(wins, moved, cap);
        if (c < cost) {
          order = std::move(moved);
          cost = c;
          improved = true;
        }
      }
    }
  }
}

Ordering isi_anneal(const Eigen::MatrixXi& wins, const IsiConfig& config) {
  int n = static_cast<int>(wins.rows());
  long long cap = static_cast<long long>(n) * n * n + 1;
  std::vector<int> start = preference_order(wins);

  std::vector<int> best;
  long long best_cost = 0;
  for (int r = 0; r < std::max(1, config.restarts); ++r) {
    Rng rng(stream_seed(config.seed, 97, static_cast<std::uint64_t>(r)));
    std::vector<int> cur = start;
    if (r > 0) {
      for (int k = n - 1; k > 0; --k) {
        std::swap(cur[k], cur[rng.uniform_int(k + 1)]);
      }
    }
    long long cur_cost = order_cost(wins, cur, cap);
    std::vector<int> local_best = cur;
    long long local_best_cost = cur_cost;
    int steps = std::max(1, config.anneal_steps);
    for (int s = 0; s < steps; ++s) {
      double temp = 1.0 + 9.0 * (steps - s) / static_cast<double>(steps);
      std::vector<int> cand = cur;
      if (rng.uniform() < 0.5) {
        int a = rng.uniform_int(n - 1);
        std::swap(cand[a], cand[a + 1]);
      } else {
        int a = rng.uniform_int(n);
        int b = rng.uniform_int(n);
        std::swap(cand[a], cand[b]);
      }
      long long cand_cost = order_cost(wins, cand, cap);
      double delta = static_cast<double>(cand_cost - cur_cost);
      if (delta <= 0.0 || rng.uniform() < std::exp(-delta / temp)) {
        cur = std::move(cand);
        cur_cost = cand_cost;
        if (cur_cost < local_best_cost) {
          local_best = cur;
          local_best_cost = cur_cost;
        }
      }
    }
    polish(wins, local_best, local_best_cost, cap);
    if (best.empty() || local_best_cost < best_cost) {
      best = std::move(local_best);
      best_cost = local_best_cost;
    }
  }
  return finish(wins, std::move(best));
}

} // namespace

Ordering isi_rank(const Eigen::MatrixXi& wins, const IsiConfig& config) {
  int n = static_cast<int>(wins.rows());
  if (wins.cols() != n) throw InputError("win matrix must be square");
  if (n < 2) throw InputError("need at least two nodes to rank");
  if (n <= 8) return isi_exhaustive(wins);
  return isi_anneal(wins, config);
}

namespace {

struct GlickoState {
  double rating;
  double deviation;
  long period; // rating period of the last update
};

// Glickman (1999) single-game update pieces
constexpr double kGlickoQ = 0.0057564627324851145; // ln 10 / 400

double glicko_g(double rd) {
  return 1.0 / std::sqrt(1.0 + 3.0 * kGlickoQ * kGlickoQ * rd * rd /
                                   (M_PI * M_PI));
}

double glicko_expect(double r, double r_other, double rd_other) {
  return 1.0 / (1.0 + std::pow(10.0, -glicko_g(rd_other) * (r - r_other) / 400.0));
}

void glicko_update(const GlickoState& self, const GlickoState& other,
                   double score, double& rating_out, double& deviation_out) {
  double g = glicko_g(other.deviation);
  double e = glicko_expect(self.rating, other.rating, other.deviation);
  double d2_inv = kGlickoQ * kGlickoQ * g * g * e * (1.0 - e);
  double denom = 1.0 / (self.deviation * self.deviation) + d2_inv;
  rating_out = self.rating + kGlickoQ / denom * g * (score - e);
  deviation_out = std::sqrt(1.0 / denom);
}

} // namespace

GlickoTrajectory glicko_scores(const EventDataset& ds,
                               const GlickoConfig& config) {
  if (!(config.initial_deviation > 0.0) || !(config.period > 0.0)) {
    throw InputError("Glicko deviations and period length must be positive");
  }
  int n = ds.n_nodes;
  GlickoTrajectory out;
  out.by_node.assign(static_cast<std::size_t>(n), {});
  out.final_rating = Eigen::VectorXd::Constant(n, config.initial_rating);
  out.final_deviation = Eigen::VectorXd::Constant(n, config.initial_deviation);

  std::vector<GlickoState> state(
      static_cast<std::size_t>(n),
      GlickoState{config.initial_rating, config.initial_deviation, 0});
  for (int i = 0; i < n; ++i) {
    out.by_node[static_cast<std::size_t>(i)].push_back(
        GlickoPoint{0, config.initial_rating, config.initial_deviation});
  }

  for (std::size_t k = 0; k < ds.events.size(); ++k) {
    const EventRecord& e = ds.events[k];
    long period = static_cast<long>((e.day - 1) / config.period);
    for (int node : {e.winner, e.loser}) {
      GlickoState& s = state[static_cast<std::size_t>(node)];
      if (period > s.period) {
        double grown = std::sqrt(s.deviation * s.deviation +
                                 config.c * config.c * (period - s.period));
        s.deviation = std::min(grown, config.initial_deviation);
        s.period = period;
      }
    }
    GlickoState w = state[static_cast<std::size_t>(e.winner)];
    GlickoState l = state[static_cast<std::size_t>(e.loser)];
    auto& ws = state[static_cast<std::size_t>(e.winner)];
    auto& ls = state[static_cast<std::size_t>(e.loser)];
    glicko_update(w, l, 1.0, ws.rating, ws.deviation);
    glicko_update(l, w, 0.0, ls.rating, ls.deviation);
    out.by_node[static_cast<std::size_t>(e.winner)].push_back(
        GlickoPoint{k + 1, ws.rating, ws.deviation});
    out.by_node[static_cast<std::size_t>(e.loser)].push_back(
        GlickoPoint{k + 1, ls.rating, ls.deviation});
  }
  for (int i = 0; i < n; ++i) {
    const auto& traj = out.by_node[static_cast<std::size_t>(i)];
    out.final_rating[i] = traj.back().rating;
    out.final_deviation[i] = traj.back().deviation;
  }
  return out;
}

Eigen::MatrixXd glicko_rating_grid(const GlickoTrajectory& traj,
                                   std::size_t n_events) {
  int n = static_cast<int>(traj.by_node.size());
  Eigen::MatrixXd grid(static_cast<Eigen::Index>(n_events) + 1, n);
  for (int i = 0; i < n; ++i) {
    const auto& points = traj.by_node[static_cast<std::size_t>(i)];
    std::size_t next = 0;
    double current = points.empty() ? 0.0 : points[0].rating;
    for (std::size_t k = 0; k <= n_events; ++k) {
      while (next < points.size() && points[next].event_index <= k) {
        current = points[next].rating;
        ++next;
      }
      grid(static_cast<Eigen::Index>(k), i) = current;
    }
  }
  return grid;
}

AggregateRankFit aggregate_rank_fit(const Eigen::MatrixXi& wins, double window,
                                    const AggregateConfig& config) {
  int n = static_cast<int>(wins.rows());
  if (wins.cols() != n) throw InputError("win matrix must be square");
  if (n < 2) throw InputError("need at least two nodes to rank");
  if (!(window > 0.0)) throw InputError("observation window must be positive");

  AggregateRankFit fit;
  if (wins.sum() == 0) {
    std::fprintf(stderr,
                 "warning: all-zero win matrix; aggregate ranks fall back to "
                 "0.5 and are undetermined\n");
    fit.ranks = Eigen::VectorXd::Constant(n, 0.5);
    fit.intercept = 0.0;
    fit.slope = 0.0;
    fit.degenerate = true;
    return fit;
  }

  const double kLogHalfNormalNorm = 0.5 * std::log(2.0 / M_PI);
  // coordinates: [a, log b, logit f_1..N]; transform Jacobian included so the
  // mode stays off the rank boundaries (flat prior alone would pin f at 0/1)
  auto objective = [&](const Eigen::VectorXd& theta) {
    double a = theta[0];
    double b = std::exp(theta[1]);
    double lp = kLogHalfNormalNorm - 0.5 * b * b + theta[1];
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
      double fi = logistic(theta[2 + i]);
      lp += std::log(fi) + std::log(logistic(-theta[2 + i]));
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        double fj = logistic(theta[2 + j]);
        double log_mean = std::log(window) + a + b * (fi - fj);
        ll += wins(i, j) * log_mean - std::exp(log_mean);
      }
    }
    return lp + ll;
  };

  double total_rate = static_cast<double>(wins.sum()) /
                      (static_cast<double>(n) * (n - 1) * window);
  Eigen::VectorXd theta0(n + 2);
  theta0[0] = std::log(std::max(total_rate, 1e-12));
  theta0[1] = std::log(1.0);
  Eigen::VectorXd total_wins = wins.cast<double>().rowwise().sum();
  Eigen::VectorXd total_losses = wins.cast<double>().colwise().sum();
  for (int i = 0; i < n; ++i) {
    double games = total_wins[i] + total_losses[i];
    double frac = games > 0 ? total_wins[i] / games : 0.5;
    frac = std::clamp(frac, 0.05, 0.95);
    theta0[2 + i] = std::log(frac) - std::log1p(-frac);
  }

  MaximizeResult best;
  best.value = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, config.restarts); ++r) {
    Eigen::VectorXd start = theta0;
    if (r > 0) {
      Rng rng(stream_seed(config.seed, 41, static_cast<std::uint64_t>(r)));
      for (Eigen::Index k = 0; k < start.size(); ++k) start[k] += 0.5 * rng.normal();
    }
    MaximizeResult res = maximize(objective, start, config.max_iter, config.tol);
    if (res.value > best.value) best = std::move(res);
  }
  if (!std::isfinite(best.value)) {
    throw NumericalError("aggregate rank fit failed to find a finite objective");
  }
  fit.intercept = best.x[0];
  fit.slope = std::exp(best.x[1]);
  fit.ranks.resize(n);
  double jac = best.x[1];
  for (int i = 0; i < n; ++i) {
    fit.ranks[i] = logistic(best.x[2 + i]);
    jac += std::log(fit.ranks[i]) + std::log(logistic(-best.x[2 + i]));
  }
  fit.log_posterior = best.value - jac; // report the natural-space value
  return fit;
}

Eigen::VectorXd average_ranks(const Eigen::VectorXd& x) {
  Eigen::Index n = x.size();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](Eigen::Index a, Eigen::Index b) { return x[a] < x[b]; });
  Eigen::VectorXd ranks(n);
  Eigen::Index k = 0;
  while (k < n) {
    Eigen::Index m = k;
    while (m + 1 < n && x[idx[static_cast<std::size_t>(m + 1)]] ==
                            x[idx[static_cast<std::size_t>(k)]]) {
      ++m;
    }
    double avg = 0.5 * static_cast<double>(k + m) + 1.0; // 1-based average rank
    for (Eigen::Index t = k; t <= m; ++t) {
      ranks[idx[static_cast<std::size_t>(t)]] = avg;
    }
    k = m + 1;
  }
  return ranks;
}

std::optional<double> spearman(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw InputError("rank vectors differ in length");
  if (x.size() < 2) throw InputError("need at least two values");
  Eigen::VectorXd rx = average_ranks(x);
  Eigen::VectorXd ry = average_ranks(y);
  Eigen::VectorXd cx = rx.array() - rx.mean();
  Eigen::VectorXd cy = ry.array() - ry.mean();
  double vx = cx.squaredNorm();
  double vy = cy.squaredNorm();
  if (vx <= 0.0 || vy <= 0.0) return std::nullopt;
  return cx.dot(cy) / std::sqrt(vx * vy);
}

} // namespace latrank
