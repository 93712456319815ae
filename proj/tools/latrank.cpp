// latrank: simulate, fit, diagnose, and predict latent-rank network point
// processes, with classical ranking baselines.  One subcommand per stage;
// every run writes a manifest that reproduces it byte for byte.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "latrank/baselines.hpp"
#include "latrank/data.hpp"
#include "latrank/errors.hpp"
#include "latrank/evalpred.hpp"
#include "latrank/inference.hpp"
#include "latrank/io.hpp"
#include "latrank/models.hpp"
#include "latrank/params_io.hpp"
#include "latrank/pointproc.hpp"
#include "latrank/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace latrank;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Settings {
  std::string data;
  std::string model = "cmmhp";
  std::string params;     // true/fitted parameter file
  std::string draws_file; // posterior draws for prediction
  std::string method = "isi";
  std::string out = ".";
  std::string config;
  std::uint64_t seed = 1;
  int chains = 4;
  int draws = 1000;
  int warmup = 1000;
  int split_day = 15;
  int horizon_day = 0; // 0 = last observed day
  int threads = 0;     // 0 = hardware concurrency
  int sims = 0;        // 0 = per-command default
  int nodes = 10;
  int days = 21;
  double day_length = 1.0;
};

struct Binding {
  CLI::Option* opt = nullptr;
  std::string key;
  std::function<void(const json&)> set;
  std::function<json()> get;
  bool in_manifest = true;
};

struct Command {
  CLI::App* app = nullptr;
  std::vector<Binding> binds;
};

template <typename T>
void bind_opt(Command& c, Settings&, T& var, const std::string& flag,
          const std::string& desc, bool in_manifest = true) {
  Binding b;
  b.opt = c.app->add_option(flag, var, desc);
  b.key = flag.substr(2);
  b.set = [&var](const json& v) { var = v.get<T>(); };
  b.get = [&var]() { return json(var); };
  b.in_manifest = in_manifest;
  c.binds.push_back(std::move(b));
}

void merge_config(Command& c, const std::string& config_path) {
  if (config_path.empty()) return;
  std::ifstream in(config_path);
  if (!in) throw InputError("cannot open config file: " + config_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("malformed config file: " + std::string(e.what()));
  }
  for (auto& b : c.binds) {
    if (b.opt->count() == 0 && j.contains(b.key)) {
      try {
        b.set(j.at(b.key));
      } catch (const json::exception& e) {
        throw InputError("config key '" + b.key + "': " + std::string(e.what()));
      }
    }
  }
}

void write_manifest(const Command& c, const std::string& command,
                    const fs::path& out_dir) {
  json j;
  j["command"] = command;
  j["version"] = kVersion;
  for (const auto& b : c.binds) {
    if (b.in_manifest) j[b.key] = b.get();
  }
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw InputError("cannot write manifest in " + out_dir.string());
  out << j.dump(2) << "\n";
}

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

fs::path prepare_out(const Settings& s) {
  fs::path dir(s.out);
  fs::create_directories(dir);
  return dir;
}

EventDataset load_dataset(const Settings& s) {
  if (s.data.empty()) throw InputError("--data is required");
  return parse_events_file(s.data);
}

const char* state_name(int z) { return z == kActive ? "active" : "inactive"; }

// Default generating parameters: uniformly spaced ranks (node 1 on top) and,
// for the degree-corrected models, alternating per-node activity rates that
// are uncorrelated with rank.  Excitation stays subcritical even in the
// active regime (max branching ratio 1.2 * 0.81 < 1).
ModelParams default_true_params(ModelTag tag, int n) {
  Eigen::VectorXd ranks(n);
  for (int i = 0; i < n; ++i) {
    ranks[i] = n > 1 ? 0.9 - 0.8 * i / static_cast<double>(n - 1) : 0.5;
  }
  Eigen::VectorXd out_rate(n), in_rate(n);
  for (int i = 0; i < n; ++i) {
    out_rate[i] = 0.05 + 0.15 * (i % 2);
    in_rate[i] = 0.05 + 0.15 * ((i + 1) % 2);
  }
  EtaParams eta{1.2, 0.1, 3.0};
  switch (tag) {
    case ModelTag::chp: {
      ChpParams p;
      p.baseline = 0.1;
      p.eta = eta;
      p.decay = 1.0;
      p.ranks = ranks;
      return p;
    }
    case ModelTag::dchp: {
      DchpParams p;
      p.out_rate = out_rate;
      p.in_rate = in_rate;
      p.eta = eta;
      p.decay = 1.0;
      p.ranks = ranks;
      return p;
    }
    case ModelTag::cmmhp: {
      CmmhpParams p;
      p.out_rate = out_rate;
      p.in_rate = in_rate;
      p.active_boost = 2.0;
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
          q.inactive_rate = out_rate[i] + in_rate[j];
          q.active_boost = 2.0;
          q.excitation = 0.4;
          q.decay = 1.0;
          q.leave_active = 0.4;
          q.leave_inactive = 0.6;
        }
      }
      return p;
    }
  }
  throw InputError("unknown model tag");
}

void write_states_file(const WindowSim& w, int n, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "sender,receiver,t_begin,t_end,state\n";
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const StateTrajectory& tr = w.states[static_cast<std::size_t>(i) * n + j];
      double t = tr.t_begin;
      int z = tr.initial_state;
      auto emit = [&](double t0, double t1, int state) {
        out << (i + 1) << "," << (j + 1) << "," << format_double(t0) << ","
            << format_double(t1) << "," << state_name(state) << "\n";
      };
      for (double sw : tr.switch_times) {
        emit(t, sw, z);
        t = sw;
        z = 1 - z;
      }
      emit(t, tr.t_end, z);
    }
  }
}

int cmd_simulate(Settings& s, Command& c) {
  ModelTag tag = model_tag_from_name(s.model);
  ModelParams truth;
  if (!s.params.empty()) {
    truth = read_params_file(s.params);
    if (model_tag(truth) != tag) {
      throw InputError("parameter file model '" + model_name(model_tag(truth)) +
                       "' does not match --model " + s.model);
    }
  } else {
    truth = default_true_params(tag, s.nodes);
  }
  int n = model_n_nodes(truth);
  if (s.days < 1 || !(s.day_length > 0.0)) {
    throw InputError("need at least one day of positive length");
  }
  if (s.sims == 0) s.sims = 50;
  if (s.sims < 1) throw InputError("need at least one simulated cohort");
  s.threads = resolve_threads(s.threads);

  fs::path dir = prepare_out(s);
  double horizon = s.days * s.day_length;
  std::vector<double> boundaries(static_cast<std::size_t>(s.days));
  for (int d = 1; d <= s.days; ++d) {
    boundaries[static_cast<std::size_t>(d) - 1] = d * s.day_length;
  }
  EventDataset skeleton;
  skeleton.n_nodes = n;
  skeleton.horizon = horizon;
  skeleton.day_boundaries = boundaries;

  PairHistories empty(n);
  bool modulated = tag == ModelTag::cmmhp || tag == ModelTag::immhp;
  for (int k = 1; k <= s.sims; ++k) {
    Rng rng(stream_seed(s.seed, 1, static_cast<std::uint64_t>(k)));
    WindowSim w = simulate_window(truth, empty, 0.0, horizon, rng);
    for (auto& e : w.events) e.day = day_for_time(skeleton, e.time);
    DatasetOptions opts;
    opts.n_nodes = n;
    opts.horizon = horizon;
    opts.day_boundaries = boundaries;
    opts.cohort = "sim" + std::to_string(k);
    EventDataset ds = make_dataset(w.events, opts);
    write_events_file(ds, (dir / ("events_" + std::to_string(k) + ".csv")).string());
    if (modulated) {
      write_states_file(w, n, dir / ("states_" + std::to_string(k) + ".csv"));
    }
  }
  write_params_file(truth, (dir / "true_params.json").string());
  write_manifest(c, "simulate", dir);
  return 0;
}

void write_rank_summary(const fs::path& path, const Eigen::VectorXd& map_rank,
                        const Eigen::VectorXd& mean, const Eigen::VectorXd& sd) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "node,map_rank,post_mean,post_sd\n";
  for (Eigen::Index i = 0; i < map_rank.size(); ++i) {
    out << (i + 1) << "," << format_double(map_rank[i]) << ","
        << format_double(mean[i]) << "," << format_double(sd[i]) << "\n";
  }
}

Eigen::VectorXd map_ranks_of(const ModelParams& p) {
  if (std::holds_alternative<ChpParams>(p)) return std::get<ChpParams>(p).ranks;
  if (std::holds_alternative<DchpParams>(p)) return std::get<DchpParams>(p).ranks;
  if (std::holds_alternative<CmmhpParams>(p)) return std::get<CmmhpParams>(p).ranks;
  throw InputError("model has no latent ranks");
}

int cmd_fit(Settings& s, Command& c) {
  ModelTag tag = model_tag_from_name(s.model);
  EventDataset ds = load_dataset(s);
  PairHistories h = build_pair_histories(ds);
  s.threads = resolve_threads(s.threads);
  fs::path dir = prepare_out(s);

  MapConfig mc;
  mc.seed = s.seed;
  mc.threads = s.threads;
  MapResult map = map_fit(tag, h, ds.horizon, mc);
  write_params_file(map.params, (dir / "map_params.json").string());

  json diag;
  diag["map"]["log_posterior"] = map.log_posterior;
  diag["map"]["converged"] = map.converged;
  diag["map"]["iterations"] = map.iterations;
  diag["map"]["grad_norm"] = map.grad_norm;

  bool ranked = tag != ModelTag::immhp;
  if (s.draws > 0) {
    SampleConfig sc;
    sc.chains = s.chains;
    sc.warmup = s.warmup;
    sc.draws = s.draws;
    sc.seed = stream_seed(s.seed, 2);
    sc.threads = s.threads;
    sc.init = to_unconstrained(map.params);
    PosteriorDraws post = sample_posterior(tag, h, ds.horizon, sc);
    write_draws_file(post, (dir / "draws.csv").string());
    diag["sampler"]["accept_rates"] = post.accept_rate;
    diag["sampler"]["split_rhat_max"] = post.split_rhat_max;
    diag["sampler"]["chains"] = s.chains;
    diag["sampler"]["draws_per_chain"] = s.draws;
    diag["sampler"]["warmup"] = s.warmup;
    if (ranked) {
      TransformLayout lay = transform_layout(tag, ds.n_nodes);
      Eigen::VectorXd mean(ds.n_nodes), sd(ds.n_nodes);
      for (int i = 0; i < ds.n_nodes; ++i) {
        std::string name = "f_" + std::to_string(i + 1);
        auto it = std::find(lay.names.begin(), lay.names.end(), name);
        auto col = static_cast<Eigen::Index>(it - lay.names.begin());
        mean[i] = post.values.col(col).mean();
        double m = mean[i];
        sd[i] = post.values.rows() > 1
                    ? std::sqrt((post.values.col(col).array() - m).square().sum() /
                                (post.values.rows() - 1))
                    : 0.0;
      }
      write_rank_summary(dir / "rank_summary.csv", map_ranks_of(map.params),
                         mean, sd);
    }
  } else if (ranked) {
    Eigen::VectorXd ranks = map_ranks_of(map.params);
    Eigen::VectorXd nanv = Eigen::VectorXd::Constant(
        ranks.size(), std::numeric_limits<double>::quiet_NaN());
    write_rank_summary(dir / "rank_summary.csv", ranks, nanv, nanv);
  }

  if (tag == ModelTag::cmmhp) {
    StateDecoding dec =
        decode_states(std::get<CmmhpParams>(map.params), h, ds.horizon);
    std::ofstream out(dir / "decodings.csv");
    if (!out) throw InputError("cannot write decodings.csv");
    out << "sender,receiver,event,time,state,prob_active\n";
    for (int i = 0; i < ds.n_nodes; ++i) {
      for (int j = 0; j < ds.n_nodes; ++j) {
        if (i == j) continue;
        const PairDecoding& pd = dec.pair(i, j);
        const auto& times = h.times(i, j);
        for (std::size_t m = 0; m < pd.labels.size(); ++m) {
          out << (i + 1) << "," << (j + 1) << "," << (m + 1) << ","
              << format_double(times[m]) << "," << state_name(pd.labels[m])
              << "," << format_double(pd.prob_active[m]) << "\n";
        }
      }
    }
  }

  std::ofstream dout(dir / "diagnostics.json");
  if (!dout) throw InputError("cannot write diagnostics.json");
  dout << diag.dump(2) << "\n";
  write_manifest(c, "fit", dir);
  return 0;
}

int cmd_diagnose(Settings& s, Command& c) {
  EventDataset ds = load_dataset(s);
  if (s.params.empty()) throw InputError("--params is required for diagnose");
  ModelParams params = read_params_file(s.params);
  if (model_n_nodes(params) != ds.n_nodes) {
    throw InputError("fitted parameters and dataset disagree on node count");
  }
  PairHistories h = build_pair_histories(ds);
  fs::path dir = prepare_out(s);

  RescaledSet rs = rescaled_set(params, h, ds.horizon);
  KsMatrix ks = ks_matrix(rs);
  write_matrix_file(ks.stat, (dir / "ks_matrix.csv").string());
  write_matrix_file(ks.sample_size, (dir / "ks_counts.csv").string());

  ResidualMatrix res =
      pearson_residuals(compensator_matrix(params, h, ds.horizon), h);
  write_triples_file(res.residual, (dir / "pearson_residuals.csv").string(),
                     "residual");

  std::ofstream out(dir / "rescaled_times.csv");
  if (!out) throw InputError("cannot write rescaled_times.csv");
  out << "sender,receiver,index,value\n";
  for (int i = 0; i < ds.n_nodes; ++i) {
    for (int j = 0; j < ds.n_nodes; ++j) {
      if (i == j) continue;
      const auto& v = rs.pair(i, j);
      for (std::size_t k = 0; k < v.size(); ++k) {
        out << (i + 1) << "," << (j + 1) << "," << (k + 1) << ","
            << format_double(v[k]) << "\n";
      }
    }
  }
  write_manifest(c, "diagnose", dir);
  return 0;
}

int cmd_predict(Settings& s, Command& c) {
  EventDataset ds = load_dataset(s);
  if (s.draws_file.empty()) {
    throw InputError("--draws-file is required for predict");
  }
  PosteriorDraws draws = read_draws_file(s.draws_file);
  if (s.horizon_day == 0) s.horizon_day = ds.n_days();
  if (s.split_day < 0 || s.split_day >= s.horizon_day ||
      s.horizon_day > ds.n_days()) {
    throw InputError("prediction window must satisfy 0 <= split < horizon <= " +
                     std::to_string(ds.n_days()));
  }
  if (s.sims == 0) s.sims = 1000;
  if (s.sims < 1) throw InputError("need at least one simulation");
  s.threads = resolve_threads(s.threads);
  fs::path dir = prepare_out(s);

  double t_split = ds.day_end(s.split_day);
  std::ofstream mae_out(dir / "mae.csv");
  if (!mae_out) throw InputError("cannot write mae.csv");
  mae_out << "horizon_day,mae_mean,mae_median\n";
  std::ofstream sp_out(dir / "spearman_vs_glicko.csv");
  if (!sp_out) throw InputError("cannot write spearman_vs_glicko.csv");
  sp_out << "horizon_day,spearman\n";

  Eigen::VectorXd last_outdegree;
  for (int d = s.split_day + 1; d <= s.horizon_day; ++d) {
    PredictConfig pc;
    pc.n_sims = s.sims;
    pc.seed = stream_seed(s.seed, 900, static_cast<std::uint64_t>(d));
    pc.threads = s.threads;
    PredictionRun run = posterior_predict(draws, ds, s.split_day, d, pc);
    std::string suffix = "_d" + std::to_string(d) + ".csv";
    write_matrix_file(run.mean_counts, (dir / ("pred_counts" + suffix)).string());
    write_matrix_file(run.median_counts,
                      (dir / ("pred_median" + suffix)).string());

    Eigen::MatrixXd truth =
        winloss_matrix(ds, t_split, run.t_horizon).counts.cast<double>();
    mae_out << d << "," << format_double(prediction_mae(run.mean_counts, truth))
            << "," << format_double(prediction_mae(run.median_counts, truth))
            << "\n";

    EventDataset upto = ds;
    upto.events.clear();
    for (const auto& e : ds.events) {
      if (e.time <= run.t_horizon) upto.events.push_back(e);
    }
    GlickoTrajectory glicko = glicko_scores(upto);
    auto rho = spearman(run.outdegree_mean, glicko.final_rating);
    sp_out << d << "," << (rho ? format_double(*rho) : "nan") << "\n";
    last_outdegree = run.outdegree_mean;
  }

  {
    std::ofstream out(dir / "outdegree_rank.csv");
    if (!out) throw InputError("cannot write outdegree_rank.csv");
    out << "position,node,score\n";
    std::vector<int> order(static_cast<std::size_t>(ds.n_nodes));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (last_outdegree[a] != last_outdegree[b]) {
        return last_outdegree[a] > last_outdegree[b];
      }
      return a < b;
    });
    for (std::size_t k = 0; k < order.size(); ++k) {
      out << (k + 1) << "," << (order[k] + 1) << ","
          << format_double(last_outdegree[order[k]]) << "\n";
    }
  }

  PredictConfig pc;
  pc.n_sims = s.sims;
  pc.seed = stream_seed(s.seed, 901);
  pc.threads = s.threads;
  GlickoForecast fc =
      glicko_forecast(draws, ds, s.split_day, s.horizon_day, GlickoConfig{}, pc);
  {
    std::ofstream out(dir / "glicko_forecast.csv");
    if (!out) throw InputError("cannot write glicko_forecast.csv");
    out << "node,event_index,mean,sd\n";
    for (int i = 0; i < ds.n_nodes; ++i) {
      for (Eigen::Index k = 0; k < fc.mean.rows(); ++k) {
        out << (i + 1) << "," << k << "," << format_double(fc.mean(k, i)) << ","
            << format_double(fc.sd(k, i)) << "\n";
      }
    }
  }
  write_manifest(c, "predict", dir);
  return 0;
}

int cmd_rank(Settings& s, Command& c) {
  ModelTag tag = model_tag_from_name(s.model);
  if (tag == ModelTag::immhp) {
    throw InputError("the independent-pair model has no latent ranks to report");
  }
  EventDataset ds = load_dataset(s);
  PairHistories h = build_pair_histories(ds);
  s.threads = resolve_threads(s.threads);
  fs::path dir = prepare_out(s);

  MapConfig mc;
  mc.seed = s.seed;
  mc.threads = s.threads;
  MapResult map = map_fit(tag, h, ds.horizon, mc);
  write_params_file(map.params, (dir / "map_params.json").string());

  Eigen::VectorXd ranks = map_ranks_of(map.params);
  std::vector<int> order(static_cast<std::size_t>(ds.n_nodes));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (ranks[a] != ranks[b]) return ranks[a] > ranks[b];
    return a < b;
  });
  std::ofstream out(dir / "rank_summary.csv");
  if (!out) throw InputError("cannot write rank_summary.csv");
  out << "position,node,rank_score\n";
  for (std::size_t k = 0; k < order.size(); ++k) {
    out << (k + 1) << "," << (order[k] + 1) << ","
        << format_double(ranks[order[k]]) << "\n";
  }
  write_manifest(c, "rank", dir);
  return 0;
}

int cmd_baseline(Settings& s, Command& c) {
  EventDataset ds = load_dataset(s);
  fs::path dir = prepare_out(s);

  if (s.method == "isi") {
    Eigen::MatrixXi W = winloss_matrix(ds, 0.0, ds.horizon).counts;
    IsiConfig ic;
    ic.seed = s.seed;
    Ordering ord = isi_rank(W, ic);
    std::ofstream out(dir / "ordering.csv");
    if (!out) throw InputError("cannot write ordering.csv");
    out << "# I=" << ord.inconsistencies << "\n";
    out << "# SI=" << ord.strength << "\n";
    out << "position,node\n";
    for (std::size_t k = 0; k < ord.order.size(); ++k) {
      out << (k + 1) << "," << (ord.order[k] + 1) << "\n";
    }
  } else if (s.method == "glicko") {
    GlickoTrajectory traj = glicko_scores(ds);
    std::ofstream out(dir / "glicko.csv");
    if (!out) throw InputError("cannot write glicko.csv");
    out << "node,event_index,rating,deviation\n";
    for (std::size_t i = 0; i < traj.by_node.size(); ++i) {
      for (const auto& pt : traj.by_node[i]) {
        out << (i + 1) << "," << pt.event_index << ","
            << format_double(pt.rating) << "," << format_double(pt.deviation)
            << "\n";
      }
    }
  } else if (s.method == "aggregate") {
    Eigen::MatrixXi W = winloss_matrix(ds, 0.0, ds.horizon).counts;
    AggregateConfig ac;
    ac.seed = s.seed;
    AggregateRankFit fit = aggregate_rank_fit(W, ds.horizon, ac);
    json j;
    j["intercept"] = fit.intercept;
    j["slope"] = fit.slope;
    j["log_posterior"] = fit.log_posterior;
    j["degenerate"] = fit.degenerate;
    std::ofstream jout(dir / "aggregate_fit.json");
    if (!jout) throw InputError("cannot write aggregate_fit.json");
    jout << j.dump(2) << "\n";
    std::ofstream out(dir / "aggregate_ranks.csv");
    if (!out) throw InputError("cannot write aggregate_ranks.csv");
    out << "node,rank_score\n";
    for (Eigen::Index i = 0; i < fit.ranks.size(); ++i) {
      out << (i + 1) << "," << format_double(fit.ranks[i]) << "\n";
    }
  } else {
    throw InputError("unknown method '" + s.method +
                     "' (expected isi, glicko, or aggregate)");
  }
  write_manifest(c, "baseline", dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent-rank network point processes"};
  app.require_subcommand(1);

  Settings s;
  auto model_check = CLI::IsMember({"chp", "dchp", "cmmhp", "immhp"});

  Command sim;
  sim.app = app.add_subcommand("simulate", "simulate synthetic cohorts");
  bind_opt(sim, s, s.model, "--model", "generating model");
  sim.binds.back().opt->check(model_check);
  bind_opt(sim, s, s.params, "--params", "true parameter file (json)");
  bind_opt(sim, s, s.nodes, "--nodes", "nodes per cohort (ignored with --params)");
  bind_opt(sim, s, s.days, "--days", "observation days");
  bind_opt(sim, s, s.day_length, "--day-length", "hours per day");
  bind_opt(sim, s, s.sims, "--sims", "number of cohorts (default 50)");
  bind_opt(sim, s, s.seed, "--seed", "random seed");
  bind_opt(sim, s, s.threads, "--threads", "worker threads (0 = all cores)");
  bind_opt(sim, s, s.out, "--out", "output directory", false);
  bind_opt(sim, s, s.config, "--config", "json config file", false);

  Command fit;
  fit.app = app.add_subcommand("fit", "MAP fit plus posterior sampling");
  bind_opt(fit, s, s.data, "--data", "event file");
  bind_opt(fit, s, s.model, "--model", "model to fit");
  fit.binds.back().opt->check(model_check);
  bind_opt(fit, s, s.seed, "--seed", "random seed");
  bind_opt(fit, s, s.chains, "--chains", "sampler chains");
  bind_opt(fit, s, s.draws, "--draws", "draws per chain (0 = MAP only)");
  bind_opt(fit, s, s.warmup, "--warmup", "warmup iterations per chain");
  bind_opt(fit, s, s.threads, "--threads", "worker threads (0 = all cores)");
  bind_opt(fit, s, s.out, "--out", "output directory", false);
  bind_opt(fit, s, s.config, "--config", "json config file", false);

  Command diag;
  diag.app = app.add_subcommand("diagnose", "goodness-of-fit diagnostics");
  bind_opt(diag, s, s.data, "--data", "event file");
  bind_opt(diag, s, s.params, "--params", "fitted parameter file (json)");
  bind_opt(diag, s, s.out, "--out", "output directory", false);
  bind_opt(diag, s, s.config, "--config", "json config file", false);

  Command pred;
  pred.app = app.add_subcommand("predict", "posterior-predictive evaluation");
  bind_opt(pred, s, s.data, "--data", "event file");
  bind_opt(pred, s, s.draws_file, "--draws-file", "posterior draws from fit");
  bind_opt(pred, s, s.split_day, "--split-day", "last day of the fitting window");
  bind_opt(pred, s, s.horizon_day, "--horizon-day", "last prediction day (0 = end)");
  bind_opt(pred, s, s.sims, "--sims", "simulations per horizon (default 1000)");
  bind_opt(pred, s, s.seed, "--seed", "random seed");
  bind_opt(pred, s, s.threads, "--threads", "worker threads (0 = all cores)");
  bind_opt(pred, s, s.out, "--out", "output directory", false);
  bind_opt(pred, s, s.config, "--config", "json config file", false);

  Command rank;
  rank.app = app.add_subcommand("rank", "quick MAP latent-rank ordering");
  bind_opt(rank, s, s.data, "--data", "event file");
  bind_opt(rank, s, s.model, "--model", "model to fit");
  rank.binds.back().opt->check(model_check);
  bind_opt(rank, s, s.seed, "--seed", "random seed");
  bind_opt(rank, s, s.threads, "--threads", "worker threads (0 = all cores)");
  bind_opt(rank, s, s.out, "--out", "output directory", false);
  bind_opt(rank, s, s.config, "--config", "json config file", false);

  Command base;
  base.app = app.add_subcommand("baseline", "classical ranking baselines");
  bind_opt(base, s, s.data, "--data", "event file");
  bind_opt(base, s, s.method, "--method", "isi | glicko | aggregate");
  bind_opt(base, s, s.seed, "--seed", "random seed");
  bind_opt(base, s, s.out, "--out", "output directory", false);
  bind_opt(base, s, s.config, "--config", "json config file", false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim.app->parsed()) {
      merge_config(sim, s.config);
      return cmd_simulate(s, sim);
    }
    if (fit.app->parsed()) {
      merge_config(fit, s.config);
      return cmd_fit(s, fit);
    }
    if (diag.app->parsed()) {
      merge_config(diag, s.config);
      return cmd_diagnose(s, diag);
    }
    if (pred.app->parsed()) {
      merge_config(pred, s.config);
      return cmd_predict(s, pred);
    }
    if (rank.app->parsed()) {
      merge_config(rank, s.config);
      return cmd_rank(s, rank);
    }
    if (base.app->parsed()) {
      merge_config(base, s.config);
      return cmd_baseline(s, base);
    }
    std::cerr << "no subcommand selected\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
