#include "latrank/params_io.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

#include "latrank/errors.hpp"

namespace latrank {

namespace {

using nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from_json(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<int>(i)] = a[i].get<double>();
  return v;
}

json eta_to_json(const EtaParams& eta) {
  return json{{"scale", eta.scale},
              {"rank_decay", eta.rank_decay},
              {"asymmetry", eta.asymmetry}};
}

EtaParams eta_from_json(const json& j) {
  EtaParams eta;
  eta.scale = j.at("scale").get<double>();
  eta.rank_decay = j.at("rank_decay").get<double>();
  eta.asymmetry = j.at("asymmetry").get<double>();
  return eta;
}

}  // namespace

std::string params_to_json(const ModelParams& params) {
  json j;
  switch (model_tag(params)) {
    case ModelTag::chp: {
      const auto& p = std::get<ChpParams>(params);
      j = json{{"model", "chp"},
               {"baseline", p.baseline},
               {"eta", eta_to_json(p.eta)},
               {"decay", p.decay},
               {"ranks", vec_to_json(p.ranks)}};
      break;
    }
    case ModelTag::dchp: {
      const auto& p = std::get<DchpParams>(params);
      j = json{{"model", "dchp"},
               {"out_rate", vec_to_json(p.out_rate)},
               {"in_rate", vec_to_json(p.in_rate)},
               {"eta", eta_to_json(p.eta)},
               {"decay", p.decay},
               {"ranks", vec_to_json(p.ranks)}};
      break;
    }
    case ModelTag::cmmhp: {
      const auto& p = std::get<CmmhpParams>(params);
      j = json{{"model", "cmmhp"},
               {"out_rate", vec_to_json(p.out_rate)},
               {"in_rate", vec_to_json(p.in_rate)},
               {"active_boost", p.active_boost},
               {"eta", eta_to_json(p.eta)},
               {"decay", p.decay},
               {"ranks", vec_to_json(p.ranks)}};
      break;
    }
    case ModelTag::immhp: {
      const auto& p = std::get<ImmhpParams>(params);
      json pairs = json::array();
      for (int i = 0; i < p.nodes; ++i) {
        for (int k = 0; k < p.nodes; ++k) {
          if (i == k) continue;
          const auto& q = p.pair(i, k);
          pairs.push_back(json{{"i", i + 1},
                               {"j", k + 1},
                               {"inactive_rate", q.inactive_rate},
                               {"active_boost", q.active_boost},
                               {"excitation", q.excitation},
                               {"decay", q.decay},
                               {"leave_active", q.leave_active},
                               {"leave_inactive", q.leave_inactive}});
        }
      }
      j = json{{"model", "immhp"}, {"n_nodes", p.nodes}, {"pairs", pairs}};
      break;
    }
  }
  return j.dump(2) + "\n";
}

ModelParams params_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("cannot parse parameter JSON: ") + e.what());
  }
  try {
    std::string model = j.at("model").get<std::string>();
    if (model == "chp") {
      ChpParams p;
      p.baseline = j.at("baseline").get<double>();
      p.eta = eta_from_json(j.at("eta"));
      p.decay = j.at("decay").get<double>();
      p.ranks = vec_from_json(j.at("ranks"));
      return p;
    }
    if (model == "dchp") {
      DchpParams p;
      p.out_rate = vec_from_json(j.at("out_rate"));
      p.in_rate = vec_from_json(j.at("in_rate"));
      p.eta = eta_from_json(j.at("eta"));
      p.decay = j.at("decay").get<double>();
      p.ranks = vec_from_json(j.at("ranks"));
      return p;
    }
    if (model == "cmmhp") {
      CmmhpParams p;
      p.out_rate = vec_from_json(j.at("out_rate"));
      p.in_rate = vec_from_json(j.at("in_rate"));
      p.active_boost = j.at("active_boost").get<double>();
      p.eta = eta_from_json(j.at("eta"));
      p.decay = j.at("decay").get<double>();
      p.ranks = vec_from_json(j.at("ranks"));
      return p;
    }
    if (model == "immhp") {
      ImmhpParams p = make_immhp_params(j.at("n_nodes").get<int>());
      for (const auto& e : j.at("pairs")) {
        int i = e.at("i").get<int>() - 1;
        int k = e.at("j").get<int>() - 1;
        if (i < 0 || k < 0 || i >= p.nodes || k >= p.nodes || i == k) {
          throw InputError("immhp pair ids out of range");
        }
        ImmhpPairParams& q = p.pair(i, k);
        q.inactive_rate = e.at("inactive_rate").get<double>();
        q.active_boost = e.at("active_boost").get<double>();
        q.excitation = e.at("excitation").get<double>();
        q.decay = e.at("decay").get<double>();
        q.leave_active = e.at("leave_active").get<double>();
        q.leave_inactive = e.at("leave_inactive").get<double>();
      }
      return p;
    }
    throw InputError("unknown model '" + model + "' in parameter JSON");
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed parameter JSON: ") + e.what());
  }
}

void write_params_file(const ModelParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open output file: " + path);
  out << params_to_json(params);
}

ModelParams read_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return params_from_json(ss.str());
}

}  // namespace latrank
