#include "hmmlab/config.hpp"

#include <sstream>

#include "hmmlab/io.hpp"
#include "hmmlab/stats.hpp"

namespace hmmlab {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::string& path,
                    std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError("expected object at " + path);
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed)
      if (key == a) known = true;
    if (!known) throw ConfigError("unknown key at " + path + "/" + key);
  }
}

double get_number(const json& o, const std::string& path, const char* key,
                  std::optional<double> fallback = std::nullopt) {
  if (!o.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError("missing key " + path + "/" + key);
  }
  if (!o[key].is_number()) throw ConfigError("expected number at " + path + "/" + key);
  return o[key].get<double>();
}

long get_long(const json& o, const std::string& path, const char* key,
              std::optional<long> fallback = std::nullopt) {
  if (!o.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError("missing key " + path + "/" + key);
  }
  if (!o[key].is_number_integer())
    throw ConfigError("expected integer at " + path + "/" + key);
  return o[key].get<long>();
}

std::vector<long> get_long_vector(const json& o, const std::string& path,
                                  const char* key) {
  if (!o.contains(key) || !o[key].is_array())
    throw ConfigError("expected array at " + path + "/" + key);
  std::vector<long> out;
  for (const auto& v : o[key]) {
    if (!v.is_number_integer())
      throw ConfigError("expected integer entries at " + path + "/" + key);
    out.push_back(v.get<long>());
  }
  return out;
}

std::vector<int> get_int_vector(const json& o, const std::string& path,
                                const char* key) {
  std::vector<int> out;
  for (long v : get_long_vector(o, path, key)) out.push_back(static_cast<int>(v));
  return out;
}

std::vector<double> get_double_vector(const json& o, const std::string& path,
                                      const char* key) {
  if (!o.contains(key) || !o[key].is_array())
    throw ConfigError("expected array at " + path + "/" + key);
  std::vector<double> out;
  for (const auto& v : o[key]) {
    if (!v.is_number())
      throw ConfigError("expected numeric entries at " + path + "/" + key);
    out.push_back(v.get<double>());
  }
  return out;
}

Param get_param(const json& o, const std::string& path, const char* key) {
  const auto values = get_double_vector(o, path, key);
  Param p(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i)
    p[static_cast<Eigen::Index>(i)] = values[i];
  return p;
}

McmcConfig parse_mcmc(const json& o, const std::string& path) {
  reject_unknown(o, path,
                 {"iterations", "burn_in_frac", "thinning", "target_accept",
                  "adapt_interval", "init", "proposal_scale"});
  McmcConfig config;
  config.iterations = get_long(o, path, "iterations", config.iterations);
  config.burn_in_frac = get_number(o, path, "burn_in_frac", config.burn_in_frac);
  config.thinning = static_cast<int>(get_long(o, path, "thinning", config.thinning));
  config.target_accept = get_number(o, path, "target_accept", config.target_accept);
  config.adapt_interval =
      static_cast<int>(get_long(o, path, "adapt_interval", config.adapt_interval));
  if (o.contains("init")) config.init = get_param(o, path, "init");
  if (o.contains("proposal_scale")) {
    config.proposal_scale = get_param(o, path, "proposal_scale");
  }
  return config;
}

}  // namespace

ExperimentConfig parse_experiment_config(const json& j) {
  reject_unknown(j, "",
                 {"scenario", "seed", "model", "theta0", "simulate", "constants",
                  "tests", "posterior"});
  ExperimentConfig config;
  config.raw = j;
  if (!j.contains("scenario") || !j["scenario"].is_string())
    throw ConfigError("missing string key /scenario");
  config.scenario = j["scenario"].get<std::string>();
  config.seed = static_cast<std::uint64_t>(get_long(j, "", "seed", 1));
  if (!j.contains("model")) throw ConfigError("missing key /model");
  config.model = model_from_json(j["model"], "/model");
  config.theta0 = get_param(j, "", "theta0");

  if (j.contains("simulate")) {
    const json& o = j["simulate"];
    reject_unknown(o, "/simulate", {"n_grid", "replicates"});
    SimulateBlock block;
    block.n_grid = get_long_vector(o, "/simulate", "n_grid");
    if (block.n_grid.empty()) throw ConfigError("empty /simulate/n_grid");
    block.replicates = get_long(o, "/simulate", "replicates", 1);
    config.simulate = block;
  }

  if (j.contains("constants")) {
    const json& o = j["constants"];
    reject_unknown(o, "/constants",
                   {"branch", "mixing_tol", "horizon", "lipschitz", "tail"});
    ConstantsBlock block;
    if (o.contains("branch")) block.branch = o["branch"].get<std::string>();
    if (block.branch != "countable" && block.branch != "continuous")
      throw ConfigError("/constants/branch must be countable or continuous");
    block.mixing_tol = get_number(o, "/constants", "mixing_tol", 1e-8);
    block.horizon = static_cast<int>(get_long(o, "/constants", "horizon", 8));
    if (o.contains("lipschitz")) {
      const json& lp = o["lipschitz"];
      reject_unknown(lp, "/constants/lipschitz",
                     {"y_points", "filter_points", "pair_samples"});
      block.lipschitz.y_points =
          static_cast<int>(get_long(lp, "/constants/lipschitz", "y_points", 33));
      block.lipschitz.filter_points = static_cast<int>(
          get_long(lp, "/constants/lipschitz", "filter_points", 24));
      block.lipschitz.pair_samples = static_cast<int>(
          get_long(lp, "/constants/lipschitz", "pair_samples", 300));
    }
    if (o.contains("tail")) {
      const json& tl = o["tail"];
      reject_unknown(tl, "/constants/tail",
                     {"n", "replicates", "radius_count", "theta1", "theta2"});
      TailBlock tail;
      tail.n = get_long(tl, "/constants/tail", "n", 500);
      tail.replicates = get_long(tl, "/constants/tail", "replicates", 10000);
      tail.radius_count =
          static_cast<int>(get_long(tl, "/constants/tail", "radius_count", 8));
      tail.theta1 = get_param(tl, "/constants/tail", "theta1");
      tail.theta2 = get_param(tl, "/constants/tail", "theta2");
      block.tail = tail;
    }
    config.constants = block;
  }

  if (j.contains("tests")) {
    const json& o = j["tests"];
    reject_unknown(o, "/tests",
                   {"eps", "xi", "m_start", "j_max", "j_grid", "n_grid", "replicates",
                    "type1_replicates", "alternative_panel", "divergence", "kappa",
                    "covering_j"});
    TestsBlock block;
    block.eps = get_number(o, "/tests", "eps");
    block.options.composite.xi = get_number(o, "/tests", "xi", 0.25);
    block.options.composite.m_start =
        static_cast<int>(get_long(o, "/tests", "m_start", 1));
    block.options.composite.j_max =
        static_cast<int>(get_long(o, "/tests", "j_max", 0));
    block.options.j_grid = get_int_vector(o, "/tests", "j_grid");
    block.options.n_grid = get_long_vector(o, "/tests", "n_grid");
    block.options.replicates = get_long(o, "/tests", "replicates", 500);
    block.options.type1_replicates =
        get_long(o, "/tests", "type1_replicates", 200);
    block.options.alternative_panel =
        static_cast<int>(get_long(o, "/tests", "alternative_panel", 4));
    if (o.contains("divergence")) {
      const json& dv = o["divergence"];
      reject_unknown(dv, "/tests/divergence", {"n", "replicates"});
      block.options.composite.divergence_n = get_long(dv, "/tests/divergence", "n", 200);
      block.options.composite.divergence_replicates =
          get_long(dv, "/tests/divergence", "replicates", 64);
    }
    if (o.contains("kappa")) {
      const json& kp = o["kappa"];
      reject_unknown(kp, "/tests/kappa",
                     {"pairs", "n", "replicates", "min_gap", "max_gap"});
      KappaBlock kappa;
      kappa.pairs = static_cast<int>(get_long(kp, "/tests/kappa", "pairs", 50));
      kappa.n = get_long(kp, "/tests/kappa", "n", 400);
      kappa.replicates = get_long(kp, "/tests/kappa", "replicates", 64);
      kappa.min_gap = get_number(kp, "/tests/kappa", "min_gap", 0.1);
      kappa.max_gap = get_number(kp, "/tests/kappa", "max_gap", 0.0);
      block.kappa = kappa;
    }
    if (o.contains("covering_j")) block.covering_j = get_int_vector(o, "/tests", "covering_j");
    config.tests = block;
  }

  if (j.contains("posterior")) {
    const json& o = j["posterior"];
    reject_unknown(o, "/posterior",
                   {"prior", "mcmc", "kl", "prior_mass", "contraction", "fisher",
                    "lan", "bvm"});
    PosteriorBlock block;
    if (o.contains("prior")) {
      const json& pr = o["prior"];
      reject_unknown(pr, "/posterior/prior", {"kind", "mean", "sd"});
      block.prior.kind = pr.contains("kind") ? pr["kind"].get<std::string>() : "uniform";
      if (pr.contains("mean")) block.prior.mean = get_param(pr, "/posterior/prior", "mean");
      if (pr.contains("sd")) block.prior.sd = get_param(pr, "/posterior/prior", "sd");
    }
    if (o.contains("mcmc")) block.mcmc = parse_mcmc(o["mcmc"], "/posterior/mcmc");
    if (o.contains("kl")) {
      const json& kl = o["kl"];
      reject_unknown(kl, "/posterior/kl", {"theta", "n", "replicates", "k"});
      KlBlock kb;
      kb.theta = get_param(kl, "/posterior/kl", "theta");
      kb.n = get_long(kl, "/posterior/kl", "n", 200);
      kb.replicates = get_long(kl, "/posterior/kl", "replicates", 200);
      kb.k = get_number(kl, "/posterior/kl", "k", 2.0);
      block.kl = kb;
    }
    if (o.contains("prior_mass")) {
      const json& pm = o["prior_mass"];
      reject_unknown(pm, "/posterior/prior_mass",
                     {"eps_n", "k", "k_const", "j_grid", "prior_samples",
                      "kl_replicates", "n"});
      PriorMassBlock pb;
      pb.eps_n = get_number(pm, "/posterior/prior_mass", "eps_n");
      pb.k = get_number(pm, "/posterior/prior_mass", "k", 2.0);
      pb.k_const = get_number(pm, "/posterior/prior_mass", "k_const", 1.0);
      pb.j_grid = get_int_vector(pm, "/posterior/prior_mass", "j_grid");
      pb.options.prior_samples =
          get_long(pm, "/posterior/prior_mass", "prior_samples", 400);
      pb.options.kl_replicates =
          get_long(pm, "/posterior/prior_mass", "kl_replicates", 24);
      pb.options.n = get_long(pm, "/posterior/prior_mass", "n", 200);
      block.prior_mass = pb;
    }
    if (o.contains("contraction")) {
      const json& ct = o["contraction"];
      reject_unknown(ct, "/posterior/contraction",
                     {"n_grid", "m_grid", "data_replicates", "mcmc"});
      ContractionBlock cb;
      cb.options.n_grid = get_long_vector(ct, "/posterior/contraction", "n_grid");
      for (double m : get_double_vector(ct, "/posterior/contraction", "m_grid"))
        cb.options.m_grid.push_back(m);
      cb.options.data_replicates =
          get_long(ct, "/posterior/contraction", "data_replicates", 20);
      cb.options.mcmc = ct.contains("mcmc")
                            ? parse_mcmc(ct["mcmc"], "/posterior/contraction/mcmc")
                            : block.mcmc;
      block.contraction = cb;
    }
    if (o.contains("fisher")) {
      const json& fs = o["fisher"];
      reject_unknown(fs, "/posterior/fisher", {"n", "replicates"});
      FisherBlock fb;
      fb.n = get_long(fs, "/posterior/fisher", "n", 5000);
      fb.replicates = get_long(fs, "/posterior/fisher", "replicates", 500);
      block.fisher = fb;
    }
    if (o.contains("lan")) {
      const json& ln = o["lan"];
      reject_unknown(ln, "/posterior/lan", {"n_grid", "replicates", "h_grid"});
      LanBlock lb;
      lb.n_grid = get_long_vector(ln, "/posterior/lan", "n_grid");
      lb.replicates = get_long(ln, "/posterior/lan", "replicates", 200);
      if (ln.contains("h_grid")) {
        if (!ln["h_grid"].is_array())
          throw ConfigError("expected array at /posterior/lan/h_grid");
        for (const auto& hv : ln["h_grid"]) {
          Eigen::VectorXd h(hv.size());
          for (std::size_t i = 0; i < hv.size(); ++i)
            h[static_cast<Eigen::Index>(i)] = hv[i].get<double>();
          lb.h_grid.push_back(h);
        }
      }
      block.lan = lb;
    }
    if (o.contains("bvm")) {
      const json& bv = o["bvm"];
      reject_unknown(bv, "/posterior/bvm", {"n_grid", "mcmc", "projection"});
      BvmBlock bb;
      bb.n_grid = get_long_vector(bv, "/posterior/bvm", "n_grid");
      bb.mcmc = bv.contains("mcmc") ? parse_mcmc(bv["mcmc"], "/posterior/bvm/mcmc")
                                    : block.mcmc;
      if (bv.contains("projection")) bb.projection = bv["projection"].get<bool>();
      block.bvm = bb;
    }
    config.posterior = block;
  }

  return config;
}

ExperimentConfig load_experiment_config(const std::string& file) {
  return parse_experiment_config(read_json(file));
}

std::string config_hash(const json& canonical) {
  // nlohmann objects keep sorted keys, so dump() is a canonical byte form
  const std::uint64_t h = fnv1a64(canonical.dump());
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

std::unique_ptr<Prior> make_prior(const PriorBlock& block, const ParamSpace& space) {
  if (block.kind == "uniform") return std::make_unique<UniformBoxPrior>(space);
  if (block.kind == "truncated_gaussian") {
    if (block.mean.size() != space.dim() || block.sd.size() != space.dim())
      throw ConfigError("truncated_gaussian prior needs mean and sd of dimension d");
    return std::make_unique<TruncatedGaussianPrior>(space, block.mean, block.sd);
  }
  throw ConfigError("unknown prior kind: " + block.kind);
}

}  // namespace hmmlab
