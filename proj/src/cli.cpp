#include "hmmlab/cli.hpp"

#include <chrono>
#include <ctime>
#include <sstream>

#include "hmmlab/io.hpp"
#include "hmmlab/stats.hpp"

namespace hmmlab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

struct RunState {
  fs::path dir;
  std::string scenario;
  std::string subcommand;
  std::string hash;
  std::uint64_t seed = 0;
  std::string started;
  std::vector<std::string> outputs;

  void add(const std::string& name) { outputs.push_back(name); }

  void finish() const {
    json manifest;
    manifest["tool_version"] = kToolVersion;
    manifest["scenario"] = scenario;
    manifest["subcommand"] = subcommand;
    manifest["config_hash"] = hash;
    manifest["seed"] = seed;
    manifest["start_time"] = started;
    manifest["end_time"] = timestamp_now();
    manifest["outputs"] = outputs;
    write_json(dir / "manifest.json", manifest);
  }
};

RunState begin_run(ExperimentConfig& config, const RunContext& ctx,
                   const std::string& subcommand) {
  if (ctx.seed_override) {
    config.seed = *ctx.seed_override;
    config.raw["seed"] = *ctx.seed_override;
  }
  RunState state;
  state.scenario = config.scenario;
  state.subcommand = subcommand;
  state.hash = config_hash(config.raw);
  state.seed = config.seed;
  state.started = timestamp_now();
  state.dir = ctx.out_dir / config.scenario;
  fs::create_directories(state.dir);
  return state;
}

ConstantsBundle make_bundle(const HmmSpec& spec, const ExperimentConfig& config) {
  ConstantsBlock block = config.constants.value_or(ConstantsBlock{});
  if (!config.constants && spec.emission->metric() == ObsMetric::discrete)
    block.branch = "countable";
  const T1Branch branch =
      block.branch == "countable" ? T1Branch::countable : T1Branch::continuous;
  LipschitzPlan plan = block.lipschitz;
  plan.seed = config.seed;
  return constants_bundle(spec, config.theta0, branch, block.horizon, plan,
                          block.mixing_tol);
}

}  // namespace

fs::path run_simulate(ExperimentConfig config, const RunContext& ctx) {
  if (!config.simulate) throw ConfigError("config has no /simulate block");
  RunState state = begin_run(config, ctx, "simulate");
  const HmmSpec spec = make_spec(config.model);
  spec.require_in_space(config.theta0);

  const SimulateBlock& block = *config.simulate;
  for (std::size_t ni = 0; ni < block.n_grid.size(); ++ni) {
    const long n = block.n_grid[ni];
    if (n < 1) throw ConfigError("/simulate/n_grid entries must be >= 1");
    for (long rep = 0; rep < block.replicates; ++rep) {
      Rng rng = Rng::stream(config.seed, ni * 1000000ULL + static_cast<std::uint64_t>(rep));
      const PathPair path = simulate_path(spec, config.theta0, n, rng);
      std::ostringstream name;
      name << "path_n" << n << "_rep" << rep << ".csv";
      write_path_csv(state.dir / name.str(), path);
      state.add(name.str());
      if (rep == 0) {
        const FilterTrace trace = run_filter(spec, config.theta0, path.observations);
        std::ostringstream tname;
        tname << "filter_trace_n" << n << ".csv";
        write_filter_trace_csv(state.dir / tname.str(), trace);
        state.add(tname.str());
      }
    }
  }
  state.finish();
  return state.dir;
}

fs::path run_constants(ExperimentConfig config, const RunContext& ctx) {
  if (!config.constants) throw ConfigError("config has no /constants block");
  RunState state = begin_run(config, ctx, "constants");
  const HmmSpec spec = make_spec(config.model);
  spec.require_in_space(config.theta0);

  const ConstantsBundle bundle = make_bundle(spec, config);
  json constants = constants_to_json(bundle);
  constants["seed"] = config.seed;
  constants["horizon"] = config.constants->horizon;
  constants["lipschitz_plan"] = {{"y_points", config.constants->lipschitz.y_points},
                                 {"filter_points", config.constants->lipschitz.filter_points},
                                 {"pair_samples", config.constants->lipschitz.pair_samples}};
  write_json(state.dir / "constants.json", constants);
  state.add("constants.json");
  write_json(state.dir / "mixing.json", mixing_to_json(bundle.mixing));
  state.add("mixing.json");

  if (config.constants->tail) {
    const TailBlock& tb = *config.constants->tail;
    const Param theta1 = tb.theta1;
    const Param theta2 = tb.theta2;
    spec.require_in_space(theta1);
    spec.require_in_space(theta2);
    LipschitzFunctional functional{
        [&spec, theta1, theta2](std::span<const double> y) {
          return loglik_ratio(spec, theta1, theta2, y).value;
        },
        bundle.l_lip};
    const TailCheck check =
        tail_check(spec, config.theta0, functional, bundle, tb.n, tb.replicates, {},
                   config.seed + 0x7a17ULL, ctx.exec, tb.radius_count);
    write_tail_check_csv(state.dir / "tail_check.csv", check);
    state.add("tail_check.csv");
    json sidecar = tail_check_sidecar(check, config.seed + 0x7a17ULL);
    sidecar["theta1"] = std::vector<double>(theta1.data(), theta1.data() + theta1.size());
    sidecar["theta2"] = std::vector<double>(theta2.data(), theta2.data() + theta2.size());
    sidecar["lip_bound"] = bundle.l_lip;
    write_json(state.dir / "tail_check.json", sidecar);
    state.add("tail_check.json");
  }
  state.finish();
  return state.dir;
}

fs::path run_tests(ExperimentConfig config, const RunContext& ctx) {
  if (!config.tests) throw ConfigError("config has no /tests block");
  RunState state = begin_run(config, ctx, "tests");
  const HmmSpec spec = make_spec(config.model);
  spec.require_in_space(config.theta0);
  const TestsBlock& block = *config.tests;

  for (int j : block.covering_j) {
    const CoveringReport cover =
        cover_annulus(config.theta0, block.eps, j, block.options.composite.xi,
                      spec.space);
    std::ostringstream name;
    name << "covering_j" << j;
    write_covering_csv(state.dir / (name.str() + ".csv"), cover);
    state.add(name.str() + ".csv");
    write_json(state.dir / (name.str() + ".json"), covering_to_json(cover));
    state.add(name.str() + ".json");
  }

  if (block.kappa) {
    const KappaBlock& kb = *block.kappa;
    Rng rng = Rng::stream(config.seed, 0x4a99ULL);
    const double max_gap =
        kb.max_gap > 0.0 ? kb.max_gap : spec.space.widths().norm();
    std::vector<std::pair<Param, Param>> pairs;
    while (static_cast<int>(pairs.size()) < kb.pairs) {
      Param a(spec.dim), b(spec.dim);
      for (int i = 0; i < spec.dim; ++i) {
        a[i] = rng.uniform(spec.space.lower[i], spec.space.upper[i]);
        b[i] = rng.uniform(spec.space.lower[i], spec.space.upper[i]);
      }
      const double gap = (a - b).norm();
      if (gap >= kb.min_gap && gap <= max_gap) pairs.emplace_back(a, b);
    }
    const KappaBounds bounds = fit_kappa(spec, config.theta0, pairs, kb.n,
                                         kb.replicates, config.seed + 0x4a99ULL,
                                         ctx.exec);
    write_json(state.dir / "kappa.json", kappa_to_json(bounds));
    state.add("kappa.json");
  }

  const ConstantsBundle bundle = make_bundle(spec, config);
  const ErrorRateReport report =
      verify_testing_condition(spec, config.theta0, block.eps, block.options, bundle,
                               config.seed + 0x7e57ULL, ctx.exec);
  write_error_rates_csv(state.dir / "error_rates.csv", report, block.eps);
  state.add("error_rates.csv");
  json summary;
  summary["replicates"] = report.replicates;
  summary["type1_replicates"] = report.type1_replicates;
  summary["slope_log_type2"] = report.slope_log_type2;
  summary["eps"] = block.eps;
  write_json(state.dir / "error_rates.json", summary);
  state.add("error_rates.json");

  const TestFunction composite = build_composite_test(
      spec, config.theta0, block.eps, block.options.composite,
      config.seed + 0x7e57ULL, ctx.exec);
  write_json(state.dir / "composite.json", test_function_to_json(composite));
  state.add("composite.json");

  if (!composite.members.empty()) {
    const DivergenceEstimate est = estimate_divergence(
        spec, config.theta0, composite.members.front().center,
        block.options.composite.divergence_n * 4,
        block.options.composite.divergence_replicates, config.seed + 0xd1ULL,
        ctx.exec);
    write_json(state.dir / "divergence.json", divergence_to_json(est));
    state.add("divergence.json");
  }
  state.finish();
  return state.dir;
}

fs::path run_posterior(ExperimentConfig config, const RunContext& ctx) {
  if (!config.posterior) throw ConfigError("config has no /posterior block");
  RunState state = begin_run(config, ctx, "posterior");
  const HmmSpec spec = make_spec(config.model);
  spec.require_in_space(config.theta0);
  const PosteriorBlock& block = *config.posterior;
  const auto prior = make_prior(block.prior, spec.space);

  std::optional<FisherPair> fisher;
  if (block.fisher) {
    fisher = fisher_pair(spec, config.theta0, block.fisher->n,
                         block.fisher->replicates, config.seed + 0xf1ULL, ctx.exec);
    json j;
    j["score_cov"] = json::array();
    j["n"] = block.fisher->n;
    j["replicates"] = block.fisher->replicates;
    j["rel_frobenius_gap"] = fisher->rel_frobenius_gap;
    j["min_eigenvalue"] = fisher->min_eigenvalue;
    for (Eigen::Index r = 0; r < fisher->score_cov.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < fisher->score_cov.cols(); ++c)
        row.push_back(fisher->score_cov(r, c));
      j["score_cov"].push_back(row);
    }
    json nh = json::array();
    for (Eigen::Index r = 0; r < fisher->neg_hessian.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < fisher->neg_hessian.cols(); ++c)
        row.push_back(fisher->neg_hessian(r, c));
      nh.push_back(row);
    }
    j["neg_hessian"] = nh;
    write_json(state.dir / "fisher.json", j);
    state.add("fisher.json");
  }

  if (block.bvm) {
    for (std::size_t ni = 0; ni < block.bvm->n_grid.size(); ++ni) {
      const long n = block.bvm->n_grid[ni];
      Rng rng = Rng::stream(config.seed, 0xb3ULL + ni);
      const PathPair path = simulate_path(spec, config.theta0, n, rng);
      const PosteriorRun run =
          rw_metropolis(spec, *prior, path.observations, block.bvm->mcmc,
                        config.seed + 0xb30ULL + ni);
      std::ostringstream base;
      base << "posterior_n" << n;
      write_posterior_csv(state.dir / (base.str() + ".csv"), run);
      state.add(base.str() + ".csv");
      write_json(state.dir / (base.str() + ".json"), posterior_sidecar(run));
      state.add(base.str() + ".json");

      if (fisher) {
        BvmDiagnostic diag = bvm_diagnostic(spec, config.theta0, path.observations,
                                            *fisher);
        TvOptions tv_options;
        tv_options.allow_projection = block.bvm->projection;
        diag.tv_estimate = bvm_tv_distance(run, diag.delta_n0, fisher->neg_hessian,
                                           config.theta0, n, tv_options);
        write_json(state.dir / ("bvm_n" + std::to_string(n) + ".json"),
                   bvm_to_json(diag));
        state.add("bvm_n" + std::to_string(n) + ".json");
      }

      if (ni == 0) {
        // second chain under a different seed for the split-seed diagnostic
        const PosteriorRun run2 =
            rw_metropolis(spec, *prior, path.observations, block.bvm->mcmc,
                          config.seed + 0xb31dULL + ni);
        const double gr = gelman_rubin({run.samples, run2.samples});
        json j;
        j["gelman_rubin"] = gr;
        j["n"] = n;
        j["chains"] = 2;
        write_json(state.dir / "gelman_rubin.json", j);
        state.add("gelman_rubin.json");
      }
    }
  }

  if (block.kl) {
    const KlMoments moments =
        kl_moments(spec, config.theta0, block.kl->theta, block.kl->n,
                   block.kl->replicates, block.kl->k, config.seed + 0x1c1ULL,
                   ctx.exec);
    json j;
    j["k_hat"] = moments.k_hat;
    j["k_se"] = moments.k_se;
    j["v_hat"] = moments.v_hat;
    j["v_se"] = moments.v_se;
    j["k"] = block.kl->k;
    j["n"] = block.kl->n;
    write_json(state.dir / "kl_moments.json", j);
    state.add("kl_moments.json");
  }

  if (block.prior_mass) {
    const PriorMassBlock& pm = *block.prior_mass;
    const PriorMassReport report =
        check_prior_mass(spec, *prior, config.theta0, pm.eps_n, pm.k, pm.k_const,
                         pm.j_grid, pm.options, config.seed + 0x9a55ULL, ctx.exec);
    write_prior_mass_csv(state.dir / "prior_mass.csv", report);
    state.add("prior_mass.csv");
  }

  if (block.contraction) {
    const ContractionDiagnostic diag =
        contraction_diagnostic(spec, *prior, config.theta0,
                               block.contraction->options,
                               config.seed + 0xc027ULL, ctx.exec);
    write_contraction_csv(state.dir / "contraction.csv", diag);
    state.add("contraction.csv");
  }

  if (block.lan) {
    if (!fisher)
      throw ConfigError("/posterior/lan requires the /posterior/fisher block");
    std::vector<Eigen::VectorXd> h_grid = block.lan->h_grid;
    if (h_grid.empty()) {
      for (int i = 0; i < spec.dim; ++i) {
        Eigen::VectorXd h = Eigen::VectorXd::Zero(spec.dim);
        h[i] = 1.0;
        h_grid.push_back(h);
      }
    }
    const LanReport report =
        lan_remainder(spec, config.theta0, block.lan->n_grid, h_grid,
                      block.lan->replicates, fisher->neg_hessian,
                      config.seed + 0x1a2ULL, ctx.exec);
    write_lan_csv(state.dir / "lan.csv", report);
    state.add("lan.csv");
  }

  state.finish();
  return state.dir;
}

fs::path run_report(const std::vector<fs::path>& run_dirs, const fs::path& out_dir) {
  if (run_dirs.empty()) throw ConfigError("report: no run directories given");
  fs::create_directories(out_dir);

  std::vector<json> manifests;
  for (const auto& dir : run_dirs) {
    const fs::path file = dir / "manifest.json";
    if (!fs::exists(file)) throw ConfigError("report: missing " + file.string());
    manifests.push_back(read_json(file));
  }
  const std::string version = manifests.front().at("tool_version").get<std::string>();
  for (const auto& m : manifests)
    if (m.at("tool_version").get<std::string>() != version)
      throw ConfigError("report: mixed tool versions across runs");

  std::ostringstream out;
  out << "scenario,subcommand,config_hash,seed,outputs,start_time,end_time\n";
  for (const auto& m : manifests)
    out << m.at("scenario").get<std::string>() << ','
        << m.at("subcommand").get<std::string>() << ','
        << m.at("config_hash").get<std::string>() << ',' << m.at("seed").get<std::uint64_t>()
        << ',' << m.at("outputs").size() << ',' << m.at("start_time").get<std::string>()
        << ',' << m.at("end_time").get<std::string>() << '\n';
  const fs::path summary = out_dir / "summary.csv";
  write_text(summary, out.str());
  return summary;
}

}  // namespace hmmlab
