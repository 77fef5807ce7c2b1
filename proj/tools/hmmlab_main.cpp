#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "hmmlab/cli.hpp"
#include "hmmlab/io.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out = "runs";
  long seed = -1;
  int threads = 0;
};

void attach_common(CLI::App* cmd, CommonArgs& args, bool needs_config = true) {
  if (needs_config)
    cmd->add_option("--config", args.config, "experiment config file")->required();
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--threads", args.threads,
                  "worker threads (0 = hardware default, 1 = serial)");
}

hmmlab::RunContext make_context(const CommonArgs& args) {
  hmmlab::RunContext ctx;
  ctx.out_dir = args.out;
  if (args.seed >= 0) ctx.seed_override = static_cast<std::uint64_t>(args.seed);
  ctx.exec.threads = args.threads;
  return ctx;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hmmlab: finite-state HMM posterior asymptotics laboratory"};
  app.require_subcommand(1);

  CommonArgs sim_args, const_args, tests_args, post_args;
  std::vector<std::string> report_dirs;
  std::string report_out = "runs";

  CLI::App* sim = app.add_subcommand("simulate", "simulate paths and filter traces");
  attach_common(sim, sim_args);
  CLI::App* cst = app.add_subcommand("constants", "transportation constants and tail check");
  attach_common(cst, const_args);
  CLI::App* tst = app.add_subcommand("tests", "likelihood-ratio tests and error rates");
  attach_common(tst, tests_args);
  CLI::App* pst = app.add_subcommand("posterior", "MCMC, contraction and BvM diagnostics");
  attach_common(pst, post_args);
  CLI::App* rpt = app.add_subcommand("report", "merge run manifests into a summary");
  rpt->add_option("dirs", report_dirs, "run directories")->required();
  rpt->add_option("--out", report_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const auto config = hmmlab::load_experiment_config(sim_args.config);
      const auto dir = hmmlab::run_simulate(config, make_context(sim_args));
      std::printf("wrote %s\n", dir.string().c_str());
    } else if (cst->parsed()) {
      const auto config = hmmlab::load_experiment_config(const_args.config);
      const auto dir = hmmlab::run_constants(config, make_context(const_args));
      std::printf("wrote %s\n", dir.string().c_str());
    } else if (tst->parsed()) {
      const auto config = hmmlab::load_experiment_config(tests_args.config);
      const auto dir = hmmlab::run_tests(config, make_context(tests_args));
      std::printf("wrote %s\n", dir.string().c_str());
    } else if (pst->parsed()) {
      const auto config = hmmlab::load_experiment_config(post_args.config);
      const auto dir = hmmlab::run_posterior(config, make_context(post_args));
      std::printf("wrote %s\n", dir.string().c_str());
    } else if (rpt->parsed()) {
      std::vector<std::filesystem::path> dirs(report_dirs.begin(), report_dirs.end());
      const auto summary = hmmlab::run_report(dirs, report_out);
      std::printf("wrote %s\n", summary.string().c_str());
    }
  } catch (const hmmlab::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
