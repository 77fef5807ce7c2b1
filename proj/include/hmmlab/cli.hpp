#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "hmmlab/config.hpp"
#include "hmmlab/parallel.hpp"

namespace hmmlab {

struct RunContext {
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed_override;
  Exec exec;
};

// Each runner writes its artifacts plus manifest.json under
// <out_dir>/<scenario> and returns that directory.
std::filesystem::path run_simulate(ExperimentConfig config, const RunContext& ctx);
std::filesystem::path run_constants(ExperimentConfig config, const RunContext& ctx);
std::filesystem::path run_tests(ExperimentConfig config, const RunContext& ctx);
std::filesystem::path run_posterior(ExperimentConfig config, const RunContext& ctx);

// Merges manifests of completed runs into summary.csv (one row per run).
std::filesystem::path run_report(const std::vector<std::filesystem::path>& run_dirs,
                                 const std::filesystem::path& out_dir);

}  // namespace hmmlab
