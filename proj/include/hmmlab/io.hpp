#pragma once

#include <filesystem>
#include <json.hpp>
#include <string>

#include "hmmlab/concentration.hpp"
#include "hmmlab/filter.hpp"
#include "hmmlab/model.hpp"
#include "hmmlab/posterior.hpp"
#include "hmmlab/testing.hpp"

namespace hmmlab {

inline constexpr const char* kToolVersion = "hmmlab 0.1.0";

// config/input problems map to CLI exit code 2, numeric failures to 3
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json model_to_json(const ModelConfig& config);
ModelConfig model_from_json(const nlohmann::json& j, const std::string& path);

void write_text(const std::filesystem::path& file, const std::string& content);
void write_json(const std::filesystem::path& file, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& file);

std::string csv_row(std::span<const double> values);

void write_path_csv(const std::filesystem::path& file, const PathPair& path);
void write_filter_trace_csv(const std::filesystem::path& file,
                            const FilterTrace& trace);
void write_tail_check_csv(const std::filesystem::path& file, const TailCheck& check);
nlohmann::json tail_check_sidecar(const TailCheck& check, std::uint64_t seed);
nlohmann::json constants_to_json(const ConstantsBundle& bundle);
nlohmann::json mixing_to_json(const MixingReport& report);
void write_covering_csv(const std::filesystem::path& file,
                        const CoveringReport& report);
nlohmann::json covering_to_json(const CoveringReport& report);
void write_error_rates_csv(const std::filesystem::path& file,
                           const ErrorRateReport& report, double eps);
nlohmann::json test_function_to_json(const TestFunction& test);
TestFunction test_function_from_json(const nlohmann::json& j);
void write_posterior_csv(const std::filesystem::path& file, const PosteriorRun& run);
nlohmann::json posterior_sidecar(const PosteriorRun& run);
void write_contraction_csv(const std::filesystem::path& file,
                           const ContractionDiagnostic& diag);
nlohmann::json bvm_to_json(const BvmDiagnostic& diag);
void write_lan_csv(const std::filesystem::path& file, const LanReport& report);
void write_prior_mass_csv(const std::filesystem::path& file,
                          const PriorMassReport& report);
nlohmann::json divergence_to_json(const DivergenceEstimate& est);
nlohmann::json kappa_to_json(const KappaBounds& bounds);

}  // namespace hmmlab
