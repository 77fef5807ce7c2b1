#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "hmmlab/model.hpp"
#include "hmmlab/posterior.hpp"
#include "hmmlab/testing.hpp"

namespace hmmlab {

struct SimulateBlock {
  std::vector<long> n_grid;
  long replicates = 1;
};

struct TailBlock {
  long n = 500;
  long replicates = 10000;
  int radius_count = 8;
  Param theta1;  // the checked functional is F_n(theta1, theta2)
  Param theta2;
};

struct ConstantsBlock {
  std::string branch = "continuous";
  double mixing_tol = 1e-8;
  int horizon = 8;
  LipschitzPlan lipschitz;
  std::optional<TailBlock> tail;
};

struct KappaBlock {
  int pairs = 50;
  long n = 400;
  long replicates = 64;
  double min_gap = 0.1;
  double max_gap = 0.0;  // 0: box diameter
};

struct TestsBlock {
  double eps = 0.1;
  TestingConditionOptions options;
  std::optional<KappaBlock> kappa;
  std::vector<int> covering_j;  // standalone covering reports
};

struct PriorBlock {
  std::string kind = "uniform";
  Param mean;
  Eigen::VectorXd sd;
};

struct KlBlock {
  Param theta;
  long n = 200;
  long replicates = 200;
  double k = 2.0;
};

struct PriorMassBlock {
  double eps_n = 0.1;
  double k = 2.0;
  double k_const = 1.0;
  std::vector<int> j_grid;
  PriorMassOptions options;
};

struct ContractionBlock {
  ContractionOptions options;
};

struct FisherBlock {
  long n = 5000;
  long replicates = 500;
};

struct LanBlock {
  std::vector<long> n_grid;
  long replicates = 200;
  // axis-aligned unit directions by default; explicit vectors may be listed
  std::vector<Eigen::VectorXd> h_grid;
};

struct BvmBlock {
  std::vector<long> n_grid;
  McmcConfig mcmc;
  bool projection = false;
};

struct PosteriorBlock {
  PriorBlock prior;
  McmcConfig mcmc;
  std::optional<KlBlock> kl;
  std::optional<PriorMassBlock> prior_mass;
  std::optional<ContractionBlock> contraction;
  std::optional<FisherBlock> fisher;
  std::optional<LanBlock> lan;
  std::optional<BvmBlock> bvm;
};

struct ExperimentConfig {
  std::string scenario;
  std::uint64_t seed = 1;
  ModelConfig model;
  Param theta0;
  std::optional<SimulateBlock> simulate;
  std::optional<ConstantsBlock> constants;
  std::optional<TestsBlock> tests;
  std::optional<PosteriorBlock> posterior;

  nlohmann::json raw;  // canonical parsed form, hashed into the manifest
};

// Strict parse: unknown keys anywhere fail with the offending JSON path.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& file);

std::string config_hash(const nlohmann::json& canonical);

std::unique_ptr<Prior> make_prior(const PriorBlock& block, const ParamSpace& space);

}  // namespace hmmlab
