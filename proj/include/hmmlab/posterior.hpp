#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hmmlab/model.hpp"
#include "hmmlab/parallel.hpp"

namespace hmmlab {

class Prior {
 public:
  virtual ~Prior() = default;
  virtual double log_density(const Param& theta) const = 0;
  virtual Param sample(Rng& rng) const = 0;
  virtual const ParamSpace& support() const = 0;
};

class UniformBoxPrior final : public Prior {
 public:
  explicit UniformBoxPrior(ParamSpace space);
  double log_density(const Param& theta) const override;
  Param sample(Rng& rng) const override;
  const ParamSpace& support() const override { return space_; }

 private:
  ParamSpace space_;
  double log_norm_;
};

// Gaussian density truncated to the box (normalised on it).
class TruncatedGaussianPrior final : public Prior {
 public:
  TruncatedGaussianPrior(ParamSpace space, Param mean, Eigen::VectorXd sd);
  double log_density(const Param& theta) const override;
  Param sample(Rng& rng) const override;
  const ParamSpace& support() const override { return space_; }

 private:
  ParamSpace space_;
  Param mean_;
  Eigen::VectorXd sd_;
  double log_norm_;
};

struct McmcConfig {
  long iterations = 10000;        // must be >= 1e4
  double burn_in_frac = 0.2;
  int thinning = 1;
  double target_accept = 0.3;
  int adapt_interval = 100;
  Param init;                     // empty: box center
  Eigen::VectorXd proposal_scale; // empty: 0.1 * box widths
};

struct PosteriorRun {
  Eigen::MatrixXd samples;  // retained draws x d
  double acceptance_rate = 0.0;
  long n = 0;
  std::uint64_t seed = 0;
  long burn_in = 0;
  int thinning = 1;
  std::vector<std::string> warnings;
};

// Random-walk Metropolis targeting the posterior on the prior's support.
// Per-coordinate proposal scales adapt during burn-in only.
PosteriorRun rw_metropolis(const HmmSpec& spec, const Prior& prior,
                           std::span<const double> y, const McmcConfig& config,
                           std::uint64_t seed);

struct KlMoments {
  double k_hat = 0.0;
  double k_se = 0.0;
  double v_hat = 0.0;
  double v_se = 0.0;
};

// Monte Carlo estimates of K(p_theta0, p_theta) and the centered k-th
// absolute moment of the log ratio, both at the joint (length-n) level.
KlMoments kl_moments(const HmmSpec& spec, const Param& theta0, const Param& theta,
                     long n, long replicates, double k, std::uint64_t seed,
                     const Exec& exec = {});

struct PriorMassRow {
  int j = 0;
  double annulus_mass = 0.0;
  double bn_mass = 0.0;
  double ratio = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct PriorMassReport {
  std::vector<PriorMassRow> rows;
  long prior_samples = 0;
  double eps_n = 0.0;
  double k = 2.0;
  double k_const = 1.0;
};

struct PriorMassOptions {
  long prior_samples = 400;
  long kl_replicates = 24;
  long n = 200;
};

PriorMassReport check_prior_mass(const HmmSpec& spec, const Prior& prior,
                                 const Param& theta0, double eps_n, double k,
                                 double k_const, std::span<const int> j_grid,
                                 const PriorMassOptions& options,
                                 std::uint64_t seed, const Exec& exec = {});

struct ContractionDiagnostic {
  std::vector<long> n_grid;
  std::vector<double> m_grid;
  Eigen::MatrixXd outside_mass;  // n_grid x m_grid, averaged over replicates
  Eigen::MatrixXd se;            // across-replicate s.e.
};

struct ContractionOptions {
  std::vector<long> n_grid;
  std::vector<double> m_grid;
  long data_replicates = 20;
  McmcConfig mcmc;
};

ContractionDiagnostic contraction_diagnostic(const HmmSpec& spec, const Prior& prior,
                                             const Param& theta0,
                                             const ContractionOptions& options,
                                             std::uint64_t seed,
                                             const Exec& exec = {});

// central-difference score with per-coordinate steps ~ 1e-2/sqrt(n);
// a Richardson pass engages when half-step estimates disagree by > 1%
Eigen::VectorXd fd_score(const HmmSpec& spec, const Param& theta,
                         std::span<const double> y);
Eigen::MatrixXd fd_hessian(const HmmSpec& spec, const Param& theta,
                           std::span<const double> y);

struct FisherPair {
  Eigen::MatrixXd score_cov;     // cov of score/sqrt(n) across replicates
  Eigen::MatrixXd neg_hessian;   // -1/n mean finite-difference Hessian
  double rel_frobenius_gap = 0.0;
  double min_eigenvalue = 0.0;   // of the neg-Hessian estimate
};

// Hessians are averaged over `replicates` simulated datasets. The score
// covariance may pool additional score-only replicates (score_replicates,
// 0 = same count); scores are cheap and the sample-covariance noise floor
// is what limits the cross-validation tolerance.
FisherPair fisher_pair(const HmmSpec& spec, const Param& theta0, long n,
                       long replicates, std::uint64_t seed, const Exec& exec = {},
                       long score_replicates = 0);

struct BvmDiagnostic {
  Eigen::VectorXd score;
  FisherPair fisher;
  Eigen::VectorXd delta_n0;  // I^{-1} score / sqrt(n), with I = neg-Hessian pair member
  double lan_remainder = 0.0;
  double tv_estimate = 0.0;
};

BvmDiagnostic bvm_diagnostic(const HmmSpec& spec, const Param& theta0,
                             std::span<const double> y, const FisherPair& fisher);

struct LanCell {
  long n = 0;
  Eigen::VectorXd h;
  double mean_abs_remainder = 0.0;
  double se = 0.0;
  bool trimmed = false;  // theta0 + h/sqrt(n) left the box
};

struct LanReport {
  std::vector<LanCell> cells;
  long replicates = 0;
};

// remainder(h) = [l(theta0 + h/sqrt(n)) - l(theta0)]
//             - [h . score/sqrt(n) - h I h / 2], per replicate
LanReport lan_remainder(const HmmSpec& spec, const Param& theta0,
                        std::span<const long> n_grid,
                        std::span<const Eigen::VectorXd> h_grid, long replicates,
                        const Eigen::MatrixXd& fisher, std::uint64_t seed,
                        const Exec& exec = {});

struct TvOptions {
  bool allow_projection = false;  // d > 2: worst 1-D projection (lower bound)
};

// TV between the local-parameter sample law and N(delta, I^{-1}) via
// whitened histogram cells with Freedman-Diaconis widths.
double bvm_tv_distance(const PosteriorRun& run, const Eigen::VectorXd& delta_n0,
                       const Eigen::MatrixXd& fisher, const Param& theta0, long n,
                       const TvOptions& options = {});

}  // namespace hmmlab
