#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hmmlab/filter.hpp"
#include "hmmlab/model.hpp"
#include "hmmlab/parallel.hpp"

namespace hmmlab {

// D = sum_{t>=1} of the worst-pair total-variation contraction of Q^t,
// truncated once the geometric tail bound drops below tol.
struct MixingReport {
  double d_theta = 0.0;
  long truncation_T = 0;
  double tail_bound = 0.0;
  double eta = 0.0;      // Dobrushin coefficient of Q^eta_step
  int eta_step = 1;
};

// worst-pair TV distance between rows of a stochastic matrix
double dobrushin_coefficient(const Eigen::MatrixXd& q);

MixingReport mixing_coefficient(const Eigen::MatrixXd& q, double tol = 1e-8);

enum class T1Branch { countable, continuous };

struct ConstantsBundle {
  T1Branch branch = T1Branch::countable;
  MixingReport mixing;
  double c_h = 0.0;
  double c_y = 0.0;      // continuous branch only
  double l_w = 0.0;      // continuous branch only: max pairwise emission W1
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta = 0.0;    // max(delta1, delta2)
  double l_lip = 0.0;
  double c_e = 0.0;      // c_h (1 + delta)^4
  double c_tilde = 0.0;  // l_lip^2 c_h (1 + delta)^4
};

// Fills the C_H part (and C_Y, L_w on the continuous branch).
ConstantsBundle t1_constant(const HmmSpec& spec, const Param& theta, T1Branch branch,
                            double mixing_tol = 1e-8);

// Exact W1 between two one-dimensional empirical laws (area between the
// empirical CDFs); sample vectors may have different sizes.
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

// |mu_a - mu_b| for two equal-scale location-family laws
inline double wasserstein_1d_gaussian(double mu_a, double mu_b) {
  return std::abs(mu_a - mu_b);
}

struct LipschitzPlan {
  int y_points = 33;        // observation grid size
  int filter_points = 24;   // simplex sample count
  int pair_samples = 300;   // (z, z') pairs for the A3 quotient
  std::uint64_t seed = 1;
};

struct LipschitzEstimates {
  double delta1 = 0.0;
  double delta2 = 0.0;
  double l_lip = 0.0;
  std::vector<double> delta2_per_lag;  // sup-quotients by lag, 0..horizon
  double delta2_tail = 0.0;            // geometric extrapolation past horizon
  double decay_ratio = 0.0;
};

// Sampled sup-quotient estimates for the filter-map constants and the
// log-mixture Lipschitz norm. These certify the constants from below.
LipschitzEstimates lipschitz_estimates(const HmmSpec& spec, const Param& theta,
                                       int horizon, const LipschitzPlan& plan);

// t1_constant + lipschitz_estimates assembled into the derived constants.
ConstantsBundle constants_bundle(const HmmSpec& spec, const Param& theta,
                                 T1Branch branch, int horizon,
                                 const LipschitzPlan& plan,
                                 double mixing_tol = 1e-8);

// A functional of the observation path with a declared Lipschitz bound with
// respect to the l1 metric on the extended-sequence space.
struct LipschitzFunctional {
  std::function<double(std::span<const double>)> value;
  double lip_bound = 1.0;
};

struct TailCheck {
  std::vector<double> radii;
  std::vector<double> empirical_freq;
  std::vector<double> theoretical_bound;
  long replicates = 0;
  long n = 0;
  double functional_mean = 0.0;
  double functional_sd = 0.0;
};

// Monte Carlo check of the sub-Gaussian tail bound
// exp(-r^2 / (2 n C_E lip^2)) against empirical exceedance frequencies.
// An empty radii span requests an automatic grid of auto_radius_count
// points spanning [sd/2, 4 sd] of the observed functional.
TailCheck tail_check(const HmmSpec& spec, const Param& theta_gen,
                     const LipschitzFunctional& functional,
                     const ConstantsBundle& bundle, long n, long replicates,
                     std::span<const double> radii, std::uint64_t seed,
                     const Exec& exec = {}, int auto_radius_count = 8);

}  // namespace hmmlab
