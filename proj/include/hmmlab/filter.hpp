#pragma once

#include <Eigen/Core>
#include <span>

#include "hmmlab/model.hpp"

namespace hmmlab {

// Prediction-filter path p_1..p_n together with the per-step log-likelihood
// increments log sum_x p_t(x) g(Y_t|x); the total is their sum.
struct FilterTrace {
  Eigen::MatrixXd filters;      // n x S, row t-1 holds p_t
  Eigen::VectorXd increments;   // length n
  double total = 0.0;
};

// log g(y|x) for every state
Eigen::VectorXd log_emissions(const HmmSpec& spec, const Param& theta, double y);

// One forward update p -> f(y, p). The update is self-normalizing; weights
// are formed in log space with a max shift.
Eigen::VectorXd filter_step(const HmmSpec& spec, const Param& theta,
                            const Eigen::VectorXd& p, double y);

// lower-level form used in hot loops and by tests with synthetic emissions
Eigen::VectorXd filter_step_core(const Eigen::MatrixXd& q,
                                 const Eigen::VectorXd& log_g,
                                 const Eigen::VectorXd& p);

FilterTrace run_filter(const HmmSpec& spec, const Param& theta,
                       std::span<const double> y);

// total log-likelihood only, no trace storage
double loglik(const HmmSpec& spec, const Param& theta, std::span<const double> y);

// log p(y_1^n) by explicit enumeration of all S^n hidden paths. Guarded at
// S^n <= 1e7.
double brute_force_loglik(const HmmSpec& spec, const Param& theta,
                          std::span<const double> y);

struct LikelihoodRatioValue {
  Param theta1;
  Param theta2;
  double value = 0.0;  // l_n(theta1) - l_n(theta2)
};

LikelihoodRatioValue loglik_ratio(const HmmSpec& spec, const Param& theta1,
                                  const Param& theta2, std::span<const double> y);

}  // namespace hmmlab
