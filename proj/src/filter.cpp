#include "hmmlab/filter.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "hmmlab/stats.hpp"

namespace hmmlab {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// weights_x proportional to p(x) g(y|x); returns log of the normalizer
// log sum_x p(x) g(y|x). Throws when every weight vanishes.
double posterior_weights(const Eigen::VectorXd& log_g, const Eigen::VectorXd& p,
                         Eigen::VectorXd& weights) {
  const Eigen::Index s = p.size();
  weights.resize(s);
  double shift = kNegInf;
  for (Eigen::Index x = 0; x < s; ++x) {
    const double a = p[x] > 0.0 ? std::log(p[x]) + log_g[x] : kNegInf;
    weights[x] = a;
    shift = std::max(shift, a);
  }
  if (shift == kNegInf) throw std::runtime_error("filter degenerate");
  double total = 0.0;
  for (Eigen::Index x = 0; x < s; ++x) {
    weights[x] = std::exp(weights[x] - shift);
    total += weights[x];
  }
  weights /= total;
  return shift + std::log(total);
}
}  // namespace

Eigen::VectorXd log_emissions(const HmmSpec& spec, const Param& theta, double y) {
  Eigen::VectorXd log_g(spec.states);
  for (int x = 0; x < spec.states; ++x)
    log_g[x] = spec.emission->log_density(x, y, theta);
  return log_g;
}

Eigen::VectorXd filter_step_core(const Eigen::MatrixXd& q,
                                 const Eigen::VectorXd& log_g,
                                 const Eigen::VectorXd& p) {
  Eigen::VectorXd weights;
  posterior_weights(log_g, p, weights);
  Eigen::VectorXd next = q.transpose() * weights;
  next /= next.sum();
  return next;
}

Eigen::VectorXd filter_step(const HmmSpec& spec, const Param& theta,
                            const Eigen::VectorXd& p, double y) {
  return filter_step_core(spec.transition(theta), log_emissions(spec, theta, y), p);
}

FilterTrace run_filter(const HmmSpec& spec, const Param& theta,
                       std::span<const double> y) {
  const long n = static_cast<long>(y.size());
  if (n < 1) throw std::invalid_argument("run_filter: empty observation sequence");
  spec.require_in_space(theta);

  const Eigen::MatrixXd q = spec.transition(theta);
  const int s = spec.states;

  FilterTrace trace;
  trace.filters.resize(n, s);
  trace.increments.resize(n);

  Eigen::VectorXd p = spec.initial(theta);
  Eigen::VectorXd weights(s), log_g(s);
  for (long t = 0; t < n; ++t) {
    trace.filters.row(t) = p.transpose();
    for (int x = 0; x < s; ++x)
      log_g[x] = spec.emission->log_density(x, y[static_cast<std::size_t>(t)], theta);
    trace.increments[t] = posterior_weights(log_g, p, weights);
    if (t + 1 < n) {
      p = q.transpose() * weights;
      p /= p.sum();
    }
  }
  trace.total = trace.increments.sum();
  return trace;
}

double loglik(const HmmSpec& spec, const Param& theta, std::span<const double> y) {
  const long n = static_cast<long>(y.size());
  if (n < 1) throw std::invalid_argument("loglik: empty observation sequence");
  spec.require_in_space(theta);

  const Eigen::MatrixXd q = spec.transition(theta);
  const int s = spec.states;

  Eigen::VectorXd p = spec.initial(theta);
  Eigen::VectorXd weights(s), log_g(s);
  double total = 0.0;
  for (long t = 0; t < n; ++t) {
    for (int x = 0; x < s; ++x)
      log_g[x] = spec.emission->log_density(x, y[static_cast<std::size_t>(t)], theta);
    total += posterior_weights(log_g, p, weights);
    if (t + 1 < n) {
      p = q.transpose() * weights;
      p /= p.sum();
    }
  }
  return total;
}

double brute_force_loglik(const HmmSpec& spec, const Param& theta,
                          std::span<const double> y) {
  const long n = static_cast<long>(y.size());
  if (n < 1) throw std::invalid_argument("brute_force_loglik: empty sequence");
  spec.require_in_space(theta);

  const int s = spec.states;
  double paths = 1.0;
  for (long t = 0; t < n; ++t) {
    paths *= s;
    if (paths > 1e7)
      throw std::runtime_error("brute_force_loglik: S^n exceeds the 1e7 guard");
  }

  const Eigen::MatrixXd q = spec.transition(theta);
  const Eigen::VectorXd init = spec.initial(theta);
  Eigen::MatrixXd log_q = q.array().log().matrix();
  Eigen::VectorXd log_init = init.array().log().matrix();
  Eigen::MatrixXd log_g(n, s);
  for (long t = 0; t < n; ++t)
    for (int x = 0; x < s; ++x)
      log_g(t, x) = spec.emission->log_density(x, y[static_cast<std::size_t>(t)], theta);

  std::vector<int> path(static_cast<std::size_t>(n), 0);
  double lse = kNegInf;
  while (true) {
    double lp = log_init[path[0]] + log_g(0, path[0]);
    for (long t = 1; t < n; ++t)
      lp += log_q(path[static_cast<std::size_t>(t - 1)],
                  path[static_cast<std::size_t>(t)]) +
            log_g(t, path[static_cast<std::size_t>(t)]);
    lse = log_add_exp(lse, lp);

    long pos = n - 1;  // odometer over X^n
    while (pos >= 0 && path[static_cast<std::size_t>(pos)] == s - 1)
      path[static_cast<std::size_t>(pos--)] = 0;
    if (pos < 0) break;
    ++path[static_cast<std::size_t>(pos)];
  }
  return lse;
}

LikelihoodRatioValue loglik_ratio(const HmmSpec& spec, const Param& theta1,
                                  const Param& theta2, std::span<const double> y) {
  LikelihoodRatioValue out;
  out.theta1 = theta1;
  out.theta2 = theta2;
  out.value = loglik(spec, theta1, y) - loglik(spec, theta2, y);
  return out;
}

}  // namespace hmmlab
