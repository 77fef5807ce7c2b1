#include "hmmlab/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hmmlab/stats.hpp"

namespace hmmlab {

namespace {

double tv_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return 0.5 * (a - b).cwiseAbs().sum();
}

bool positive_entrywise(const Eigen::MatrixXd& m) {
  return m.minCoeff() > 0.0;
}

}  // namespace

double dobrushin_coefficient(const Eigen::MatrixXd& q) {
  double worst = 0.0;
  for (Eigen::Index a = 0; a < q.rows(); ++a)
    for (Eigen::Index b = a + 1; b < q.rows(); ++b)
      worst = std::max(worst, 0.5 * (q.row(a) - q.row(b)).cwiseAbs().sum());
  return worst;
}

MixingReport mixing_coefficient(const Eigen::MatrixXd& q, double tol) {
  if (!is_transition_matrix(q, 1e-9))
    throw std::invalid_argument("mixing_coefficient: not a transition matrix");
  if (!(tol > 0.0)) throw std::invalid_argument("mixing_coefficient: tol must be > 0");

  const long s = q.rows();
  // primitivity: positivity of Q^m is monotone in m, so checking the powers
  // 2^k up to the Wielandt bound (S-1)^2 + 1 suffices
  const long wielandt = (s - 1) * (s - 1) + 1;
  int eta_step = 1;
  Eigen::MatrixXd power = q;
  while (!positive_entrywise(power)) {
    if (eta_step > wielandt) throw std::runtime_error("not primitive");
    power = power * power;
    eta_step *= 2;
  }

  double eta = dobrushin_coefficient(power);
  if (dobrushin_coefficient(q) < 1.0) {
    eta_step = 1;
    eta = dobrushin_coefficient(q);
  }

  MixingReport report;
  report.eta = eta;
  report.eta_step = eta_step;

  const double geom = eta < 1.0
                          ? static_cast<double>(eta_step - 1) +
                                static_cast<double>(eta_step) * eta / (1.0 - eta)
                          : std::numeric_limits<double>::infinity();

  Eigen::MatrixXd qt = Eigen::MatrixXd::Identity(s, s);
  double sum = 0.0;
  for (long t = 1; t <= 100000000L; ++t) {
    qt = qt * q;
    const double dt = dobrushin_coefficient(qt);
    sum += dt;
    const double tail = dt * geom;  // sum_{k>=1} d_{T+k} <= d_T sum_k eta^{floor(k/r)}
    if (tail <= tol) {
      report.d_theta = sum;
      report.truncation_T = t;
      report.tail_bound = tail;
      return report;
    }
  }
  throw std::runtime_error("mixing_coefficient: truncation horizon exhausted");
}

ConstantsBundle t1_constant(const HmmSpec& spec, const Param& theta, T1Branch branch,
                            double mixing_tol) {
  spec.require_in_space(theta);
  ConstantsBundle bundle;
  bundle.branch = branch;
  bundle.mixing = mixing_coefficient(spec.transition(theta), mixing_tol);
  const double dplus1 = bundle.mixing.d_theta + 1.0;

  if (branch == T1Branch::countable) {
    if (spec.emission->metric() != ObsMetric::discrete)
      throw std::runtime_error(
          "constants unavailable: countable branch requires finite-alphabet emissions");
    bundle.c_h = dplus1 * dplus1;
    return bundle;
  }

  if (!spec.emission->has_t1_constant() || !spec.emission->has_w1())
    throw std::runtime_error(
        "constants unavailable: continuous branch needs C_Y and pairwise W1");
  bundle.c_y = spec.emission->t1_constant(theta);
  double lw = 0.0;
  for (int a = 0; a < spec.states; ++a)
    for (int b = a + 1; b < spec.states; ++b)
      lw = std::max(lw, spec.emission->w1(theta, a, b));
  bundle.l_w = lw;
  bundle.c_h = bundle.c_y + lw * lw * dplus1 * dplus1;
  return bundle;
}

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("wasserstein_1d: empty sample set");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());

  // area between the empirical CDFs
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t ia = 0, ib = 0;
  double w1 = 0.0;
  double prev = std::min(a.front(), b.front());
  while (ia < a.size() || ib < b.size()) {
    const double xa = ia < a.size() ? a[ia] : std::numeric_limits<double>::infinity();
    const double xb = ib < b.size() ? b[ib] : std::numeric_limits<double>::infinity();
    const double x = std::min(xa, xb);
    const double fa = static_cast<double>(ia) / na;
    const double fb = static_cast<double>(ib) / nb;
    w1 += std::abs(fa - fb) * (x - prev);
    prev = x;
    while (ia < a.size() && a[ia] == x) ++ia;
    while (ib < b.size() && b[ib] == x) ++ib;
  }
  return w1;
}

namespace {

// Filters that the extended chain can actually visit: one-step images of
// the forward map. Seeds cover the corners and uniform point of the simplex;
// for a primitive kernel the images stay in the interior, where the A2/A3
// quotients are finite.
std::vector<Eigen::VectorXd> filter_samples(const HmmSpec& spec, const Param& theta,
                                            const Eigen::MatrixXd& q,
                                            const std::vector<double>& y_grid,
                                            int count, Rng& rng) {
  const int states = static_cast<int>(q.rows());
  std::vector<Eigen::VectorXd> seeds;
  for (int i = 0; i < states; ++i) {
    Eigen::VectorXd corner = Eigen::VectorXd::Zero(states);
    corner[i] = 1.0;
    seeds.push_back(corner);
  }
  seeds.push_back(Eigen::VectorXd::Constant(states, 1.0 / states));
  while (static_cast<int>(seeds.size()) < count) {
    Eigen::VectorXd p(states);
    for (int i = 0; i < states; ++i) p[i] = -std::log(rng.uniform01_pos());
    p /= p.sum();
    seeds.push_back(p);
  }

  std::vector<Eigen::VectorXd> out;
  out.push_back(stationary_distribution(q));  // p_1 = r_theta
  for (const auto& seed : seeds) {
    const double y = y_grid[static_cast<std::size_t>(rng.next_u64() % y_grid.size())];
    out.push_back(filter_step_core(q, log_emissions(spec, theta, y), seed));
  }
  return out;
}

double obs_distance(ObsMetric metric, double y1, double y2) {
  if (metric == ObsMetric::discrete) return y1 == y2 ? 0.0 : 1.0;
  return std::abs(y1 - y2);
}

// log sum_x p(x) g(y|x), the per-step log-likelihood term of A3
double log_mixture(const HmmSpec& spec, const Param& theta,
                   const Eigen::VectorXd& p, double y) {
  const Eigen::VectorXd log_g = log_emissions(spec, theta, y);
  double shift = -std::numeric_limits<double>::infinity();
  for (Eigen::Index x = 0; x < p.size(); ++x)
    if (p[x] > 0.0) shift = std::max(shift, std::log(p[x]) + log_g[x]);
  if (shift == -std::numeric_limits<double>::infinity()) return shift;
  double total = 0.0;
  for (Eigen::Index x = 0; x < p.size(); ++x)
    if (p[x] > 0.0) total += std::exp(std::log(p[x]) + log_g[x] - shift);
  return shift + std::log(total);
}

}  // namespace

LipschitzEstimates lipschitz_estimates(const HmmSpec& spec, const Param& theta,
                                       int horizon, const LipschitzPlan& plan) {
  if (horizon < 1) throw std::invalid_argument("lipschitz_estimates: horizon >= 1");
  spec.require_in_space(theta);

  Rng rng = Rng::stream(plan.seed, 0x11b);
  const auto y_grid = spec.emission->observation_grid(theta, spec.states, plan.y_points);
  const Eigen::MatrixXd q = spec.transition(theta);
  const auto filters =
      filter_samples(spec, theta, q, y_grid, plan.filter_points, rng);
  const ObsMetric metric = spec.emission->metric();

  LipschitzEstimates est;

  // delta1: one-step map, perturb the observation
  for (const auto& p : filters) {
    for (std::size_t i = 0; i < y_grid.size(); ++i) {
      const Eigen::VectorXd fi =
          filter_step_core(q, log_emissions(spec, theta, y_grid[i]), p);
      for (std::size_t j = i + 1; j < y_grid.size(); ++j) {
        const double dy = obs_distance(metric, y_grid[i], y_grid[j]);
        if (dy <= 0.0) continue;
        const Eigen::VectorXd fj =
            filter_step_core(q, log_emissions(spec, theta, y_grid[j]), p);
        est.delta1 = std::max(est.delta1, tv_distance(fi, fj) / dy);
      }
    }
  }

  // delta2: lag-t maps, perturb the filter argument
  est.delta2_per_lag.assign(static_cast<std::size_t>(horizon) + 1, 0.0);
  for (int lag = 0; lag <= horizon; ++lag) {
    double sup = 0.0;
    for (int rep = 0; rep < plan.pair_samples; ++rep) {
      Eigen::VectorXd p1 =
          filters[static_cast<std::size_t>(rng.next_u64() % filters.size())];
      Eigen::VectorXd p2 =
          filters[static_cast<std::size_t>(rng.next_u64() % filters.size())];
      const double dp = tv_distance(p1, p2);
      if (dp <= 1e-12) continue;
      for (int step = 0; step <= lag; ++step) {
        const double y =
            y_grid[static_cast<std::size_t>(rng.next_u64() % y_grid.size())];
        const Eigen::VectorXd log_g = log_emissions(spec, theta, y);
        p1 = filter_step_core(q, log_g, p1);
        p2 = filter_step_core(q, log_g, p2);
      }
      sup = std::max(sup, tv_distance(p1, p2) / dp);
    }
    est.delta2_per_lag[static_cast<std::size_t>(lag)] = sup;
  }

  double partial = 0.0;
  for (double v : est.delta2_per_lag) partial += v;
  const double q_last = est.delta2_per_lag.back();
  const double q_prev = est.delta2_per_lag[est.delta2_per_lag.size() - 2];
  if (q_last > 1e-14 && q_prev > q_last) {
    est.decay_ratio = q_last / q_prev;
    est.delta2_tail = q_last * est.decay_ratio / (1.0 - est.decay_ratio);
  }
  est.delta2 = partial + est.delta2_tail;

  // A3 quotient for the log mixture density
  for (int rep = 0; rep < plan.pair_samples; ++rep) {
    const double y1 = y_grid[static_cast<std::size_t>(rng.next_u64() % y_grid.size())];
    const double y2 = y_grid[static_cast<std::size_t>(rng.next_u64() % y_grid.size())];
    const Eigen::VectorXd& p1 =
        filters[static_cast<std::size_t>(rng.next_u64() % filters.size())];
    const Eigen::VectorXd& p2 =
        filters[static_cast<std::size_t>(rng.next_u64() % filters.size())];
    const double dz = obs_distance(metric, y1, y2) + tv_distance(p1, p2);
    if (dz <= 1e-12) continue;
    const double l1 = log_mixture(spec, theta, p1, y1);
    const double l2 = log_mixture(spec, theta, p2, y2);
    est.l_lip = std::max(est.l_lip, 2.0 * std::abs(l1 - l2) / dz);
  }
  // deterministic scans sharpen the supremum: adjacent observations at a
  // fixed filter, and filter pairs at a fixed observation
  for (const auto& p : filters) {
    for (std::size_t i = 0; i + 1 < y_grid.size(); ++i) {
      const double dz = obs_distance(metric, y_grid[i], y_grid[i + 1]);
      if (dz <= 0.0) continue;
      const double l1 = log_mixture(spec, theta, p, y_grid[i]);
      const double l2 = log_mixture(spec, theta, p, y_grid[i + 1]);
      est.l_lip = std::max(est.l_lip, 2.0 * std::abs(l1 - l2) / dz);
    }
  }
  const std::size_t panel = std::min<std::size_t>(filters.size(),
                                                  static_cast<std::size_t>(spec.states) + 2);
  for (std::size_t a = 0; a < panel; ++a) {
    for (std::size_t b = a + 1; b < panel; ++b) {
      const double dp = tv_distance(filters[a], filters[b]);
      if (dp <= 1e-12) continue;
      for (double y : y_grid) {
        const double l1 = log_mixture(spec, theta, filters[a], y);
        const double l2 = log_mixture(spec, theta, filters[b], y);
        est.l_lip = std::max(est.l_lip, 2.0 * std::abs(l1 - l2) / dp);
      }
    }
  }

  return est;
}

ConstantsBundle constants_bundle(const HmmSpec& spec, const Param& theta,
                                 T1Branch branch, int horizon,
                                 const LipschitzPlan& plan, double mixing_tol) {
  ConstantsBundle bundle = t1_constant(spec, theta, branch, mixing_tol);
  const LipschitzEstimates lip = lipschitz_estimates(spec, theta, horizon, plan);
  bundle.delta1 = lip.delta1;
  bundle.delta2 = lip.delta2;
  bundle.delta = std::max(lip.delta1, lip.delta2);
  bundle.l_lip = lip.l_lip;
  const double amp = std::pow(1.0 + bundle.delta, 4);
  bundle.c_e = bundle.c_h * amp;
  bundle.c_tilde = bundle.l_lip * bundle.l_lip * bundle.c_h * amp;
  return bundle;
}

TailCheck tail_check(const HmmSpec& spec, const Param& theta_gen,
                     const LipschitzFunctional& functional,
                     const ConstantsBundle& bundle, long n, long replicates,
                     std::span<const double> radii, std::uint64_t seed,
                     const Exec& exec, int auto_radius_count) {
  if (replicates < 1000)
    throw std::invalid_argument("tail_check: replicates must be >= 1e3");
  spec.require_in_space(theta_gen);

  std::vector<double> values(static_cast<std::size_t>(replicates));
  parallel_for(static_cast<std::size_t>(replicates), exec, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, i);
    const PathPair path = simulate_path(spec, theta_gen, n, rng);
    values[i] = functional.value(path.observations);
  });

  const double center = mean(values);
  TailCheck check;
  check.radii.assign(radii.begin(), radii.end());
  if (check.radii.empty()) {
    const double sd = std::sqrt(variance(values));
    for (int k = 1; k <= auto_radius_count; ++k)
      check.radii.push_back(sd * (0.5 + 3.5 * static_cast<double>(k - 1) /
                                            std::max(1, auto_radius_count - 1)));
  }
  check.replicates = replicates;
  check.n = n;
  check.functional_mean = center;
  check.functional_sd = std::sqrt(variance(values));

  const double c_f = bundle.c_e * functional.lip_bound * functional.lip_bound;
  for (double r : check.radii) {
    long exceed = 0;
    for (double v : values)
      if (v - center > r) ++exceed;
    check.empirical_freq.push_back(static_cast<double>(exceed) /
                                   static_cast<double>(replicates));
    check.theoretical_bound.push_back(
        std::exp(-r * r / (2.0 * static_cast<double>(n) * c_f)));
  }
  return check;
}

}  // namespace hmmlab
