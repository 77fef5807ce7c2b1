#include "hmmlab/posterior.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "hmmlab/filter.hpp"
#include "hmmlab/stats.hpp"

namespace hmmlab {

UniformBoxPrior::UniformBoxPrior(ParamSpace space) : space_(std::move(space)) {
  log_norm_ = 0.0;
  for (int i = 0; i < space_.dim(); ++i)
    log_norm_ -= std::log(space_.upper[i] - space_.lower[i]);
}

double UniformBoxPrior::log_density(const Param& theta) const {
  return space_.contains(theta) ? log_norm_
                                : -std::numeric_limits<double>::infinity();
}

Param UniformBoxPrior::sample(Rng& rng) const {
  Param theta(space_.dim());
  for (int i = 0; i < space_.dim(); ++i)
    theta[i] = rng.uniform(space_.lower[i], space_.upper[i]);
  return theta;
}

TruncatedGaussianPrior::TruncatedGaussianPrior(ParamSpace space, Param mean,
                                               Eigen::VectorXd sd)
    : space_(std::move(space)), mean_(std::move(mean)), sd_(std::move(sd)) {
  if (mean_.size() != space_.dim() || sd_.size() != space_.dim())
    throw std::invalid_argument("truncated gaussian prior: dimension mismatch");
  if (sd_.minCoeff() <= 0.0)
    throw std::invalid_argument("truncated gaussian prior: sd must be > 0");
  log_norm_ = 0.0;
  for (int i = 0; i < space_.dim(); ++i) {
    const double z_lo = (space_.lower[i] - mean_[i]) / sd_[i];
    const double z_hi = (space_.upper[i] - mean_[i]) / sd_[i];
    const double mass = normal_cdf(z_hi) - normal_cdf(z_lo);
    log_norm_ -= std::log(sd_[i]) + 0.5 * std::log(2.0 * std::numbers::pi) +
                 std::log(mass);
  }
}

double TruncatedGaussianPrior::log_density(const Param& theta) const {
  if (!space_.contains(theta)) return -std::numeric_limits<double>::infinity();
  double lp = log_norm_;
  for (int i = 0; i < space_.dim(); ++i) {
    const double z = (theta[i] - mean_[i]) / sd_[i];
    lp -= 0.5 * z * z;
  }
  return lp;
}

Param TruncatedGaussianPrior::sample(Rng& rng) const {
  // per-coordinate rejection; boxes in use keep acceptance high
  Param theta(space_.dim());
  for (int i = 0; i < space_.dim(); ++i) {
    double v;
    int guard = 0;
    do {
      v = rng.normal(mean_[i], sd_[i]);
      if (++guard > 100000)
        throw std::runtime_error("truncated gaussian prior: rejection stalled");
    } while (v < space_.lower[i] || v > space_.upper[i]);
    theta[i] = v;
  }
  return theta;
}

PosteriorRun rw_metropolis(const HmmSpec& spec, const Prior& prior,
                           std::span<const double> y, const McmcConfig& config,
                           std::uint64_t seed) {
  if (config.iterations < 10000)
    throw std::invalid_argument("rw_metropolis: iterations must be >= 10000");
  if (config.thinning < 1)
    throw std::invalid_argument("rw_metropolis: thinning must be >= 1");
  const int d = spec.dim;

  Param current = config.init.size() == d ? config.init : spec.space.center();
  if (!prior.support().contains(current))
    throw std::invalid_argument("rw_metropolis: initial point outside the support");

  Eigen::VectorXd base_scale = config.proposal_scale.size() == d
                                   ? config.proposal_scale
                                   : (0.1 * spec.space.widths()).eval();
  double global_factor = 1.0;

  Rng rng = Rng::stream(seed, 0x3c3cULL);
  double current_lp = loglik(spec, current, y) + prior.log_density(current);

  const long burn_in =
      static_cast<long>(static_cast<double>(config.iterations) * config.burn_in_frac);
  const long retained = (config.iterations - burn_in) / config.thinning;

  PosteriorRun run;
  run.samples.resize(retained, d);
  run.n = static_cast<long>(y.size());
  run.seed = seed;
  run.burn_in = burn_in;
  run.thinning = config.thinning;

  // Welford moments of the burn-in trajectory drive the per-coordinate scales
  Eigen::VectorXd wf_mean = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd wf_m2 = Eigen::VectorXd::Zero(d);
  long wf_count = 0;

  long window_accepts = 0, window_total = 0;
  long post_accepts = 0, post_total = 0;
  long stored = 0;

  Eigen::VectorXd scale = global_factor * base_scale;
  Param proposal(d);
  for (long it = 0; it < config.iterations; ++it) {
    for (int i = 0; i < d; ++i) proposal[i] = current[i] + scale[i] * rng.normal();
    bool accepted = false;
    const double prior_lp = prior.log_density(proposal);
    if (prior_lp > -std::numeric_limits<double>::infinity()) {
      const double lp = loglik(spec, proposal, y) + prior_lp;
      if (std::log(rng.uniform01_pos()) < lp - current_lp) {
        current = proposal;
        current_lp = lp;
        accepted = true;
      }
    }

    if (it < burn_in) {
      ++wf_count;
      for (int i = 0; i < d; ++i) {
        const double delta = current[i] - wf_mean[i];
        wf_mean[i] += delta / static_cast<double>(wf_count);
        wf_m2[i] += delta * (current[i] - wf_mean[i]);
      }
      ++window_total;
      if (accepted) ++window_accepts;
      if (window_total == config.adapt_interval) {
        const double rate = static_cast<double>(window_accepts) /
                            static_cast<double>(window_total);
        global_factor *= std::exp(0.8 * (rate - config.target_accept));
        global_factor = std::clamp(global_factor, 1e-3, 1e3);
        if (wf_count > 200) {
          for (int i = 0; i < d; ++i) {
            const double sd =
                std::sqrt(wf_m2[i] / static_cast<double>(wf_count - 1));
            if (sd > 1e-12)
              base_scale[i] = 2.4 / std::sqrt(static_cast<double>(d)) * sd;
          }
        }
        scale = global_factor * base_scale;
        window_accepts = window_total = 0;
      }
    } else {
      ++post_total;
      if (accepted) ++post_accepts;
      if ((it - burn_in) % config.thinning == 0 && stored < retained)
        run.samples.row(stored++) = current.transpose();
    }
  }

  run.acceptance_rate =
      post_total > 0
          ? static_cast<double>(post_accepts) / static_cast<double>(post_total)
          : 0.0;
  if (run.acceptance_rate < 0.01 || run.acceptance_rate > 0.9)
    run.warnings.push_back("acceptance rate " +
                           std::to_string(run.acceptance_rate) +
                           " outside [0.01, 0.9] after adaptation");
  return run;
}

KlMoments kl_moments(const HmmSpec& spec, const Param& theta0, const Param& theta,
                     long n, long replicates, double k, std::uint64_t seed,
                     const Exec& exec) {
  if (!(k > 1.0)) throw std::invalid_argument("kl_moments: k must be > 1");
  KlMoments out;
  if (theta0 == theta) return out;

  std::vector<double> ratios(static_cast<std::size_t>(replicates));
  parallel_for(ratios.size(), exec, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, i);
    const PathPair path = simulate_path(spec, theta0, n, rng);
    ratios[i] = loglik(spec, theta0, path.observations) -
                loglik(spec, theta, path.observations);
  });
  out.k_hat = mean(ratios);
  out.k_se = standard_error(ratios);
  std::vector<double> centered(ratios.size());
  for (std::size_t i = 0; i < ratios.size(); ++i)
    centered[i] = std::pow(std::abs(ratios[i] - out.k_hat), k);
  out.v_hat = mean(centered);
  out.v_se = standard_error(centered);
  return out;
}

PriorMassReport check_prior_mass(const HmmSpec& spec, const Prior& prior,
                                 const Param& theta0, double eps_n, double k,
                                 double k_const, std::span<const int> j_grid,
                                 const PriorMassOptions& options,
                                 std::uint64_t seed, const Exec& exec) {
  if (!(eps_n > 0.0) || !(k_const > 0.0))
    throw std::invalid_argument("check_prior_mass: eps_n and K must be > 0");

  PriorMassReport report;
  report.prior_samples = options.prior_samples;
  report.eps_n = eps_n;
  report.k = k;
  report.k_const = k_const;

  const long n = options.n;
  const double k_cap = static_cast<double>(n) * eps_n * eps_n;
  const double v_cap = std::pow(static_cast<double>(n), k / 2.0) * std::pow(eps_n, k);

  std::vector<Param> draws(static_cast<std::size_t>(options.prior_samples));
  {
    Rng rng = Rng::stream(seed, 0xa11ceULL);
    for (auto& theta : draws) theta = prior.sample(rng);
  }
  std::vector<double> dist(draws.size());
  std::vector<char> in_bn(draws.size(), 0);
  parallel_for(draws.size(), exec, [&](std::size_t i) {
    dist[i] = (draws[i] - theta0).norm();
    if (draws[i] == theta0) {
      in_bn[i] = 1;
      return;
    }
    const KlMoments moments =
        kl_moments(spec, theta0, draws[i], n, options.kl_replicates, k,
                   detail::splitmix64(seed) + i, Exec::serial());
    in_bn[i] = (moments.k_hat <= k_cap && moments.v_hat <= v_cap) ? 1 : 0;
  });

  double bn_mass = 0.0;
  for (char c : in_bn) bn_mass += c;
  bn_mass /= static_cast<double>(draws.size());
  if (bn_mass <= 0.0)
    throw std::runtime_error("B_n mass unresolved; increase samples");

  for (int j : j_grid) {
    PriorMassRow row;
    row.j = j;
    const double r_in = static_cast<double>(j) * eps_n;
    double annulus = 0.0;
    for (double r : dist)
      if (r > r_in && r <= 2.0 * r_in) annulus += 1.0;
    annulus /= static_cast<double>(draws.size());
    row.annulus_mass = annulus;
    row.bn_mass = bn_mass;
    row.ratio = annulus / bn_mass;
    row.bound = std::exp(k_const * static_cast<double>(n) * eps_n * eps_n *
                         static_cast<double>(j) * static_cast<double>(j) / 2.0);
    row.pass = row.ratio <= row.bound;
    report.rows.push_back(row);
  }
  return report;
}

ContractionDiagnostic contraction_diagnostic(const HmmSpec& spec, const Prior& prior,
                                             const Param& theta0,
                                             const ContractionOptions& options,
                                             std::uint64_t seed, const Exec& exec) {
  if (options.n_grid.empty() || options.m_grid.empty())
    throw std::invalid_argument("contraction_diagnostic: empty grids");
  const std::size_t reps = static_cast<std::size_t>(options.data_replicates);
  const std::size_t nn = options.n_grid.size();
  const std::size_t mm = options.m_grid.size();

  Eigen::MatrixXd masses = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nn * reps),
                                                 static_cast<Eigen::Index>(mm));
  parallel_for(nn * reps, exec, [&](std::size_t task) {
    const std::size_t ni = task / reps;
    const long n = options.n_grid[ni];
    Rng rng = Rng::stream(seed, 0xc0ULL + task);
    const PathPair path = simulate_path(spec, theta0, n, rng);
    const PosteriorRun run = rw_metropolis(spec, prior, path.observations,
                                           options.mcmc,
                                           detail::splitmix64(seed) + task);
    const double eps_n = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t mi = 0; mi < mm; ++mi) {
      const double radius = options.m_grid[mi] * eps_n;
      long outside = 0;
      for (Eigen::Index r = 0; r < run.samples.rows(); ++r)
        if ((run.samples.row(r).transpose() - theta0).norm() > radius) ++outside;
      masses(static_cast<Eigen::Index>(task), static_cast<Eigen::Index>(mi)) =
          static_cast<double>(outside) / static_cast<double>(run.samples.rows());
    }
  });

  ContractionDiagnostic diag;
  diag.n_grid = options.n_grid;
  diag.m_grid = options.m_grid;
  diag.outside_mass.resize(static_cast<Eigen::Index>(nn), static_cast<Eigen::Index>(mm));
  diag.se.resize(static_cast<Eigen::Index>(nn), static_cast<Eigen::Index>(mm));
  for (std::size_t ni = 0; ni < nn; ++ni) {
    for (std::size_t mi = 0; mi < mm; ++mi) {
      std::vector<double> vals(reps);
      for (std::size_t r = 0; r < reps; ++r)
        vals[r] = masses(static_cast<Eigen::Index>(ni * reps + r),
                         static_cast<Eigen::Index>(mi));
      diag.outside_mass(static_cast<Eigen::Index>(ni), static_cast<Eigen::Index>(mi)) =
          mean(vals);
      diag.se(static_cast<Eigen::Index>(ni), static_cast<Eigen::Index>(mi)) =
          standard_error(vals);
    }
  }
  return diag;
}

namespace {

Eigen::VectorXd fd_steps(const Param& theta, long n, double factor) {
  Eigen::VectorXd h(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i)
    h[i] = factor / std::sqrt(static_cast<double>(n)) *
           std::max(1.0, std::abs(theta[i]));
  return h;
}

void require_margin(const HmmSpec& spec, const Param& theta,
                    const Eigen::VectorXd& h) {
  if (spec.space.interior_margin(theta) < 2.0 * h.maxCoeff())
    throw std::domain_error(
        "finite differences: theta too close to the box boundary");
}

Eigen::VectorXd fd_score_step(const HmmSpec& spec, const Param& theta,
                              std::span<const double> y,
                              const Eigen::VectorXd& h) {
  const int d = static_cast<int>(theta.size());
  Eigen::VectorXd score(d);
  Param shifted = theta;
  for (int i = 0; i < d; ++i) {
    shifted[i] = theta[i] + h[i];
    const double up = loglik(spec, shifted, y);
    shifted[i] = theta[i] - h[i];
    const double down = loglik(spec, shifted, y);
    shifted[i] = theta[i];
    score[i] = (up - down) / (2.0 * h[i]);
  }
  return score;
}

Eigen::MatrixXd fd_hessian_step(const HmmSpec& spec, const Param& theta,
                                std::span<const double> y,
                                const Eigen::VectorXd& h, double center) {
  const int d = static_cast<int>(theta.size());
  Eigen::MatrixXd hess(d, d);
  Param shifted = theta;
  for (int i = 0; i < d; ++i) {
    shifted[i] = theta[i] + h[i];
    const double up = loglik(spec, shifted, y);
    shifted[i] = theta[i] - h[i];
    const double down = loglik(spec, shifted, y);
    shifted[i] = theta[i];
    hess(i, i) = (up - 2.0 * center + down) / (h[i] * h[i]);
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      double quad = 0.0;
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          shifted[i] = theta[i] + si * h[i];
          shifted[j] = theta[j] + sj * h[j];
          quad += si * sj * loglik(spec, shifted, y);
          shifted[i] = theta[i];
          shifted[j] = theta[j];
        }
      }
      hess(i, j) = hess(j, i) = quad / (4.0 * h[i] * h[j]);
    }
  }
  return hess;
}

}  // namespace

Eigen::VectorXd fd_score(const HmmSpec& spec, const Param& theta,
                         std::span<const double> y) {
  const Eigen::VectorXd h = fd_steps(theta, static_cast<long>(y.size()), 1e-2);
  require_margin(spec, theta, h);
  const Eigen::VectorXd full = fd_score_step(spec, theta, y, h);
  const Eigen::VectorXd half = fd_score_step(spec, theta, y, 0.5 * h);
  const double gap = (full - half).norm() / std::max(1.0, half.norm());
  if (gap > 0.01) return (4.0 * half - full) / 3.0;
  return half;
}

Eigen::MatrixXd fd_hessian(const HmmSpec& spec, const Param& theta,
                           std::span<const double> y) {
  const Eigen::VectorXd h = fd_steps(theta, static_cast<long>(y.size()), 1e-1);
  require_margin(spec, theta, h);
  const double center = loglik(spec, theta, y);
  const Eigen::MatrixXd full = fd_hessian_step(spec, theta, y, h, center);
  const Eigen::MatrixXd half = fd_hessian_step(spec, theta, y, 0.5 * h, center);
  const double gap = (full - half).norm() / std::max(1.0, half.norm());
  if (gap > 0.01) return (4.0 * half - full) / 3.0;
  return half;
}

FisherPair fisher_pair(const HmmSpec& spec, const Param& theta0, long n,
                       long replicates, std::uint64_t seed, const Exec& exec,
                       long score_replicates) {
  if (replicates < 2) throw std::invalid_argument("fisher_pair: replicates >= 2");
  if (score_replicates < replicates) score_replicates = replicates;
  const int d = spec.dim;
  Eigen::MatrixXd scores(score_replicates, d);
  std::vector<Eigen::MatrixXd> hessians(static_cast<std::size_t>(replicates));
  parallel_for(static_cast<std::size_t>(score_replicates), exec, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, i);
    const PathPair path = simulate_path(spec, theta0, n, rng);
    scores.row(static_cast<Eigen::Index>(i)) =
        (fd_score(spec, theta0, path.observations) /
         std::sqrt(static_cast<double>(n)))
            .transpose();
    if (i < static_cast<std::size_t>(replicates))
      hessians[i] = fd_hessian(spec, theta0, path.observations);
  });

  FisherPair pair;
  const Eigen::RowVectorXd mean_score = scores.colwise().mean();
  Eigen::MatrixXd centered = scores.rowwise() - mean_score;
  pair.score_cov = centered.transpose() * centered /
                   static_cast<double>(score_replicates - 1);
  pair.score_cov = 0.5 * (pair.score_cov + pair.score_cov.transpose()).eval();

  Eigen::MatrixXd mean_hessian = Eigen::MatrixXd::Zero(d, d);
  for (const auto& hm : hessians) mean_hessian += hm;
  mean_hessian /= static_cast<double>(replicates);
  pair.neg_hessian = -mean_hessian / static_cast<double>(n);
  pair.neg_hessian = 0.5 * (pair.neg_hessian + pair.neg_hessian.transpose()).eval();

  pair.rel_frobenius_gap = (pair.score_cov - pair.neg_hessian).norm() /
                           pair.neg_hessian.norm();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_h(pair.neg_hessian);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_c(pair.score_cov);
  pair.min_eigenvalue = es_h.eigenvalues().minCoeff();
  if (pair.min_eigenvalue <= 0.0 || es_c.eigenvalues().minCoeff() <= 0.0) {
    const double cond_h =
        es_h.eigenvalues().maxCoeff() / std::abs(pair.min_eigenvalue);
    throw std::runtime_error(
        "fisher_pair: estimate not positive definite (condition number " +
        std::to_string(cond_h) + ")");
  }
  return pair;
}

BvmDiagnostic bvm_diagnostic(const HmmSpec& spec, const Param& theta0,
                             std::span<const double> y, const FisherPair& fisher) {
  BvmDiagnostic diag;
  diag.fisher = fisher;
  diag.score = fd_score(spec, theta0, y);
  const double root_n = std::sqrt(static_cast<double>(y.size()));
  diag.delta_n0 = fisher.neg_hessian.ldlt().solve(diag.score) / root_n;

  // sup_|h|=1 of the LAN remainder on this dataset, over the axis directions
  const double l0 = loglik(spec, theta0, y);
  double sup = 0.0;
  for (int i = 0; i < spec.dim; ++i) {
    for (int sign : {1, -1}) {
      Eigen::VectorXd h = Eigen::VectorXd::Zero(spec.dim);
      h[i] = sign;
      const Param shifted = theta0 + h / root_n;
      if (!spec.space.contains(shifted)) continue;
      const double quad = h.dot(diag.score) / root_n -
                          0.5 * h.dot(fisher.neg_hessian * h);
      sup = std::max(sup, std::abs(loglik(spec, shifted, y) - l0 - quad));
    }
  }
  diag.lan_remainder = sup;
  return diag;
}

LanReport lan_remainder(const HmmSpec& spec, const Param& theta0,
                        std::span<const long> n_grid,
                        std::span<const Eigen::VectorXd> h_grid, long replicates,
                        const Eigen::MatrixXd& fisher, std::uint64_t seed,
                        const Exec& exec) {
  LanReport report;
  report.replicates = replicates;
  for (std::size_t ni = 0; ni < n_grid.size(); ++ni) {
    const long n = n_grid[ni];
    const double root_n = std::sqrt(static_cast<double>(n));
    for (std::size_t hi = 0; hi < h_grid.size(); ++hi) {
      const Eigen::VectorXd& h = h_grid[hi];
      LanCell cell;
      cell.n = n;
      cell.h = h;
      const Param shifted = theta0 + h / root_n;
      if (!spec.space.contains(shifted)) {
        cell.trimmed = true;
        report.cells.push_back(cell);
        continue;
      }
      std::vector<double> rems(static_cast<std::size_t>(replicates));
      parallel_for(rems.size(), exec, [&](std::size_t r) {
        Rng rng = Rng::stream(seed, (ni * 131 + hi) * 1000003ULL + r);
        const PathPair path = simulate_path(spec, theta0, n, rng);
        const double l0 = loglik(spec, theta0, path.observations);
        const double l1 = loglik(spec, shifted, path.observations);
        const Eigen::VectorXd score = fd_score(spec, theta0, path.observations);
        const double quad = h.dot(score) / root_n - 0.5 * h.dot(fisher * h);
        rems[r] = std::abs(l1 - l0 - quad);
      });
      cell.mean_abs_remainder = mean(rems);
      cell.se = standard_error(rems);
      report.cells.push_back(cell);
    }
  }
  return report;
}

namespace {

// half L1 gap between a sample histogram and the standard normal law in
// whitened coordinates; cells unoccupied by samples contribute their normal
// mass, so no explicit enumeration over empty cells is needed
double tv_whitened(const Eigen::MatrixXd& w) {
  const Eigen::Index n = w.rows();
  const int d = static_cast<int>(w.cols());
  std::vector<double> widths(static_cast<std::size_t>(d));
  std::vector<double> origin(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) {
    std::vector<double> col(static_cast<std::size_t>(n));
    for (Eigen::Index r = 0; r < n; ++r) col[static_cast<std::size_t>(r)] = w(r, k);
    std::sort(col.begin(), col.end());
    widths[static_cast<std::size_t>(k)] = freedman_diaconis_width(col);
    origin[static_cast<std::size_t>(k)] = col.front();
  }

  std::map<std::vector<long>, long> cells;
  std::vector<long> key(static_cast<std::size_t>(d));
  for (Eigen::Index r = 0; r < n; ++r) {
    for (int k = 0; k < d; ++k)
      key[static_cast<std::size_t>(k)] = static_cast<long>(
          std::floor((w(r, k) - origin[static_cast<std::size_t>(k)]) /
                     widths[static_cast<std::size_t>(k)]));
    ++cells[key];
  }

  double tv = 0.0;
  double occupied_normal_mass = 0.0;
  for (const auto& [cell, count] : cells) {
    double mass = 1.0;
    for (int k = 0; k < d; ++k) {
      const double lo = origin[static_cast<std::size_t>(k)] +
                        widths[static_cast<std::size_t>(k)] *
                            static_cast<double>(cell[static_cast<std::size_t>(k)]);
      const double hi = lo + widths[static_cast<std::size_t>(k)];
      mass *= normal_cdf(hi) - normal_cdf(lo);
    }
    occupied_normal_mass += mass;
    tv += std::abs(static_cast<double>(count) / static_cast<double>(n) - mass);
  }
  tv += 1.0 - occupied_normal_mass;  // empirical mass is zero off the support
  return 0.5 * tv;
}

}  // namespace

double bvm_tv_distance(const PosteriorRun& run, const Eigen::VectorXd& delta_n0,
                       const Eigen::MatrixXd& fisher, const Param& theta0, long n,
                       const TvOptions& options) {
  if (run.samples.rows() < 10000)
    throw std::invalid_argument("bvm_tv_distance: need >= 1e4 retained draws");
  const int d = static_cast<int>(theta0.size());
  const double root_n = std::sqrt(static_cast<double>(n));

  Eigen::MatrixXd h = (run.samples.rowwise() - theta0.transpose()) * root_n;
  h.rowwise() -= delta_n0.transpose();

  Eigen::LLT<Eigen::MatrixXd> llt(fisher);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("bvm_tv_distance: fisher estimate not PD");
  const Eigen::MatrixXd w = h * llt.matrixL();  // w = (h-delta)^T L per row

  if (d <= 2) return tv_whitened(w);
  if (!options.allow_projection)
    throw std::runtime_error(
        "bvm_tv_distance: d > 2 unsupported without the projection flag");
  double worst = 0.0;
  for (int k = 0; k < d; ++k) worst = std::max(worst, tv_whitened(w.col(k)));
  return worst;  // lower bound on the joint TV
}

}  // namespace hmmlab
