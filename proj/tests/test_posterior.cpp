#include <doctest.h>

#include <cmath>

#include "hmmlab/filter.hpp"
#include "hmmlab/posterior.hpp"
#include "hmmlab/stats.hpp"
#include "oracle_helpers.hpp"

using namespace hmmlab;

namespace {

std::vector<double> column(const Eigen::MatrixXd& m, int c) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    out[static_cast<std::size_t>(r)] = m(r, c);
  return out;
}

}  // namespace

TEST_CASE("priors integrate to one on their support") {
  const ParamSpace space(Eigen::VectorXd::Constant(1, -2.0),
                         Eigen::VectorXd::Constant(1, 3.0));
  SUBCASE("uniform") {
    UniformBoxPrior prior(space);
    double mass = 0.0;
    const int pts = 20001;
    const double h = 5.0 / (pts - 1);
    for (int i = 0; i < pts; ++i) {
      const double w = (i == 0 || i == pts - 1) ? 0.5 : 1.0;
      mass += w * std::exp(prior.log_density(Eigen::VectorXd::Constant(1, -2.0 + i * h))) * h;
    }
    CHECK(std::abs(mass - 1.0) < 0.01);
  }
  SUBCASE("truncated gaussian") {
    TruncatedGaussianPrior prior(space, Eigen::VectorXd::Constant(1, 0.5),
                                 Eigen::VectorXd::Constant(1, 1.2));
    double mass = 0.0;
    const int pts = 20001;
    const double h = 5.0 / (pts - 1);
    for (int i = 0; i < pts; ++i) {
      const double w = (i == 0 || i == pts - 1) ? 0.5 : 1.0;
      mass += w * std::exp(prior.log_density(Eigen::VectorXd::Constant(1, -2.0 + i * h))) * h;
    }
    CHECK(std::abs(mass - 1.0) < 0.01);
  }
}

TEST_CASE("metropolis recovers the conjugate posterior mean") {
  const HmmSpec spec = oracles::iid_gauss_spec(-5.0, 5.0);
  const Param theta0 = Eigen::VectorXd::Constant(1, 0.5);
  const PathPair path = simulate_path(spec, theta0, 400, 101u);
  double ybar = 0.0;
  for (double y : path.observations) ybar += y;
  ybar /= static_cast<double>(path.observations.size());

  UniformBoxPrior prior(spec.space);
  McmcConfig config;
  config.iterations = 20000;
  const PosteriorRun run = rw_metropolis(spec, prior, path.observations, config, 7u);
  CHECK(run.warnings.empty());
  CHECK(run.acceptance_rate > 0.01);
  CHECK(run.acceptance_rate < 0.9);

  const std::vector<double> chain = column(run.samples, 0);
  const double post_mean = mean(chain);
  const double se = batch_means_se(chain);
  CHECK(std::abs(post_mean - ybar) < 3.0 * se + 1e-4);
}

TEST_CASE("iteration floor is enforced") {
  const HmmSpec spec = oracles::iid_gauss_spec();
  UniformBoxPrior prior(spec.space);
  const std::vector<double> y{0.1, 0.2};
  McmcConfig config;
  config.iterations = 0;
  CHECK_THROWS_AS(rw_metropolis(spec, prior, y, config, 1u), std::invalid_argument);
}

TEST_CASE("chains from two seeds agree by Gelman-Rubin") {
  const HmmSpec spec = oracles::gauss2_spec();
  const Param theta0 = Eigen::Vector2d(-0.5, 0.5);
  const PathPair path = simulate_path(spec, theta0, 200, 103u);
  UniformBoxPrior prior(spec.space);
  McmcConfig config;
  config.iterations = 20000;
  const PosteriorRun a = rw_metropolis(spec, prior, path.observations, config, 11u);
  const PosteriorRun b = rw_metropolis(spec, prior, path.observations, config, 12u);
  CHECK(gelman_rubin({a.samples, b.samples}) < 1.05);
}

TEST_CASE("same seed reproduces the chain bit for bit") {
  const HmmSpec spec = oracles::iid_gauss_spec();
  const PathPair path = simulate_path(spec, Eigen::VectorXd::Constant(1, 0.3), 100, 5u);
  UniformBoxPrior prior(spec.space);
  McmcConfig config;
  config.iterations = 10000;
  const PosteriorRun a = rw_metropolis(spec, prior, path.observations, config, 42u);
  const PosteriorRun b = rw_metropolis(spec, prior, path.observations, config, 42u);
  CHECK(a.samples == b.samples);
  CHECK(a.acceptance_rate == b.acceptance_rate);
}

TEST_CASE("kl moments vanish identically at the truth") {
  const HmmSpec spec = oracles::gauss2_spec();
  const Param theta0 = Eigen::Vector2d(-0.5, 0.5);
  const KlMoments m = kl_moments(spec, theta0, theta0, 100, 32, 2.0, 1u);
  CHECK(m.k_hat == 0.0);
  CHECK(m.v_hat == 0.0);
}

TEST_CASE("iid gaussian kl moments match closed forms") {
  // K = n (mu0 - mu)^2 / 2 and V_{2,0} = n (mu0 - mu)^2 for sigma = 1
  const HmmSpec spec = oracles::iid_gauss_spec();
  const Param theta0 = Eigen::VectorXd::Constant(1, 0.2);
  const Param theta = Eigen::VectorXd::Constant(1, -0.1);
  const long n = 200;
  const KlMoments m = kl_moments(spec, theta0, theta, n, 400, 2.0, 3u);
  const double gap2 = 0.09;
  CHECK(std::abs(m.k_hat - 0.5 * n * gap2) < 3.0 * m.k_se);
  CHECK(m.k_hat >= -3.0 * m.k_se);
  CHECK(std::abs(m.v_hat - n * gap2) < 4.0 * m.v_se);
}

TEST_CASE("prior mass condition on the conjugate interval oracle") {
  // For k = 2 the B_n ball is exactly {|mu - mu0| <= eps} in closed form
  const HmmSpec spec = oracles::iid_gauss_spec(-1.0, 1.0);
  const Param theta0 = Eigen::VectorXd::Zero(1);
  UniformBoxPrior prior(spec.space);
  const double eps = 0.15;
  PriorMassOptions options;
  options.prior_samples = 1500;
  options.kl_replicates = 48;
  options.n = 200;
  const std::vector<int> j_grid{1, 2, 20};
  const PriorMassReport report =
      check_prior_mass(spec, prior, theta0, eps, 2.0, 1.0, j_grid, options, 70u);
  REQUIRE(report.rows.size() == 3);

  const double bn_exact = eps;  // interval mass under Uniform[-1, 1]
  CHECK(std::abs(report.rows[0].bn_mass - bn_exact) <
        3.0 * binomial_se(bn_exact, 1500) + 0.03);
  // annulus mass for j=1: (2*0.3 - 2*0.15)/2 = 0.15
  CHECK(std::abs(report.rows[0].annulus_mass - 0.15) <
        3.0 * binomial_se(0.15, 1500));
  CHECK(report.rows[0].pass);
  // j = 20 pushes the annulus outside the box entirely
  CHECK(report.rows[2].annulus_mass == 0.0);
  CHECK(report.rows[2].ratio == 0.0);
  CHECK(report.rows[2].pass);
}

TEST_CASE("concentrated priors put no mass on any annulus") {
  const HmmSpec spec = oracles::iid_gauss_spec(-1.0, 1.0);
  const Param theta0 = Eigen::VectorXd::Zero(1);
  TruncatedGaussianPrior prior(spec.space, theta0, Eigen::VectorXd::Constant(1, 0.005));
  PriorMassOptions options;
  options.prior_samples = 300;
  options.kl_replicates = 32;
  options.n = 200;
  const std::vector<int> j_grid{2, 4};
  const PriorMassReport report =
      check_prior_mass(spec, prior, theta0, 0.15, 2.0, 1.0, j_grid, options, 9u);
  for (const auto& row : report.rows) {
    CHECK(row.annulus_mass == 0.0);
    CHECK(row.pass);
  }
}

TEST_CASE("unresolved B_n mass is an error") {
  const HmmSpec spec = oracles::iid_gauss_spec(-1.0, 1.0);
  const Param theta0 = Eigen::VectorXd::Zero(1);
  // prior concentrated far from theta0: no draw lands in B_n
  TruncatedGaussianPrior prior(spec.space, Eigen::VectorXd::Constant(1, 0.9),
                               Eigen::VectorXd::Constant(1, 0.005));
  PriorMassOptions options;
  options.prior_samples = 100;
  options.kl_replicates = 24;
  options.n = 400;
  const std::vector<int> j_grid{1};
  CHECK_THROWS_WITH_AS(
      check_prior_mass(spec, prior, theta0, 0.05, 2.0, 1.0, j_grid, options, 11u),
      "B_n mass unresolved; increase samples", std::runtime_error);
}

TEST_CASE("posterior mass outside nested balls is monotone") {
  const HmmSpec spec = oracles::gauss2_spec();
  const Param theta0 = Eigen::Vector2d(-0.5, 0.5);
  UniformBoxPrior prior(spec.space);
  ContractionOptions options;
  options.n_grid = {200};
  options.m_grid = {1.0, 2.0, 4.0, 8.0};
  options.data_replicates = 4;
  options.mcmc.iterations = 10000;
  const ContractionDiagnostic diag =
      contraction_diagnostic(spec, prior, theta0, options, 13u);
  for (std::size_t mi = 1; mi < options.m_grid.size(); ++mi)
    CHECK(diag.outside_mass(0, static_cast<Eigen::Index>(mi)) <=
          diag.outside_mass(0, static_cast<Eigen::Index>(mi - 1)) + 1e-15);
}

TEST_CASE("conjugate contraction masses match the gaussian tail oracle") {
  const HmmSpec spec = oracles::iid_gauss_spec(-5.0, 5.0);
  const Param theta0 = Eigen::VectorXd::Constant(1, 0.4);
  UniformBoxPrior prior(spec.space);
  const long n = 200;
  const double m_radius = 2.0;

  std::vector<double> diffs;
  for (int rep = 0; rep < 10; ++rep) {
    Rng rng = Rng::stream(15u, static_cast<std::uint64_t>(rep));
    const PathPair path = simulate_path(spec, theta0, n, rng);
    double ybar = 0.0;
    for (double y : path.observations) ybar += y;
    ybar /= static_cast<double>(n);

    McmcConfig config;
    config.iterations = 20000;
    const PosteriorRun run = rw_metropolis(spec, prior, path.observations, config,
                                           1000u + static_cast<std::uint64_t>(rep));
    const double radius = m_radius / std::sqrt(static_cast<double>(n));
    long outside = 0;
    for (Eigen::Index r = 0; r < run.samples.rows(); ++r)
      if (std::abs(run.samples(r, 0) - theta0[0]) > radius) ++outside;
    const double mc_mass =
        static_cast<double>(outside) / static_cast<double>(run.samples.rows());

    // posterior is exactly N(ybar, 1/n) on this wide box
    const double delta = std::sqrt(static_cast<double>(n)) * (ybar - theta0[0]);
    const double exact = normal_tail(m_radius - delta) + normal_tail(m_radius + delta);
    diffs.push_back(mc_mass - exact);
  }
  const double bias = mean(diffs);
  const double se = standard_error(diffs);
  CHECK(std::abs(bias) < 3.0 * se + 0.01);
}

TEST_CASE("score and fisher information for the iid gaussian model") {
  const HmmSpec spec = oracles::iid_gauss_spec(-5.0, 5.0);
  const Param theta0 = Eigen::VectorXd::Constant(1, 0.5);
  const PathPair path = simulate_path(spec, theta0, 500, 201u);

  double analytic = 0.0, ybar = 0.0;
  for (double y : path.observations) analytic += y - theta0[0];
  ybar = analytic / 500.0 + theta0[0];

  const Eigen::VectorXd score = fd_score(spec, theta0, path.observations);
  CHECK(std::abs(score[0] - analytic) < 1e-5);

  // score at the maximum-likelihood point is numerically zero
  const Eigen::VectorXd score_mle =
      fd_score(spec, Eigen::VectorXd::Constant(1, ybar), path.observations);
  CHECK(std::abs(score_mle[0]) < 1e-5);

  const Eigen::MatrixXd hess = fd_hessian(spec, theta0, path.observations);
  CHECK(std::abs(-hess(0, 0) / 500.0 - 1.0) < 1e-6);

  const FisherPair pair = fisher_pair(spec, theta0, 500, 200, 203u);
  CHECK(std::abs(pair.neg_hessian(0, 0) - 1.0) < 1e-6);
  CHECK(std::abs(pair.score_cov(0, 0) - 1.0) < 3.0 * std::sqrt(2.0 / 200.0));
  CHECK(pair.min_eigenvalue > 0.0);
}

TEST_CASE("fisher estimates are symmetric PD and the delta identity holds") {
  const HmmSpec spec = oracles::gauss2_spec();
  const Param theta0 = Eigen::Vector2d(-0.5, 0.5);
  const FisherPair pair = fisher_pair(spec, theta0, 800, 120, 301u);
  CHECK((pair.neg_hessian - pair.neg_hessian.transpose()).norm() < 1e-10);
  CHECK((pair.score_cov - pair.score_cov.transpose()).norm() < 1e-10);
  CHECK(pair.min_eigenvalue > 0.0);
  CHECK(pair.rel_frobenius_gap < 0.5);

  const PathPair path = simulate_path(spec, theta0, 800, 303u);
  const BvmDiagnostic diag = bvm_diagnostic(spec, theta0, path.observations, pair);
  const Eigen::VectorXd lhs =
      pair.neg_hessian * diag.delta_n0 * std::sqrt(800.0);
  CHECK((lhs - diag.score).norm() < 1e-8 * std::max(1.0, diag.score.norm()));
}

TEST_CASE("margin guard rejects finite differences near the boundary") {
  const HmmSpec spec = oracles::iid_gauss_spec(-1.0, 1.0);
  const std::vector<double> y{0.0, 0.1};
  CHECK_THROWS_AS(fd_score(spec, Eigen::VectorXd::Constant(1, 0.999999), y),
                  std::domain_error);
}

TEST_CASE("lan remainder vanishes for h = 0 and for the iid gaussian family") {
  const HmmSpec iid = oracles::iid_gauss_spec(-5.0, 5.0);
  const Param mu0 = Eigen::VectorXd::Constant(1, 0.5);
  const Eigen::MatrixXd fisher = Eigen::MatrixXd::Constant(1, 1, 1.0);

  std::vector<Eigen::VectorXd> h_grid{Eigen::VectorXd::Zero(1),
                                      Eigen::VectorXd::Constant(1, 1.0),
                                      Eigen::VectorXd::Constant(1, -2.0)};
  const std::vector<long> n_grid{200, 1000};
  const LanReport report = lan_remainder(iid, mu0, n_grid, h_grid, 40, fisher, 7u);
  for (const auto& cell : report.cells) {
    REQUIRE(!cell.trimmed);
    // quadratic log-likelihood: the expansion is exact for every h and n
    CHECK(cell.mean_abs_remainder < 1e-6);
  }
}

TEST_CASE("lan grid points leaving the box are trimmed") {
  const HmmSpec spec = oracles::gauss2_spec(0.25, 1.0);
  const Param theta0 = Eigen::Vector2d(-0.5, 0.5);
  const FisherPair pair = fisher_pair(spec, theta0, 400, 60, 401u);
  std::vector<Eigen::VectorXd> h_grid{Eigen::Vector2d(40.0, 0.0)};
  const std::vector<long> n_grid{100};
  const LanReport report =
      lan_remainder(spec, theta0, n_grid, h_grid, 10, pair.neg_hessian, 9u);
  REQUIRE(report.cells.size() == 1);
  CHECK(report.cells[0].trimmed);
}

TEST_CASE("tv estimator is consistent against exact normal samples") {
  // exact draws from N(delta, I^{-1}); the estimate should sit at the
  // binning noise floor
  Rng rng(501u);
  const long n = 400;
  const double root_n = std::sqrt(static_cast<double>(n));
  const double delta = 0.7;
  PosteriorRun run;
  run.samples.resize(20000, 1);
  for (Eigen::Index r = 0; r < run.samples.rows(); ++r)
    run.samples(r, 0) = 0.2 + (delta + rng.normal()) / root_n;
  const Eigen::VectorXd delta_v = Eigen::VectorXd::Constant(1, delta);
  const Eigen::MatrixXd fisher = Eigen::MatrixXd::Constant(1, 1, 1.0);
  const double tv = bvm_tv_distance(run, delta_v, fisher,
                                    Eigen::VectorXd::Constant(1, 0.2), n);
  CHECK(tv < 0.03);
}

TEST_CASE("tv estimator recovers the closed-form shifted-normal distance") {
  // TV(N(0,1), N(3,1)) = 2 Phi(1.5) - 1
  Rng rng(503u);
  const long n = 100;
  const double root_n = 10.0;
  PosteriorRun run;
  run.samples.resize(20000, 1);
  for (Eigen::Index r = 0; r < run.samples.rows(); ++r)
    run.samples(r, 0) = (3.0 + rng.normal()) / root_n;
  const double expected = 2.0 * normal_cdf(1.5) - 1.0;
  const double tv =
      bvm_tv_distance(run, Eigen::VectorXd::Zero(1),
                      Eigen::MatrixXd::Constant(1, 1, 1.0),
                      Eigen::VectorXd::Zero(1), n);
  CHECK(std::abs(tv - expected) < 0.04);
}

TEST_CASE("tv between two sample sets from one law sits at the noise floor") {
  Rng rng(505u);
  std::vector<double> a(10000), b(10000);
  for (auto& v : a) v = rng.normal();
  for (auto& v : b) v = rng.normal();
  CHECK(tv_between_samples(a, b) < 0.03);
}

TEST_CASE("tv estimator dimension guard") {
  PosteriorRun run;
  run.samples = Eigen::MatrixXd::Zero(10000, 3);
  const Eigen::VectorXd delta = Eigen::VectorXd::Zero(3);
  const Eigen::MatrixXd fisher = Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(
      bvm_tv_distance(run, delta, fisher, Eigen::VectorXd::Zero(3), 100),
      std::runtime_error);
  TvOptions options;
  options.allow_projection = true;
  CHECK_NOTHROW(
      bvm_tv_distance(run, delta, fisher, Eigen::VectorXd::Zero(3), 100, options));
}

TEST_CASE("tv estimator requires enough retained draws") {
  PosteriorRun run;
  run.samples = Eigen::MatrixXd::Zero(100, 1);
  CHECK_THROWS_AS(bvm_tv_distance(run, Eigen::VectorXd::Zero(1),
                                  Eigen::MatrixXd::Identity(1, 1),
                                  Eigen::VectorXd::Zero(1), 100),
                  std::invalid_argument);
}
