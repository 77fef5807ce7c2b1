#include <doctest.h>

#include <cmath>

#include "hmmlab/stats.hpp"
#include "hmmlab/testing.hpp"
#include "oracle_helpers.hpp"

using namespace hmmlab;

TEST_CASE("divergence of a parameter against itself is exactly zero") {
  const HmmSpec spec = oracles::gauss2_spec();
  const Param theta = Eigen::Vector2d(-0.5, 0.5);
  const DivergenceEstimate est = estimate_divergence(spec, theta, theta, 100, 10, 1u);
  CHECK(est.h_n == 0.0);
  CHECK(est.se == 0.0);
  CHECK(est.j_limit == 0.0);
}

TEST_CASE("iid gaussian divergence matches the KL closed form") {
  const HmmSpec spec = oracles::iid_gauss_spec();
  const Param a = Eigen::VectorXd::Constant(1, 0.4);
  const Param b = Eigen::VectorXd::Constant(1, -0.2);
  const DivergenceEstimate est = estimate_divergence(spec, a, b, 400, 400, 3u);
  const double kl = 0.5 * (a[0] - b[0]) * (a[0] - b[0]);
  CHECK(std::abs(est.h_n - kl) < 3.0 * est.se + 1e-12);
  CHECK(est.j_limit == est.h_n);
}

TEST_CASE("divergence is nonnegative up to noise over random pairs") {
  const HmmSpec spec = oracles::iid_gauss_spec(-1.0, 1.0);
  Rng rng(5u);
  for (int rep = 0; rep < 100; ++rep) {
    const Param a = Eigen::VectorXd::Constant(1, rng.uniform(-1.0, 1.0));
    Param b = Eigen::VectorXd::Constant(1, rng.uniform(-1.0, 1.0));
    if (a == b) b[0] += 0.05;
    const auto [h, se] = divergence_at(spec, a, b, 100, 100, rng.next_u64());
    CHECK(h >= -3.0 * se);
  }
}

TEST_CASE("kappa envelope on a wide box fails the A7 window") {
  // closed-form iid J gives ratios |mu_a - mu_b| / 2, so gaps spanning
  // [0.1, 2] put kappa2 / kappa1 around 20
  const HmmSpec spec = oracles::iid_gauss_spec(-1.5, 1.5);
  std::vector<std::pair<Param, Param>> pairs;
  for (double gap : {0.1, 0.3, 0.6, 1.0, 1.5, 2.0})
    pairs.emplace_back(Eigen::VectorXd::Constant(1, -gap / 2.0),
                       Eigen::VectorXd::Constant(1, gap / 2.0));
  const KappaBounds bounds = fit_kappa(spec, Eigen::VectorXd::Zero(1), pairs, 400,
                                       512, 7u);
  CHECK_FALSE(bounds.valid);
  CHECK(bounds.kappa2 > 2.0 * bounds.kappa1);
  CHECK(bounds.kappa1 == doctest::Approx(0.05).epsilon(0.25));
  CHECK(bounds.kappa2 == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("kappa envelope on a thin shell satisfies the A7 window") {
  const HmmSpec spec = oracles::iid_gauss_spec(-1.5, 1.5);
  std::vector<std::pair<Param, Param>> pairs;
  for (double gap : {0.90, 0.95, 1.00, 1.05, 1.10})
    pairs.emplace_back(Eigen::VectorXd::Constant(1, -gap / 2.0),
                       Eigen::VectorXd::Constant(1, gap / 2.0));
  const KappaBounds bounds = fit_kappa(spec, Eigen::VectorXd::Zero(1), pairs, 400,
                                       512, 11u);
  CHECK(bounds.valid);
}

TEST_CASE("a single pair collapses the kappa envelope") {
  const HmmSpec spec = oracles::iid_gauss_spec(-1.5, 1.5);
  std::vector<std::pair<Param, Param>> pairs{
      {Eigen::VectorXd::Constant(1, -0.5), Eigen::VectorXd::Constant(1, 0.5)}};
  const KappaBounds bounds =
      fit_kappa(spec, Eigen::VectorXd::Zero(1), pairs, 200, 64, 13u);
  CHECK(bounds.kappa1 == bounds.kappa2);
}

TEST_CASE("decision thresholds are inclusive") {
  const HmmSpec spec = oracles::iid_gauss_spec();
  const Param theta0 = Eigen::VectorXd::Constant(1, 0.3);
  const Param theta1 = Eigen::VectorXd::Constant(1, -0.3);
  const std::vector<double> y{0.8};
  const double statistic = loglik_ratio(spec, theta0, theta1, y).value;

  TestFunction test;
  test.kind = TestKind::simple;
  test.theta0 = theta0;
  test.members.push_back({theta1, statistic, 0, 1.0});  // n = 1: threshold == statistic
  CHECK(test.decide(spec, y));  // boundary case rejects

  test.members[0].critical_value = statistic - 1e-9;
  CHECK_FALSE(test.decide(spec, y));
  test.members[0].critical_value = statistic + 1e-9;
  CHECK(test.decide(spec, y));
}

TEST_CASE("simple test validates its critical range") {
  const HmmSpec spec = oracles::iid_gauss_spec();
  const Param theta0 = Eigen::VectorXd::Constant(1, 0.3);
  const Param theta1 = Eigen::VectorXd::Constant(1, -0.3);
  const double j_hat = 0.18;
  CHECK_THROWS_AS(build_simple_test(spec, theta0, theta1, j_hat, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_simple_test(spec, theta0, theta1, j_hat, j_hat / 4.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_simple_test(spec, theta0, theta0, j_hat, j_hat / 8.0),
                  std::invalid_argument);
  const TestFunction test = build_simple_test(spec, theta0, theta1, j_hat);
  CHECK(test.members.front().critical_value == doctest::Approx(j_hat / 8.0));
}

TEST_CASE("simple-test Type I stays under the sub-gaussian bound") {
  const HmmSpec spec = oracles::iid_gauss_spec();
  const Param theta0 = Eigen::VectorXd::Constant(1, 0.25);
  const Param theta1 = Eigen::VectorXd::Constant(1, -0.25);
  const double j = 0.125;  // (mu0 - mu1)^2 / 2
  const TestFunction test = build_simple_test(spec, theta0, theta1, j);

  const long n = 400, reps = 1000;
  long rejects = 0;
  for (long r = 0; r < reps; ++r) {
    Rng rng = Rng::stream(17u, static_cast<std::uint64_t>(r));
    const PathPair path = simulate_path(spec, theta0, n, rng);
    rejects += test.decide(spec, path.observations) ? 1 : 0;
  }
  const double type1 = static_cast<double>(rejects) / static_cast<double>(reps);
  const ConstantsBundle bundle =
      constants_bundle(spec, theta0, T1Branch::continuous, 4, {});
  const double margin = test.members[0].critical_value - j;
  const double bound =
      std::exp(-static_cast<double>(n) * margin * margin / bundle.c_tilde);
  CHECK(type1 <= bound + 3.0 * binomial_se(type1, static_cast<std::size_t>(reps)));
}

TEST_CASE("ball test validates geometry and critical range") {
  const HmmSpec spec = oracles::gauss2_spec();
  const Param theta0 = Eigen::Vector2d(-0.5, 0.5);
  const double eps = 0.2;
  const Param good = Eigen::Vector2d(-0.2, 0.5);       // gap 0.3 in (eps, 2 eps)
  const Param too_close = Eigen::Vector2d(-0.4, 0.5);  // gap 0.1
  const Param too_far = Eigen::Vector2d(0.0, 0.5);     // gap 0.5
  const double j_hat = 0.02;
  CHECK_NOTHROW(build_ball_test(spec, theta0, good, eps, j_hat));
  CHECK_THROWS_AS(build_ball_test(spec, theta0, too_close, eps, j_hat),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_ball_test(spec, theta0, too_far, eps, j_hat),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_ball_test(spec, theta0, good, eps, j_hat, j_hat / 8.0),
                  std::invalid_argument);
  const TestFunction test = build_ball_test(spec, theta0, good, eps, j_hat);
  CHECK(test.members.front().critical_value == doctest::Approx(3.0 * j_hat / 8.0));
}

TEST_CASE("ball-test Type II near the edge stays under the step-2 bound") {
  const HmmSpec spec = oracles::iid_gauss_spec();
  const Param theta0 = Eigen::VectorXd::Constant(1, 0.0);
  const double eps = 0.4;
  const Param center = Eigen::VectorXd::Constant(1, 0.6);
  const double j_center = 0.18;  // closed-form J(theta0 | center)
  const TestFunction test = build_ball_test(spec, theta0, center, eps, j_center);

  const Param edge = Eigen::VectorXd::Constant(1, 0.5);  // inside the U ball
  const long n = 400, reps = 1000;
  long accepts = 0;
  for (long r = 0; r < reps; ++r) {
    Rng rng = Rng::stream(19u, static_cast<std::uint64_t>(r));
    const PathPair path = simulate_path(spec, edge, n, rng);
    accepts += test.decide(spec, path.observations) ? 0 : 1;
  }
  const double type2 = static_cast<double>(accepts) / static_cast<double>(reps);

  const ConstantsBundle bundle =
      constants_bundle(spec, theta0, T1Branch::continuous, 4, {});
  // er:b:2 margin with closed-form iid divergences
  const double h_edge_0 = 0.5 * edge[0] * edge[0];
  const double h_edge_c = 0.5 * (edge[0] - center[0]) * (edge[0] - center[0]);
  const double margin = test.members[0].critical_value + h_edge_0 - h_edge_c;
  REQUIRE(margin > 0.0);
  const double bound = 2.0 * std::exp(-static_cast<double>(n) * margin * margin /
                                      (4.0 * bundle.c_tilde));
  CHECK(type2 <= bound + 3.0 * binomial_se(type2, static_cast<std::size_t>(reps)));
}

TEST_CASE("1-D annulus covering is four intervals") {
  const ParamSpace space(Eigen::VectorXd::Constant(1, -10.0),
                         Eigen::VectorXd::Constant(1, 10.0));
  const CoveringReport report =
      cover_annulus(Eigen::VectorXd::Zero(1), 1.0, 1, 0.25, space);
  CHECK(report.centers.size() == 4);
  CHECK(report.bound == 48);
  CHECK(report.max_gap <= 0.25 + 1e-12);
}

TEST_CASE("annulus outside the box yields an empty covering") {
  const ParamSpace space(Eigen::VectorXd::Constant(1, -1.0),
                         Eigen::VectorXd::Constant(1, 1.0));
  const CoveringReport report =
      cover_annulus(Eigen::VectorXd::Zero(1), 1.0, 3, 0.25, space);
  CHECK(report.centers.empty());
  CHECK(report.grid_points == 0);
}

TEST_CASE("2-D covering respects the entropy bound with certificate") {
  const ParamSpace space(Eigen::Vector2d(-3.0, -3.0), Eigen::Vector2d(3.0, 3.0));
  for (int j : {1, 2}) {
    const CoveringReport report =
        cover_annulus(Eigen::Vector2d(0.3, -0.2), 0.4, j, 0.25, space);
    CHECK(report.bound == 2304);
    CHECK(static_cast<long>(report.centers.size()) <= report.bound);
    CHECK(report.centers.size() > 0);
    const double radius = 0.25 * j * 0.4;
    CHECK(report.max_gap <= radius * (1.0 + 1e-9));
  }
}

TEST_CASE("composite decision is the supremum of its members") {
  const HmmSpec spec = oracles::iid_gauss_spec();
  const Param theta0 = Eigen::VectorXd::Constant(1, 0.0);
  const std::vector<double> y{0.2, -0.4, 1.0};

  TestFunction composite;
  composite.kind = TestKind::composite;
  composite.theta0 = theta0;
  // critical value -1e9 never rejects, +1e9 always rejects
  composite.members.push_back({Eigen::VectorXd::Constant(1, 0.5), -1e9, 1, 1.0});
  composite.members.push_back({Eigen::VectorXd::Constant(1, -0.5), -1e9, 1, 1.0});
  CHECK_FALSE(composite.decide(spec, y));
  CHECK_FALSE(composite.decide_near(spec, y, theta0));

  composite.members.push_back({Eigen::VectorXd::Constant(1, 0.7), 1e9, 2, 1.0});
  CHECK(composite.decide(spec, y));
  CHECK(composite.decide_near(spec, y, theta0));
}

TEST_CASE("composite construction covers every annulus inside the box") {
  const HmmSpec spec = oracles::gauss2_ident_spec();
  const Param theta0 = Eigen::Vector2d(-0.5, 0.5);
  CompositeOptions options;
  options.m_start = 2;
  options.divergence_n = 100;
  options.divergence_replicates = 32;
  const TestFunction composite =
      build_composite_test(spec, theta0, 0.15, options, 23u);
  REQUIRE(!composite.members.empty());
  int max_j = 0;
  for (const auto& m : composite.members) {
    CHECK(m.annulus_j >= 2);
    CHECK(m.critical_value == doctest::Approx(3.0 * m.j_hat / 8.0));
    const double gap = (m.center - theta0).norm();
    CHECK(gap > m.annulus_j * 0.15);
    CHECK(gap < 2.0 * m.annulus_j * 0.15);
    max_j = std::max(max_j, m.annulus_j);
  }
  CHECK(max_j >= 3);  // the box diameter admits several annuli
}

TEST_CASE("testing-condition rows mark vacuous annuli as skipped") {
  const HmmSpec spec = oracles::iid_gauss_spec(-1.0, 1.0);
  const Param theta0 = Eigen::VectorXd::Constant(1, 0.0);
  const ConstantsBundle bundle =
      constants_bundle(spec, theta0, T1Branch::continuous, 4, {});
  TestingConditionOptions options;
  options.n_grid = {100};
  options.j_grid = {1, 50};  // j = 50 pushes the annulus outside the box
  options.replicates = 60;
  options.type1_replicates = 40;
  options.alternative_panel = 2;
  options.composite.m_start = 1;
  options.composite.divergence_n = 100;
  options.composite.divergence_replicates = 24;
  const ErrorRateReport report =
      verify_testing_condition(spec, theta0, 0.12, options, bundle, 29u);
  REQUIRE(report.rows.size() == 2);
  CHECK_FALSE(report.rows[0].skipped);
  CHECK(report.rows[0].type2 >= 0.0);
  CHECK(report.rows[0].type2 <= 1.0);
  CHECK(report.rows[1].skipped);
}

TEST_CASE("testing-condition harness rejects vanishing n eps^2") {
  const HmmSpec spec = oracles::iid_gauss_spec(-1.0, 1.0);
  const ConstantsBundle bundle;
  TestingConditionOptions options;
  options.n_grid = {10};  // n eps^2 far below 1
  options.j_grid = {1};
  CHECK_THROWS_AS(verify_testing_condition(spec, Eigen::VectorXd::Zero(1), 0.05,
                                           options, bundle, 1u),
                  std::invalid_argument);
}
