#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hmmlab/concentration.hpp"
#include "hmmlab/model.hpp"
#include "hmmlab/parallel.hpp"

namespace hmmlab {

// Monte Carlo estimate of H_n(a|b) = E_a [l_n(a) - l_n(b)] / n on a doubling
// ladder of horizons; j_limit is the value at the largest rung and
// ladder_increment the last rung-to-rung change.
struct DivergenceEstimate {
  Param theta_a;
  Param theta_b;
  long n = 0;
  double h_n = 0.0;
  double se = 0.0;
  double j_limit = 0.0;
  double ladder_increment = 0.0;
};

// single-horizon mean and s.e. of the normalized log-likelihood ratio
std::pair<double, double> divergence_at(const HmmSpec& spec, const Param& theta_a,
                                        const Param& theta_b, long n,
                                        long replicates, std::uint64_t seed,
                                        const Exec& exec = {});

DivergenceEstimate estimate_divergence(const HmmSpec& spec, const Param& theta_a,
                                       const Param& theta_b, long n,
                                       long replicates, std::uint64_t seed,
                                       const Exec& exec = {});

struct KappaBounds {
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  bool valid = false;  // kappa2 <= 2 kappa1
  std::vector<double> ratios;
};

KappaBounds fit_kappa(const HmmSpec& spec, const Param& theta0,
                      std::span<const std::pair<Param, Param>> pair_sample,
                      long n_large, long replicates, std::uint64_t seed,
                      const Exec& exec = {});

enum class TestKind { simple, ball, composite };

// Likelihood-ratio test against one alternative center: reject when
// l_n(theta0) - l_n(center) <= n r (the comparison is inclusive).
struct BallMember {
  Param center;
  double critical_value = 0.0;
  int annulus_j = 0;
  double j_hat = 0.0;  // divergence estimate used to place the critical value
};

struct TestFunction {
  TestKind kind = TestKind::simple;
  Param theta0;
  std::vector<BallMember> members;

  bool decide(const HmmSpec& spec, std::span<const double> y) const;
  // lazy variant scanning members nearest to a hint parameter first
  bool decide_near(const HmmSpec& spec, std::span<const double> y,
                   const Param& hint) const;
};

TestFunction build_simple_test(const HmmSpec& spec, const Param& theta0,
                               const Param& theta1, double j_hat, double r_choice);
// default critical value: midpoint of the mandated interval (0, J/4)
TestFunction build_simple_test(const HmmSpec& spec, const Param& theta0,
                               const Param& theta1, double j_hat);

TestFunction build_ball_test(const HmmSpec& spec, const Param& theta0,
                             const Param& ball_center, double eps, double j_hat,
                             std::optional<double> r_choice = std::nullopt);

struct CoveringReport {
  double xi = 0.0;
  int j = 0;
  double eps = 0.0;
  std::vector<Param> centers;
  long bound = 0;     // (12/xi)^d
  double max_gap = 0.0;
  long grid_points = 0;
};

// Greedy covering of the annulus {j eps < |theta - theta0| <= 2 j eps}
// intersected with the box, by balls of radius xi j eps. Centers lie on a
// verification grid of spacing xi j eps / 10; every grid point ends up
// within xi j eps of a center and N must respect the entropy bound.
CoveringReport cover_annulus(const Param& theta0, double eps, int j, double xi,
                             const ParamSpace& space);

struct CompositeOptions {
  int m_start = 1;          // smallest annulus index
  int j_max = 0;            // 0 = grow until the annulus leaves the box
  double xi = 0.25;
  long divergence_n = 200;  // MC horizon for member J estimates
  long divergence_replicates = 64;
};

TestFunction build_composite_test(const HmmSpec& spec, const Param& theta0,
                                  double eps, const CompositeOptions& options,
                                  std::uint64_t seed, const Exec& exec = {});

struct ErrorRateRow {
  long n = 0;
  int j = 0;
  double type1 = 0.0;
  double type1_se = 0.0;
  double bound1 = 0.0;
  double type2 = 0.0;     // worst over the alternative panel
  double type2_se = 0.0;
  double bound2 = 0.0;
  bool skipped = false;   // annulus empty inside the box
  long member_count = 0;
};

struct ErrorRateReport {
  std::vector<ErrorRateRow> rows;
  long replicates = 0;
  long type1_replicates = 0;
  double slope_log_type2 = 0.0;  // OLS slope of log type2 against n eps^2 j^2
};

struct TestingConditionOptions {
  std::vector<long> n_grid;
  std::vector<int> j_grid;
  long replicates = 500;        // per (n, j) for Type II
  long type1_replicates = 200;  // per (n, j) for Type I; 0 disables
  int alternative_panel = 4;    // fixed alternatives drawn per annulus
  CompositeOptions composite;
};

ErrorRateReport verify_testing_condition(const HmmSpec& spec, const Param& theta0,
                                         double eps,
                                         const TestingConditionOptions& options,
                                         const ConstantsBundle& bundle,
                                         std::uint64_t seed, const Exec& exec = {});

}  // namespace hmmlab
