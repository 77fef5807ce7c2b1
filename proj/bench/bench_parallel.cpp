// Times the OpenMP replicate kernels against the serial reference path and
// checks that both produce identical numbers.

#include <chrono>
#include <cstdio>
#include <cstring>

#include "hmmlab/concentration.hpp"
#include "hmmlab/filter.hpp"
#include "hmmlab/testing.hpp"

using namespace hmmlab;
using clock_type = std::chrono::high_resolution_clock;

namespace {

HmmSpec gauss2_spec() {
  ModelConfig config;
  config.family = "gaussian_mean";
  config.states = 2;
  config.sigma = 1.0;
  config.box_lower = Eigen::Vector2d(-2.0, -2.0);
  config.box_upper = Eigen::Vector2d(2.0, 2.0);
  config.transition.resize(2, 2);
  config.transition << 0.75, 0.25, 0.25, 0.75;
  return make_spec(config);
}

template <class F>
double time_ms(F&& fn) {
  const auto t0 = clock_type::now();
  fn();
  const auto t1 = clock_type::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  long replicates = 4000;
  long n = 500;
  if (argc > 1) replicates = std::atol(argv[1]);
  if (argc > 2) n = std::atol(argv[2]);

  const HmmSpec spec = gauss2_spec();
  const Param theta0 = Eigen::Vector2d(-1.0, 1.0);
  const Param theta1 = Eigen::Vector2d(-0.8, 1.1);

  ConstantsBundle bundle;
  bundle.c_e = 100.0;  // timing only; constants do not affect the kernel cost

  LipschitzFunctional functional{
      [&](std::span<const double> y) {
        return loglik_ratio(spec, theta0, theta1, y).value;
      },
      2.0};

  const std::vector<double> radii{5.0, 10.0, 20.0, 40.0};

  TailCheck serial_check, parallel_check;
  const double t_serial = time_ms([&] {
    serial_check = tail_check(spec, theta0, functional, bundle, n, replicates, radii,
                              42, Exec::serial());
  });
  const double t_parallel = time_ms([&] {
    parallel_check = tail_check(spec, theta0, functional, bundle, n, replicates,
                                radii, 42, Exec::parallel());
  });

  bool identical = serial_check.functional_mean == parallel_check.functional_mean &&
                   serial_check.functional_sd == parallel_check.functional_sd;
  for (std::size_t i = 0; i < radii.size(); ++i)
    identical = identical && serial_check.empirical_freq[i] ==
                                 parallel_check.empirical_freq[i];

  std::printf("tail_check kernel, %ld replicates of n=%ld paths\n", replicates, n);
  std::printf("  serial reference: %8.1f ms\n", t_serial);
  std::printf("  openmp          : %8.1f ms  (speedup %.2fx)\n", t_parallel,
              t_serial / t_parallel);
  std::printf("  results identical: %s\n", identical ? "yes" : "NO");

  std::pair<double, double> serial_div, parallel_div;
  const double d_serial = time_ms([&] {
    serial_div = divergence_at(spec, theta0, theta1, n, replicates / 4, 43,
                               Exec::serial());
  });
  const double d_parallel = time_ms([&] {
    parallel_div = divergence_at(spec, theta0, theta1, n, replicates / 4, 43,
                                 Exec::parallel());
  });
  const bool div_identical = serial_div == parallel_div;

  std::printf("divergence kernel, %ld replicates of n=%ld paths\n", replicates / 4, n);
  std::printf("  serial reference: %8.1f ms\n", d_serial);
  std::printf("  openmp          : %8.1f ms  (speedup %.2fx)\n", d_parallel,
              d_serial / d_parallel);
  std::printf("  results identical: %s\n", div_identical ? "yes" : "NO");

  return identical && div_identical ? 0 : 1;
}
