#include "hmmlab/testing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hmmlab/stats.hpp"

namespace hmmlab {

std::pair<double, double> divergence_at(const HmmSpec& spec, const Param& theta_a,
                                        const Param& theta_b, long n,
                                        long replicates, std::uint64_t seed,
                                        const Exec& exec) {
  spec.require_in_space(theta_a);
  spec.require_in_space(theta_b);
  std::vector<double> values(static_cast<std::size_t>(replicates));
  parallel_for(static_cast<std::size_t>(replicates), exec, [&](std::size_t i) {
    Rng rng = Rng::stream(seed, i);
    const PathPair path = simulate_path(spec, theta_a, n, rng);
    values[i] = (loglik(spec, theta_a, path.observations) -
                 loglik(spec, theta_b, path.observations)) /
                static_cast<double>(n);
  });
  return {mean(values), standard_error(values)};
}

DivergenceEstimate estimate_divergence(const HmmSpec& spec, const Param& theta_a,
                                       const Param& theta_b, long n,
                                       long replicates, std::uint64_t seed,
                                       const Exec& exec) {
  DivergenceEstimate est;
  est.theta_a = theta_a;
  est.theta_b = theta_b;
  est.n = n;
  if (theta_a == theta_b) return est;  // H_n(theta|theta) = 0 identically

  std::vector<long> ladder;
  for (long rung = std::max<long>(1, n / 4); rung < n; rung *= 2) ladder.push_back(rung);
  ladder.push_back(n);

  double prev = 0.0;
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    const auto [h, se] =
        divergence_at(spec, theta_a, theta_b, ladder[k], replicates,
                      seed + 0x9E37ULL * (k + 1), exec);
    if (k + 1 == ladder.size()) {
      est.h_n = h;
      est.se = se;
      est.j_limit = h;
      est.ladder_increment = ladder.size() > 1 ? h - prev : 0.0;
    }
    prev = h;
  }
  return est;
}

KappaBounds fit_kappa(const HmmSpec& spec, const Param& theta0,
                      std::span<const std::pair<Param, Param>> pair_sample,
                      long n_large, long replicates, std::uint64_t seed,
                      const Exec& exec) {
  if (pair_sample.empty()) throw std::invalid_argument("fit_kappa: empty pair sample");
  spec.require_in_space(theta0);

  KappaBounds bounds;
  bounds.kappa1 = std::numeric_limits<double>::infinity();
  bounds.kappa2 = 0.0;
  std::uint64_t pair_id = 0;
  for (const auto& [a, b] : pair_sample) {
    ++pair_id;
    const double gap = (a - b).norm();
    if (gap <= 0.0)
      throw std::invalid_argument("fit_kappa: pair with zero parameter distance");
    const auto [j_hat, se] =
        divergence_at(spec, a, b, n_large, replicates, seed + 0x517cc1ULL * pair_id, exec);
    if (j_hat <= 0.0 && j_hat < -3.0 * se)
      throw std::runtime_error("identifiability failure: divergence <= 0 beyond noise");
    const double ratio = j_hat / gap;
    bounds.ratios.push_back(ratio);
    bounds.kappa1 = std::min(bounds.kappa1, ratio);
    bounds.kappa2 = std::max(bounds.kappa2, ratio);
  }
  bounds.valid = bounds.kappa1 > 0.0 && bounds.kappa2 <= 2.0 * bounds.kappa1;
  return bounds;
}

bool TestFunction::decide(const HmmSpec& spec, std::span<const double> y) const {
  const double l0 = loglik(spec, theta0, y);
  const double n = static_cast<double>(y.size());
  for (const auto& member : members) {
    const double lm = loglik(spec, member.center, y);
    if (l0 - lm <= n * member.critical_value) return true;
  }
  return false;
}

bool TestFunction::decide_near(const HmmSpec& spec, std::span<const double> y,
                               const Param& hint) const {
  const double l0 = loglik(spec, theta0, y);
  const double n = static_cast<double>(y.size());
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return (members[a].center - hint).norm() < (members[b].center - hint).norm();
  });
  for (std::size_t idx : order) {
    const auto& member = members[idx];
    const double lm = loglik(spec, member.center, y);
    if (l0 - lm <= n * member.critical_value) return true;
  }
  return false;
}

TestFunction build_simple_test(const HmmSpec& spec, const Param& theta0,
                               const Param& theta1, double j_hat, double r_choice) {
  spec.require_in_space(theta0);
  spec.require_in_space(theta1);
  if (theta0 == theta1)
    throw std::invalid_argument("build_simple_test: alternatives must differ");
  if (!(r_choice > 0.0 && r_choice < j_hat / 4.0))
    throw std::invalid_argument("build_simple_test: critical value outside (0, J/4)");
  TestFunction test;
  test.kind = TestKind::simple;
  test.theta0 = theta0;
  test.members.push_back({theta1, r_choice, 0, j_hat});
  return test;
}

TestFunction build_simple_test(const HmmSpec& spec, const Param& theta0,
                               const Param& theta1, double j_hat) {
  return build_simple_test(spec, theta0, theta1, j_hat, j_hat / 8.0);
}

TestFunction build_ball_test(const HmmSpec& spec, const Param& theta0,
                             const Param& ball_center, double eps, double j_hat,
                             std::optional<double> r_choice) {
  spec.require_in_space(theta0);
  spec.require_in_space(ball_center);
  const double gap = (ball_center - theta0).norm();
  if (!(gap > eps && gap < 2.0 * eps))
    throw std::invalid_argument(
        "build_ball_test: center must satisfy eps < |theta_U - theta0| < 2 eps");
  const double r = r_choice.value_or(3.0 * j_hat / 8.0);
  if (!(r > j_hat / 4.0 && r < j_hat / 2.0))
    throw std::invalid_argument("build_ball_test: critical value outside (J/4, J/2)");
  TestFunction test;
  test.kind = TestKind::ball;
  test.theta0 = theta0;
  test.members.push_back({ball_center, r, 0, j_hat});
  return test;
}

namespace {

struct AnnulusGrid {
  std::vector<Param> points;       // annulus & box lattice points
  std::vector<bool> center_ok;     // strictly inside the open annulus
};

AnnulusGrid annulus_grid(const Param& theta0, double r_in, double r_out,
                         double spacing, const ParamSpace& space) {
  const int d = static_cast<int>(theta0.size());
  std::vector<long> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
  double cells = 1.0;
  for (int i = 0; i < d; ++i) {
    lo[static_cast<std::size_t>(i)] = static_cast<long>(
        std::ceil((std::max(space.lower[i], theta0[i] - r_out) - theta0[i]) / spacing));
    hi[static_cast<std::size_t>(i)] = static_cast<long>(
        std::floor((std::min(space.upper[i], theta0[i] + r_out) - theta0[i]) / spacing));
    cells *= std::max(0.0, static_cast<double>(hi[static_cast<std::size_t>(i)] -
                                               lo[static_cast<std::size_t>(i)] + 1));
  }
  if (cells > 3e6)
    throw std::invalid_argument(
        "cover_annulus: verification grid too large for this dimension");

  AnnulusGrid grid;
  std::vector<long> idx(lo);
  if (cells < 1.0) return grid;
  while (true) {
    Param p(d);
    for (int i = 0; i < d; ++i)
      p[i] = theta0[i] + spacing * static_cast<double>(idx[static_cast<std::size_t>(i)]);
    if (space.contains(p)) {
      const double r = (p - theta0).norm();
      if (r > r_in && r <= r_out * (1.0 + 1e-12)) {
        grid.points.push_back(p);
        grid.center_ok.push_back(r < r_out * (1.0 - 1e-12));
      }
    }
    int pos = d - 1;
    while (pos >= 0 && idx[static_cast<std::size_t>(pos)] ==
                           hi[static_cast<std::size_t>(pos)]) {
      idx[static_cast<std::size_t>(pos)] = lo[static_cast<std::size_t>(pos)];
      --pos;
    }
    if (pos < 0) break;
    ++idx[static_cast<std::size_t>(pos)];
  }
  return grid;
}

}  // namespace

CoveringReport cover_annulus(const Param& theta0, double eps, int j, double xi,
                             const ParamSpace& space) {
  if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("cover_annulus: xi in (0,1)");
  if (j < 1) throw std::invalid_argument("cover_annulus: j >= 1");
  if (!(eps > 0.0)) throw std::invalid_argument("cover_annulus: eps > 0");

  const int d = static_cast<int>(theta0.size());
  const double r_in = static_cast<double>(j) * eps;
  const double r_out = 2.0 * r_in;
  const double radius = xi * r_in;
  const double spacing = radius / 10.0;

  CoveringReport report;
  report.xi = xi;
  report.j = j;
  report.eps = eps;
  report.bound = static_cast<long>(std::llround(std::pow(12.0 / xi, d)));

  AnnulusGrid grid = annulus_grid(theta0, r_in, r_out, spacing, space);
  report.grid_points = static_cast<long>(grid.points.size());
  if (grid.points.empty()) return report;

  const std::size_t count = grid.points.size();
  bool any_center = false;
  for (std::size_t i = 0; i < count; ++i) any_center = any_center || grid.center_ok[i];
  if (!any_center) grid.center_ok.assign(count, true);

  // bucket index over cells of side `radius` for neighbor queries
  Param lo = grid.points.front();
  for (const auto& p : grid.points) lo = lo.cwiseMin(p);
  const auto cell_key = [&](const Param& p) {
    long key = 0;
    for (int i = 0; i < d; ++i)
      key = key * 100003 + static_cast<long>(std::floor((p[i] - lo[i]) / radius));
    return key;
  };
  std::vector<std::pair<long, std::size_t>> buckets(count);
  for (std::size_t i = 0; i < count; ++i) buckets[i] = {cell_key(grid.points[i]), i};
  std::sort(buckets.begin(), buckets.end());
  const auto neighbors_of = [&](const Param& p, auto&& visit) {
    std::vector<long> offsets{0};
    for (int i = 0; i < d; ++i) {
      std::vector<long> next;
      for (long base : offsets)
        for (long step : {-1L, 0L, 1L}) next.push_back(base * 1 + step * [&] {
          long stride = 1;
          for (int k = i + 1; k < d; ++k) stride *= 100003;
          return stride;
        }());
      offsets = std::move(next);
    }
    const long key = cell_key(p);
    for (long off : offsets) {
      auto it = std::lower_bound(buckets.begin(), buckets.end(),
                                 std::make_pair(key + off, std::size_t{0}));
      for (; it != buckets.end() && it->first == key + off; ++it) visit(it->second);
    }
  };

  std::vector<bool> covered(count, false);
  std::size_t covered_count = 0;
  std::size_t scan = 0;
  while (covered_count < count) {
    while (scan < count && covered[scan]) ++scan;
    const Param& focus = grid.points[scan];

    // among candidate centers near the first uncovered point, take the one
    // covering the most uncovered grid points; first index breaks ties
    std::size_t best = count;
    long best_gain = -1;
    neighbors_of(focus, [&](std::size_t c) {
      if (!grid.center_ok[c]) return;
      if ((grid.points[c] - focus).norm() > radius * (1.0 + 1e-12)) return;
      long gain = 0;
      neighbors_of(grid.points[c], [&](std::size_t t) {
        if (!covered[t] &&
            (grid.points[t] - grid.points[c]).norm() <= radius * (1.0 + 1e-12))
          ++gain;
      });
      if (gain > best_gain || (gain == best_gain && c < best)) {
        best_gain = gain;
        best = c;
      }
    });
    if (best == count)
      throw std::runtime_error("cover_annulus: no admissible center near a grid point");

    report.centers.push_back(grid.points[best]);
    neighbors_of(grid.points[best], [&](std::size_t t) {
      if (!covered[t] &&
          (grid.points[t] - grid.points[best]).norm() <= radius * (1.0 + 1e-12)) {
        covered[t] = true;
        ++covered_count;
      }
    });
  }

  for (std::size_t t = 0; t < count; ++t) {
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& c : report.centers)
      nearest = std::min(nearest, (grid.points[t] - c).norm());
    report.max_gap = std::max(report.max_gap, nearest);
  }
  if (report.max_gap > radius * (1.0 + 1e-9))
    throw std::runtime_error("cover_annulus: covering certificate failed");
  if (static_cast<long>(report.centers.size()) > report.bound)
    throw std::runtime_error("cover_annulus: covering exceeded the entropy bound");
  return report;
}

TestFunction build_composite_test(const HmmSpec& spec, const Param& theta0,
                                  double eps, const CompositeOptions& options,
                                  std::uint64_t seed, const Exec& exec) {
  if (options.m_start < 1)
    throw std::invalid_argument("build_composite_test: M >= 1 required");
  spec.require_in_space(theta0);

  TestFunction composite;
  composite.kind = TestKind::composite;
  composite.theta0 = theta0;

  std::uint64_t member_id = 0;
  for (int j = options.m_start;; ++j) {
    if (options.j_max > 0 && j > options.j_max) break;
    const CoveringReport cover = cover_annulus(theta0, eps, j, options.xi, spec.space);
    if (cover.centers.empty()) break;  // annulus no longer meets the box
    for (const auto& center : cover.centers) {
      ++member_id;
      const auto [j_hat, se] =
          divergence_at(spec, theta0, center, options.divergence_n,
                        options.divergence_replicates,
                        detail::splitmix64(seed) + member_id, exec);
      if (j_hat <= 0.0)
        throw std::runtime_error(
            "identifiability failure: nonpositive divergence at covering center");
      composite.members.push_back({center, 3.0 * j_hat / 8.0, j, j_hat});
    }
  }
  return composite;
}

ErrorRateReport verify_testing_condition(const HmmSpec& spec, const Param& theta0,
                                         double eps,
                                         const TestingConditionOptions& options,
                                         const ConstantsBundle& bundle,
                                         std::uint64_t seed, const Exec& exec) {
  if (options.n_grid.empty() || options.j_grid.empty())
    throw std::invalid_argument("verify_testing_condition: empty grids");
  for (long n : options.n_grid)
    if (static_cast<double>(n) * eps * eps < 0.5)
      throw std::invalid_argument(
          "verify_testing_condition: n eps^2 must stay bounded below");

  const TestFunction composite =
      build_composite_test(spec, theta0, eps, options.composite, seed, exec);

  ErrorRateReport report;
  report.replicates = options.replicates;
  report.type1_replicates = options.type1_replicates;

  // fixed alternative panels per annulus, shared across the n grid
  std::vector<std::vector<Param>> panels(options.j_grid.size());
  for (std::size_t ji = 0; ji < options.j_grid.size(); ++ji) {
    const int j = options.j_grid[ji];
    const double r_in = static_cast<double>(j) * eps;
    Rng rng = Rng::stream(seed, 70000 + static_cast<std::uint64_t>(j));
    for (int a = 0; a < options.alternative_panel; ++a) {
      for (int attempt = 0; attempt < 20000; ++attempt) {
        Param candidate(spec.dim);
        for (int i = 0; i < spec.dim; ++i)
          candidate[i] = rng.uniform(std::max(spec.space.lower[i], theta0[i] - 2 * r_in),
                                     std::min(spec.space.upper[i], theta0[i] + 2 * r_in));
        const double r = (candidate - theta0).norm();
        if (r > r_in && r <= 2.0 * r_in && spec.space.contains(candidate)) {
          panels[ji].push_back(candidate);
          break;
        }
      }
    }
  }

  for (std::size_t ni = 0; ni < options.n_grid.size(); ++ni) {
    const long n = options.n_grid[ni];

    double type1 = 0.0, type1_se = 0.0;
    if (options.type1_replicates > 0 && !composite.members.empty()) {
      std::vector<double> rejects(static_cast<std::size_t>(options.type1_replicates));
      parallel_for(rejects.size(), exec, [&](std::size_t r) {
        Rng rng = Rng::stream(seed, 0x7e000000ULL + ni * 1000003ULL + r);
        const PathPair path = simulate_path(spec, theta0, n, rng);
        rejects[r] = composite.decide(spec, path.observations) ? 1.0 : 0.0;
      });
      type1 = mean(rejects);
      type1_se = binomial_se(type1, rejects.size());
    }

    double bound1 = 0.0;
    for (const auto& member : composite.members) {
      const double margin = member.critical_value - member.j_hat;  // r - H
      bound1 += std::exp(-static_cast<double>(n) * margin * margin / bundle.c_tilde);
    }
    bound1 = std::min(bound1, 1.0);

    for (std::size_t ji = 0; ji < options.j_grid.size(); ++ji) {
      const int j = options.j_grid[ji];
      ErrorRateRow row;
      row.n = n;
      row.j = j;
      row.member_count = static_cast<long>(composite.members.size());
      row.type1 = type1;
      row.type1_se = type1_se;
      row.bound1 = bound1;

      if (panels[ji].empty() || composite.members.empty()) {
        row.skipped = true;
        report.rows.push_back(row);
        continue;
      }

      double worst = -1.0, worst_se = 0.0;
      const long reps_per_alt =
          std::max<long>(1, options.replicates /
                                static_cast<long>(panels[ji].size()));
      for (std::size_t a = 0; a < panels[ji].size(); ++a) {
        const Param& alt = panels[ji][a];
        std::vector<double> accepts(static_cast<std::size_t>(reps_per_alt));
        parallel_for(accepts.size(), exec, [&](std::size_t r) {
          Rng rng = Rng::stream(
              seed, ((ni * 64 + ji) * 64 + a) * 131071ULL + r + 0x2000000ULL);
          const PathPair path = simulate_path(spec, alt, n, rng);
          accepts[r] = composite.decide_near(spec, path.observations, alt) ? 0.0 : 1.0;
        });
        const double rate = mean(accepts);
        if (rate > worst) {
          worst = rate;
          worst_se = binomial_se(rate, accepts.size());
        }
      }
      row.type2 = worst;
      row.type2_se = worst_se;

      // step-2 bound at the panel alternatives: 2 exp(-n margin^2 / (4 C~))
      double bound2 = 0.0;
      for (std::size_t a = 0; a < panels[ji].size(); ++a) {
        const Param& alt = panels[ji][a];
        std::size_t nearest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < composite.members.size(); ++m) {
          const double dist = (composite.members[m].center - alt).norm();
          if (dist < best) {
            best = dist;
            nearest = m;
          }
        }
        const auto& member = composite.members[nearest];
        const auto [h_alt_0, se0] = divergence_at(
            spec, alt, theta0, n, 32, seed + 0x51ULL * (a + 1) + 0x9100ULL * ni, exec);
        const auto [h_alt_m, sem] = divergence_at(
            spec, alt, member.center, n, 32, seed + 0x52ULL * (a + 1) + 0x9100ULL * ni,
            exec);
        const double margin = member.critical_value + h_alt_0 - h_alt_m;
        const double b =
            margin > 0.0 ? 2.0 * std::exp(-static_cast<double>(n) * margin * margin /
                                          (4.0 * bundle.c_tilde))
                         : 1.0;
        bound2 = std::max(bound2, std::min(b, 1.0));
      }
      row.bound2 = bound2;
      report.rows.push_back(row);
    }
  }

  // exponent diagnostic: log type2 against n eps^2 j^2
  std::vector<double> xs, ys;
  for (const auto& row : report.rows) {
    if (row.skipped || row.type2 < 0.0) continue;
    const double floor_rate = 0.5 / static_cast<double>(options.replicates);
    xs.push_back(static_cast<double>(row.n) * eps * eps *
                 static_cast<double>(row.j) * static_cast<double>(row.j));
    ys.push_back(std::log(std::max(row.type2, floor_rate)));
  }
  if (xs.size() >= 2 && variance(xs) > 0.0) report.slope_log_type2 = ols_slope(xs, ys);
  return report;
}

}  // namespace hmmlab
