#include "hmmlab/model.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hmmlab {

ParamSpace::ParamSpace(Eigen::VectorXd lo, Eigen::VectorXd hi)
    : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size())
    throw std::invalid_argument("ParamSpace: bound dimensions differ");
  for (Eigen::Index i = 0; i < lower.size(); ++i)
    if (!(lower[i] < upper[i]))
      throw std::invalid_argument("ParamSpace: lower must be < upper componentwise");
}

bool ParamSpace::contains(const Param& theta) const {
  if (theta.size() != lower.size()) return false;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (!std::isfinite(theta[i])) return false;
    if (theta[i] < lower[i] || theta[i] > upper[i]) return false;
  }
  return true;
}

double ParamSpace::interior_margin(const Param& theta) const {
  double margin = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    margin = std::min(margin, theta[i] - lower[i]);
    margin = std::min(margin, upper[i] - theta[i]);
  }
  return margin;
}

double Emission::w1(const Param&, int, int) const {
  throw std::runtime_error("constants unavailable: emission has no closed-form W1");
}

double Emission::t1_constant(const Param&) const {
  throw std::runtime_error("constants unavailable: emission has no T1 constant");
}

GaussianMeanEmission::GaussianMeanEmission(double sigma) : sigma_(sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian emission: sigma must be > 0");
}

double GaussianMeanEmission::log_density(int state, double y, const Param& theta) const {
  static const double kLogRoot2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const double z = (y - theta[state]) / sigma_;
  return -0.5 * z * z - std::log(sigma_) - kLogRoot2Pi;
}

double GaussianMeanEmission::sample(int state, const Param& theta, Rng& rng) const {
  return rng.normal(theta[state], sigma_);
}

double GaussianMeanEmission::w1(const Param& theta, int a, int b) const {
  // location family with a common scale: quantile functions differ by the
  // mean gap everywhere
  return std::abs(theta[a] - theta[b]);
}

std::vector<double> GaussianMeanEmission::observation_grid(const Param& theta,
                                                           int states,
                                                           int count) const {
  double lo = theta.head(states).minCoeff() - 4.0 * sigma_;
  double hi = theta.head(states).maxCoeff() + 4.0 * sigma_;
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    grid[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return grid;
}

double PoissonRateEmission::log_density(int state, double y, const Param& theta) const {
  const double rate = theta[state];
  const double k = std::round(y);
  if (k < 0.0)
    return -std::numeric_limits<double>::infinity();
  return k * std::log(rate) - rate - std::lgamma(k + 1.0);
}

double PoissonRateEmission::sample(int state, const Param& theta, Rng& rng) const {
  return static_cast<double>(rng.poisson(theta[state]));
}

double PoissonRateEmission::w1(const Param& theta, int a, int b) const {
  // monotone coupling: Poisson(l2) = Poisson(l1) + Poisson(l2 - l1)
  return std::abs(theta[a] - theta[b]);
}

std::vector<double> PoissonRateEmission::observation_grid(const Param& theta,
                                                          int states,
                                                          int count) const {
  const double max_rate = theta.head(states).maxCoeff();
  const long hi = static_cast<long>(std::ceil(max_rate + 6.0 * std::sqrt(max_rate) + 4.0));
  std::vector<double> grid;
  const long step = std::max<long>(1, (hi + count - 1) / count);
  for (long k = 0; k <= hi; k += step) grid.push_back(static_cast<double>(k));
  return grid;
}

double FiniteAlphabetEmission::log_density(int state, double y, const Param& theta) const {
  const double p1 = theta[state];
  const int symbol = static_cast<int>(std::lround(y));
  if (symbol == 1) return std::log(p1);
  if (symbol == 0) return std::log1p(-p1);
  return -std::numeric_limits<double>::infinity();
}

double FiniteAlphabetEmission::sample(int state, const Param& theta, Rng& rng) const {
  return rng.uniform01() < theta[state] ? 1.0 : 0.0;
}

double FiniteAlphabetEmission::w1(const Param& theta, int a, int b) const {
  // discrete ground metric: W1 equals total variation
  return std::abs(theta[a] - theta[b]);
}

std::vector<double> FiniteAlphabetEmission::observation_grid(const Param&, int,
                                                             int) const {
  return {0.0, 1.0};
}

Eigen::MatrixXd SymmetricLogitTransition::matrix(const Param& theta) const {
  const double flip = 1.0 / (1.0 + std::exp(-theta[index_]));
  Eigen::MatrixXd q(2, 2);
  q << 1.0 - flip, flip, flip, 1.0 - flip;
  return q;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& q) {
  const Eigen::Index s = q.rows();
  if (s != q.cols() || s < 1)
    throw std::invalid_argument("stationary_distribution: square matrix required");

  const Eigen::MatrixXd a = q.transpose() - Eigen::MatrixXd::Identity(s, s);
  if (s > 1) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    const auto& sv = svd.singularValues();
    // pi is unique iff the kernel of (Q^T - I) is one-dimensional
    if (sv[s - 2] < 1e-10 * std::max(1.0, sv[0]))
      throw std::runtime_error("non-unique stationary distribution");
  }

  Eigen::MatrixXd system(s + 1, s);
  system.topRows(s) = a;
  system.row(s).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s + 1);
  rhs[s] = 1.0;
  Eigen::VectorXd pi = system.colPivHouseholderQr().solve(rhs);

  for (Eigen::Index i = 0; i < s; ++i) pi[i] = std::max(pi[i], 0.0);
  pi /= pi.sum();
  if ((pi.transpose() * q - pi.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw std::runtime_error("non-unique stationary distribution");
  return pi;
}

Eigen::VectorXd HmmSpec::initial(const Param& theta) const {
  return stationary_distribution(transition(theta));
}

void HmmSpec::require_in_space(const Param& theta) const {
  if (!space.contains(theta))
    throw std::domain_error("parameter outside the model's box");
}

HmmSpec make_spec(const ModelConfig& config) {
  HmmSpec spec;
  spec.family = config.family;
  spec.states = config.states;
  spec.config = config;
  spec.space = ParamSpace(config.box_lower, config.box_upper);

  const auto require_fixed_q = [&]() {
    if (config.transition.rows() != config.states ||
        config.transition.cols() != config.states)
      throw std::invalid_argument("model config: transition matrix must be S x S");
    if (!is_transition_matrix(config.transition, 1e-9))
      throw std::invalid_argument("model config: transition rows must be stochastic");
  };

  if (config.family == "gaussian_mean") {
    spec.dim = config.states;
    require_fixed_q();
    spec.transition_model = std::make_shared<FixedTransition>(config.transition);
    spec.emission = std::make_shared<GaussianMeanEmission>(config.sigma);
  } else if (config.family == "gauss2_sym_trans") {
    if (config.states != 2)
      throw std::invalid_argument("gauss2_sym_trans requires S = 2");
    spec.dim = 3;
    spec.transition_model = std::make_shared<SymmetricLogitTransition>(2);
    spec.emission = std::make_shared<GaussianMeanEmission>(config.sigma);
  } else if (config.family == "poisson_rate") {
    spec.dim = config.states;
    require_fixed_q();
    if (config.box_lower.minCoeff() <= 0.0)
      throw std::invalid_argument("poisson_rate: box must lie in (0, inf)");
    spec.transition_model = std::make_shared<FixedTransition>(config.transition);
    spec.emission = std::make_shared<PoissonRateEmission>();
  } else if (config.family == "finite_alphabet") {
    spec.dim = config.states;
    require_fixed_q();
    if (config.box_lower.minCoeff() <= 0.0 || config.box_upper.maxCoeff() >= 1.0)
      throw std::invalid_argument("finite_alphabet: box must lie in (0, 1)");
    spec.transition_model = std::make_shared<FixedTransition>(config.transition);
    spec.emission = std::make_shared<FiniteAlphabetEmission>();
  } else {
    throw std::invalid_argument("unknown model family: " + config.family);
  }

  if (spec.space.dim() != spec.dim)
    throw std::invalid_argument("model config: box dimension must equal d");
  return spec;
}

PathPair simulate_path(const HmmSpec& spec, const Param& theta, long n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("simulate_path: n must be >= 1");
  spec.require_in_space(theta);

  const Eigen::MatrixXd q = spec.transition(theta);
  const Eigen::VectorXd init = spec.initial(theta);
  const int s = spec.states;

  PathPair path;
  path.states.resize(static_cast<std::size_t>(n));
  path.observations.resize(static_cast<std::size_t>(n));

  // row-major copy keeps the per-row weight spans contiguous
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
      q_rows = q;
  int state = rng.categorical(init.data(), s);
  for (long t = 0; t < n; ++t) {
    path.states[static_cast<std::size_t>(t)] = state + 1;
    path.observations[static_cast<std::size_t>(t)] =
        spec.emission->sample(state, theta, rng);
    if (t + 1 < n) state = rng.categorical(q_rows.row(state).data(), s);
  }
  return path;
}

PathPair simulate_path(const HmmSpec& spec, const Param& theta, long n,
                       std::uint64_t seed) {
  Rng rng(seed);
  return simulate_path(spec, theta, n, rng);
}

bool is_prob_vector(const Eigen::VectorXd& p, double tol) {
  if (p.size() < 1) return false;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (!(p[i] >= 0.0) || !std::isfinite(p[i])) return false;
  return std::abs(p.sum() - 1.0) <= tol;
}

bool is_transition_matrix(const Eigen::MatrixXd& q, double tol) {
  if (q.rows() != q.cols() || q.rows() < 1) return false;
  for (Eigen::Index r = 0; r < q.rows(); ++r)
    if (!is_prob_vector(q.row(r).transpose(), tol)) return false;
  return true;
}

bool ValidationReport::all_passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

ValidationReport validate_spec(const HmmSpec& spec, const Param& theta) {
  ValidationReport report;
  const auto add = [&](std::string name, bool ok, std::string msg) {
    report.checks.push_back({std::move(name), ok, std::move(msg)});
  };

  const bool in_box = spec.space.contains(theta);
  add("theta_in_space", in_box, in_box ? "" : "theta violates box bounds");
  if (!in_box) return report;

  const Eigen::MatrixXd q = spec.transition(theta);
  const bool stochastic = is_transition_matrix(q, 1e-12);
  add("transition_stochastic", stochastic,
      stochastic ? "" : "a transition row does not sum to 1");

  if (stochastic) {
    try {
      const Eigen::VectorXd pi = spec.initial(theta);
      const double gap = (pi.transpose() * q - pi.transpose()).cwiseAbs().maxCoeff();
      add("initial_stationary", gap <= 1e-10,
          gap <= 1e-10 ? "" : "stationarity residual " + std::to_string(gap));
    } catch (const std::exception& e) {
      add("initial_stationary", false, e.what());
    }
  }

  // emission mass spot-check per state
  for (int s = 0; s < spec.states; ++s) {
    double mass = 0.0;
    switch (spec.emission->kind()) {
      case EmissionKind::gaussian_mean: {
        const auto& g = static_cast<const GaussianMeanEmission&>(*spec.emission);
        const double lo = theta[s] - 10.0 * g.sigma();
        const double hi = theta[s] + 10.0 * g.sigma();
        const int pts = 2001;
        const double h = (hi - lo) / (pts - 1);
        for (int i = 0; i < pts; ++i) {
          const double w = (i == 0 || i == pts - 1) ? 0.5 : 1.0;
          mass += w * std::exp(spec.emission->log_density(s, lo + i * h, theta)) * h;
        }
        break;
      }
      case EmissionKind::poisson_rate: {
        const long hi = static_cast<long>(theta[s] + 30.0 * std::sqrt(theta[s]) + 30.0);
        for (long k = 0; k <= hi; ++k)
          mass += std::exp(spec.emission->log_density(s, static_cast<double>(k), theta));
        break;
      }
      case EmissionKind::finite_alphabet:
        mass = std::exp(spec.emission->log_density(s, 0.0, theta)) +
               std::exp(spec.emission->log_density(s, 1.0, theta));
        break;
    }
    std::ostringstream name;
    name << "emission_mass_state_" << (s + 1);
    add(name.str(), std::abs(mass - 1.0) <= 1e-6,
        std::abs(mass - 1.0) <= 1e-6 ? "" : "density mass " + std::to_string(mass));
  }
  return report;
}

}  // namespace hmmlab
