#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <vector>

#include "hmmlab/rng.hpp"

namespace hmmlab {

using Param = Eigen::VectorXd;

// Compact axis-aligned box; membership is componentwise inclusion.
struct ParamSpace {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  ParamSpace() = default;
  ParamSpace(Eigen::VectorXd lo, Eigen::VectorXd hi);

  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Param& theta) const;
  Param center() const { return 0.5 * (lower + upper); }
  Eigen::VectorXd widths() const { return upper - lower; }
  // distance from theta to the nearest face, negative outside
  double interior_margin(const Param& theta) const;
};

enum class EmissionKind { gaussian_mean, poisson_rate, finite_alphabet };
enum class ObsMetric { absolute, discrete };

// Parametric per-state emission family. By convention the emission
// parameter of state s is theta[s] (families with extra transition
// parameters append them after the first S slots).
class Emission {
 public:
  virtual ~Emission() = default;
  virtual EmissionKind kind() const = 0;
  virtual ObsMetric metric() const = 0;
  virtual double log_density(int state, double y, const Param& theta) const = 0;
  virtual double sample(int state, const Param& theta, Rng& rng) const = 0;

  // closed-form pairwise ground-metric W1 between the state-a and state-b
  // emission laws, when the family has one
  virtual bool has_w1() const { return false; }
  virtual double w1(const Param& theta, int a, int b) const;

  // per-state transportation-inequality constant, when known in closed form
  virtual bool has_t1_constant() const { return false; }
  virtual double t1_constant(const Param& theta) const;

  // representative observation values used by grid-based estimators
  virtual std::vector<double> observation_grid(const Param& theta, int states,
                                               int count) const = 0;
};

class GaussianMeanEmission final : public Emission {
 public:
  explicit GaussianMeanEmission(double sigma);
  EmissionKind kind() const override { return EmissionKind::gaussian_mean; }
  ObsMetric metric() const override { return ObsMetric::absolute; }
  double log_density(int state, double y, const Param& theta) const override;
  double sample(int state, const Param& theta, Rng& rng) const override;
  bool has_w1() const override { return true; }
  double w1(const Param& theta, int a, int b) const override;
  bool has_t1_constant() const override { return true; }
  double t1_constant(const Param&) const override { return sigma_ * sigma_; }
  std::vector<double> observation_grid(const Param& theta, int states,
                                       int count) const override;
  double sigma() const { return sigma_; }

 private:
  double sigma_;
};

class PoissonRateEmission final : public Emission {
 public:
  EmissionKind kind() const override { return EmissionKind::poisson_rate; }
  ObsMetric metric() const override { return ObsMetric::absolute; }
  double log_density(int state, double y, const Param& theta) const override;
  double sample(int state, const Param& theta, Rng& rng) const override;
  bool has_w1() const override { return true; }
  double w1(const Param& theta, int a, int b) const override;
  std::vector<double> observation_grid(const Param& theta, int states,
                                       int count) const override;
};

// Two-symbol alphabet {0,1}; theta[s] is the probability of symbol 1.
class FiniteAlphabetEmission final : public Emission {
 public:
  EmissionKind kind() const override { return EmissionKind::finite_alphabet; }
  ObsMetric metric() const override { return ObsMetric::discrete; }
  double log_density(int state, double y, const Param& theta) const override;
  double sample(int state, const Param& theta, Rng& rng) const override;
  bool has_w1() const override { return true; }
  double w1(const Param& theta, int a, int b) const override;
  std::vector<double> observation_grid(const Param& theta, int states,
                                       int count) const override;
};

class Transition {
 public:
  virtual ~Transition() = default;
  virtual Eigen::MatrixXd matrix(const Param& theta) const = 0;
  virtual bool depends_on_theta() const = 0;
};

class FixedTransition final : public Transition {
 public:
  explicit FixedTransition(Eigen::MatrixXd q) : q_(std::move(q)) {}
  Eigen::MatrixXd matrix(const Param&) const override { return q_; }
  bool depends_on_theta() const override { return false; }

 private:
  Eigen::MatrixXd q_;
};

// 2-state symmetric kernel with flip probability logistic(theta[index]).
class SymmetricLogitTransition final : public Transition {
 public:
  explicit SymmetricLogitTransition(int index) : index_(index) {}
  Eigen::MatrixXd matrix(const Param& theta) const override;
  bool depends_on_theta() const override { return true; }

 private:
  int index_;
};

// Declarative, serializable description of a model; the runtime HmmSpec is
// built from it. Families:
//   gaussian_mean   d = S means, fixed Q, known sigma
//   gauss2_sym_trans S = 2, theta = (mu1, mu2, transition logit)
//   poisson_rate    d = S rates, fixed Q
//   finite_alphabet d = S symbol-1 probabilities, fixed Q
struct ModelConfig {
  std::string family;
  int states = 0;
  Eigen::VectorXd box_lower;
  Eigen::VectorXd box_upper;
  double sigma = 1.0;                  // gaussian families
  Eigen::MatrixXd transition;          // fixed-Q families
};

struct HmmSpec {
  std::string family;
  int states = 0;
  int dim = 0;
  ParamSpace space;
  std::shared_ptr<const Transition> transition_model;
  std::shared_ptr<const Emission> emission;
  ModelConfig config;  // retained for serialization

  Eigen::MatrixXd transition(const Param& theta) const {
    return transition_model->matrix(theta);
  }
  Eigen::VectorXd initial(const Param& theta) const;
  void require_in_space(const Param& theta) const;
};

HmmSpec make_spec(const ModelConfig& config);

// pi Q = pi, sum(pi) = 1 by linear solve; throws on a non-unique solution
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& q);

struct PathPair {
  std::vector<int> states;        // values in 1..S
  std::vector<double> observations;
};

PathPair simulate_path(const HmmSpec& spec, const Param& theta, long n, Rng& rng);
PathPair simulate_path(const HmmSpec& spec, const Param& theta, long n,
                       std::uint64_t seed);

struct ValidationCheck {
  std::string name;
  bool passed = false;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool all_passed() const;
};

ValidationReport validate_spec(const HmmSpec& spec, const Param& theta);

bool is_prob_vector(const Eigen::VectorXd& p, double tol = 1e-12);
bool is_transition_matrix(const Eigen::MatrixXd& q, double tol = 1e-12);

}  // namespace hmmlab
