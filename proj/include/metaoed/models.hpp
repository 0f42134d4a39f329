#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "metaoed/belief.hpp"
#include "metaoed/rng.hpp"

namespace metaoed {

using Design = Eigen::VectorXd;

// y ~ N(theta x1 + psi1 x2 + psi2 x3 + psi3 x4, sigma2)
struct PathAnalysis {
  double sigma2 = 1.0;
  std::vector<Design> designs;
};

// y ~ Bernoulli(1 / (1 + exp(psi x - theta)))
struct Preference {
  std::vector<Design> designs;
};

// y ~ N(c x (psi - theta), sigma2); x scales the single action, x = 1 is the plain toy.
struct Toy {
  double c = 1.0;
  double sigma2 = 1.0;
  std::vector<Design> designs;
};

using TaskModel = std::variant<PathAnalysis, Preference, Toy>;

struct TaskEnvironment {
  Eigen::VectorXd theta_star;
  Eigen::VectorXd psi_star;
};

enum class OutcomeFamily { Gaussian, Bernoulli };

// Every model's outcome depends on the parameters through u = a_theta . theta + a_psi . psi.
struct LinearPredictor {
  Eigen::VectorXd a_theta;
  Eigen::VectorXd a_psi;

  double eval(const Eigen::VectorXd& theta, const Eigen::VectorXd& psi) const {
    return a_theta.dot(theta) + a_psi.dot(psi);
  }
};

std::string model_name(const TaskModel& model);
OutcomeFamily outcome_family(const TaskModel& model);
double noise_variance(const TaskModel& model);  // Gaussian families only
const std::vector<Design>& designs(const TaskModel& model);
int design_length(const TaskModel& model);
int theta_dim(const TaskModel& model);
int psi_dim(const TaskModel& model);

// Throws InvalidInput if the model or a design violates its invariants.
void validate(const TaskModel& model);
void validate(const TaskModel& model, const TaskEnvironment& env);

LinearPredictor linear_predictor(const TaskModel& model, const Design& x);
// Coefficients of u over the full parameter vector laid out as (theta, psi).
Eigen::VectorXd joint_coefficients(const TaskModel& model, const Design& x);

double likelihood(const TaskModel& model, const Design& x, const Eigen::VectorXd& theta,
                  const Eigen::VectorXd& psi, double y);
double log_likelihood(const TaskModel& model, const Design& x, const Eigen::VectorXd& theta,
                      const Eigen::VectorXd& psi, double y);
double sample_outcome(const TaskModel& model, const Design& x, const Eigen::VectorXd& theta,
                      const Eigen::VectorXd& psi, Rng& rng);

std::vector<Design> generate_path_analysis_designs(int count, std::uint64_t seed);
std::vector<Design> preference_design_grid(int count);

// Learner priors used in the experiments; parameters are ordered (theta, psi...).
GaussianBelief default_prior(const TaskModel& model);

}  // namespace metaoed
