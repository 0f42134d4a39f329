#pragma once

#include <Eigen/Dense>
#include <variant>

#include "metaoed/belief.hpp"
#include "metaoed/models.hpp"

namespace metaoed {

struct BernoulliLaw {
  double p1 = 0.5;
  double p0 = 0.5;
};

struct GaussianMixture {
  Eigen::VectorXd weights;  // sum to 1
  Eigen::VectorXd means;
  Eigen::VectorXd variances;

  double log_pdf(double y) const;
};

// Outcome distributions. Mixtures of Bernoulli laws collapse to a single BernoulliLaw.
using OutcomeLaw = std::variant<UnivariateGaussian, BernoulliLaw, GaussianMixture>;

// -E_q[log p(Y)]; q must be a Gaussian or Bernoulli law.
double cross_entropy(const OutcomeLaw& q, const OutcomeLaw& p);
double entropy(const OutcomeLaw& q);
// KL(q || p); closed form for Gaussian pairs, exact sum for Bernoulli, Gauss-Hermite over
// y ~ q when p is a Gaussian mixture.
double kl_divergence(const OutcomeLaw& q, const OutcomeLaw& p);

// alpha q + (1 - alpha) p for laws of the same family.
OutcomeLaw mix(double alpha, const OutcomeLaw& q, const OutcomeLaw& p);

// Weighted average of conditional laws that share a family (Gaussian inputs give a mixture).
OutcomeLaw average_laws(const std::vector<OutcomeLaw>& laws, const Eigen::VectorXd& weights);

// Predictive laws of the learner and the truth at one design.
OutcomeLaw true_law(const TaskModel& model, const Design& x, const Eigen::VectorXd& theta,
                    const Eigen::VectorXd& psi);
// p(y | x, theta): task-specific parameters integrated against the belief's Psi | theta.
OutcomeLaw conditional_predictive(const TaskModel& model, const GaussianBelief& belief,
                                  const Design& x, const Eigen::VectorXd& theta);
// p(y | x) under the full belief.
OutcomeLaw prior_predictive(const TaskModel& model, const GaussianBelief& belief, const Design& x);

// Number of Gauss-Hermite nodes used for expectations over a Gaussian outcome.
inline constexpr int kOutcomeNodes = 96;

}  // namespace metaoed
