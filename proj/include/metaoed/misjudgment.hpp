#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "metaoed/belief.hpp"
#include "metaoed/models.hpp"
#include "metaoed/outcome.hpp"
#include "metaoed/rng.hpp"

namespace metaoed {

enum class ThreatLevel { NoThreat, Mild, Extreme };

std::string to_string(ThreatLevel level);
ThreatLevel parse_threat_level(const std::string& text);  // "none" | "mild" | "extreme"

ThreatLevel classify_threat(double m_pred, double m_l_star, double e_m_l);

struct AssumptionCheck {
  bool holds = false;
  double slack = 0.0;  // left side minus right side
  double se = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
};

struct MisjudgmentReport {
  Design design;
  double m_pred = 0.0;
  double m_l_star = 0.0;
  double e_m_l = 0.0;
  double e_m_l_se = 0.0;
  double rt_star = 0.0;
  ThreatLevel level = ThreatLevel::NoThreat;
  double generic_upper = 0.0;
  double generic_upper_se = 0.0;
  std::optional<double> level_lower;  // Mild: rt_star >= m_pred - e_m_l
  std::optional<double> level_upper;  // Mild: 0; Extreme: m_pred - e_m_l
  double epsilon = 0.0;
  double inside_mass = 0.0;
  double outside_mass = 1.0;
  double m_pred_tilde = 0.0;
  double m_pred_tilde_se = 0.0;
  // The generic upper bound is only implied when the smoothness assumption holds.
  AssumptionCheck assumption;
};

struct MisjudgmentOptions {
  int theta_samples = 2000;
  int tilde_nodes = 200;  // per tail, one-dimensional Theta only
};

// Prior-over-Theta pseudo-prior with the epsilon-ball around theta_star removed.
struct PseudoPrior {
  double inside_mass = 0.0;
  double outside_mass = 1.0;
  std::vector<Eigen::VectorXd> thetas;
  Eigen::VectorXd weights;  // normalized over the complement
  bool quadrature = false;
};

// Everything about one (model, belief, design) that does not depend on the true parameters.
// Reusing one context across many candidate truths gives common random numbers.
class MisjudgmentContext {
 public:
  MisjudgmentContext(const TaskModel& model, const GaussianBelief& belief, const Design& x,
                     int theta_samples, Rng& rng);
  MisjudgmentContext(const TaskModel& model, const GaussianBelief& belief, const Design& x,
                     Eigen::MatrixXd theta_samples);

  const TaskModel& model() const { return model_; }
  const GaussianBelief& belief() const { return belief_; }
  const Design& design() const { return x_; }
  const Eigen::MatrixXd& theta_samples() const { return thetas_; }

  OutcomeLaw truth(const Eigen::VectorXd& theta, const Eigen::VectorXd& psi) const;
  OutcomeLaw conditional(const Eigen::VectorXd& theta) const;
  const OutcomeLaw& predictive() const { return predictive_; }

  double m_pred(const OutcomeLaw& q) const;
  double m_l(const OutcomeLaw& q, const Eigen::VectorXd& theta) const;
  // Mean and standard error of M_L(theta) over the stored Theta-prior samples.
  std::pair<double, double> expected_m_l(const OutcomeLaw& q) const;
  // E_y~q[log p(y|x,theta) - log p(y|x)], evaluated through cross-entropies.
  double rt(const Eigen::VectorXd& theta, const Eigen::VectorXd& psi) const;
  ThreatLevel classify(const Eigen::VectorXd& theta, const Eigen::VectorXd& psi) const;

  PseudoPrior pseudo_prior(const Eigen::VectorXd& theta_star, double epsilon, int tilde_nodes) const;
  MisjudgmentReport report(const Eigen::VectorXd& theta_star, const Eigen::VectorXd& psi_star,
                           double epsilon, int tilde_nodes = 200) const;

 private:
  void precompute();

  TaskModel model_;
  GaussianBelief belief_;
  Design x_;
  Eigen::MatrixXd thetas_;  // theta_dim x S
  OutcomeLaw predictive_;
  // conditional predictive laws at the E[M_L] points, stored flat
  Eigen::VectorXd cond_mean_;  // Gaussian families: mean of y given each point
  double cond_var_ = 0.0;      // shared variance of y | theta_s
  Eigen::ArrayXd cond_p1_, cond_p0_;  // Bernoulli family
  Eigen::ArrayXd expect_w_;           // weights over the E[M_L] points
};

double default_epsilon(const GaussianBelief& belief);

double rt(const TaskModel& model, const GaussianBelief& belief, const Design& x,
          const Eigen::VectorXd& theta, const Eigen::VectorXd& psi);

MisjudgmentReport misjudgment_report(const TaskModel& model, const GaussianBelief& belief,
                                     const Design& x, const Eigen::VectorXd& theta_star,
                                     const Eigen::VectorXd& psi_star, double epsilon, Rng& rng,
                                     const MisjudgmentOptions& options = {});


// Compares E_q[log p(y|x)] with inside-mass E_q[log p(y|x,theta*)] + outside-mass E_q[log p~(y|x)].
// `mc_samples` Theta draws build the pseudo-prior when Theta is multi-dimensional.
AssumptionCheck check_assumption_smoothness(const TaskModel& model, const GaussianBelief& belief,
                                            const Design& x, const Eigen::VectorXd& theta_star,
                                            const Eigen::VectorXd& psi_star, double epsilon,
                                            int mc_samples, Rng& rng);

// M_L* when the Psi | theta* belief is replaced by alpha delta(psi*) + (1 - alpha) P(Psi | theta*).
std::vector<std::pair<double, double>> psi_knowledge_curve(const TaskModel& model,
                                                      const GaussianBelief& belief, const Design& x,
                                                      const Eigen::VectorXd& theta_star,
                                                      const Eigen::VectorXd& psi_star,
                                                      const std::vector<double>& alphas, Rng& rng,
                                                      const MisjudgmentOptions& options = {});

// rt at psi = s * direction for each s in the grid (direction defaults to all ones).
std::vector<std::pair<double, double>> unboundedness_sweep(
    const TaskModel& model, const GaussianBelief& belief, const Design& x,
    const Eigen::VectorXd& theta_star, const std::vector<double>& psi_grid,
    std::optional<Eigen::VectorXd> direction = std::nullopt);

// I(Theta; Y | x) under the belief: closed form for Gaussian outcomes, Gauss-Hermite over a
// one-dimensional Theta otherwise.
double prior_etig(const TaskModel& model, const GaussianBelief& belief, const Design& x);
int xetig_index(const TaskModel& model, const GaussianBelief& belief);

using DesignSelector = std::function<int(const TaskModel&, const GaussianBelief&)>;

struct AtlasRecord {
  Eigen::VectorXd theta;
  Eigen::VectorXd psi;
  double p_psi_given_theta = 0.0;
  ThreatLevel level = ThreatLevel::NoThreat;
  double rt_at_xetig = 0.0;
  double max_rt = 0.0;
  int xetig_index = 0;
};

std::vector<AtlasRecord> threat_atlas(const TaskModel& model, const GaussianBelief& belief,
                                      const DesignSelector& selector, int n_samples,
                                      std::uint64_t seed, const MisjudgmentOptions& options = {});

}  // namespace metaoed
