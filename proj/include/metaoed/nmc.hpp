#pragma once

#include <Eigen/Dense>
#include <vector>

#include "metaoed/belief.hpp"
#include "metaoed/models.hpp"
#include "metaoed/rng.hpp"

namespace metaoed {

struct Observation {
  Design x;
  double y = 0.0;
};

// Unnormalized posterior: prior density times the likelihood of every observation so far.
class PosteriorTarget {
 public:
  PosteriorTarget(GaussianBelief prior, TaskModel model, std::vector<Observation> observations = {});

  const GaussianBelief& prior() const { return prior_; }
  const TaskModel& model() const { return model_; }
  const std::vector<Observation>& observations() const { return observations_; }
  PosteriorTarget with(const Observation& obs) const;

  double log_density(const Eigen::VectorXd& params) const;
  // One value per column of a d x n parameter matrix.
  Eigen::VectorXd log_density_columns(const Eigen::MatrixXd& params) const;
  Eigen::VectorXd log_likelihood_columns(const Eigen::MatrixXd& params) const;

 private:
  GaussianBelief prior_;
  TaskModel model_;
  std::vector<Observation> observations_;
  // Observations at the same design share one linear predictor; their likelihood terms are
  // accumulated through counts (Bernoulli) or sufficient statistics (Gaussian).
  struct DesignGroup {
    Eigen::VectorXd a;
    double n1 = 0.0, n0 = 0.0;
    double count = 0.0, sum_y = 0.0, sum_y2 = 0.0;
  };
  std::vector<DesignGroup> groups_;
};

struct WeightedSampleSet {
  Eigen::MatrixXd samples;  // d x N, full parameter layout of the belief
  Eigen::VectorXd weights;  // self-normalized, sum to 1
  GaussianBelief variational;
  PosteriorTarget target;

  int size() const { return static_cast<int>(samples.cols()); }
  double ess() const { return 1.0 / weights.squaredNorm(); }
};

double effective_sample_size(const Eigen::VectorXd& weights);

// Weighted moment match, covariance scaled by `inflation`. Throws ResampleRequired when ESS < 2.
GaussianBelief fit_variational(const Eigen::MatrixXd& samples, const Eigen::VectorXd& weights,
                               double inflation, const std::vector<int>& theta_dims);

// N fresh draws from `variational`, importance weighted against `target`.
WeightedSampleSet refresh_samples(const PosteriorTarget& target, const GaussianBelief& variational,
                                  int n, Rng& rng);

// Same samples and proposal, weights recomputed against a new target.
WeightedSampleSet reweight(const WeightedSampleSet& set, const PosteriorTarget& target);

struct InformationEstimate {
  double eig = 0.0;
  double etig = 0.0;
  double etsig = 0.0;
  double se_eig = 0.0;
  double se_etig = 0.0;
  double se_etsig = 0.0;
};

// Importance-weighted nested Monte Carlo for Bernoulli outcomes. Inner conditional samples do
// not depend on the design, so they are drawn once here and shared by every design evaluated.
class NestedEstimator {
 public:
  NestedEstimator(const TaskModel& model, const WeightedSampleSet& set, int m, Rng& rng);

  int inner_size() const { return m_; }
  InformationEstimate estimate(const Design& x) const;
  std::vector<InformationEstimate> estimate_all(const std::vector<Design>& xs) const;

 private:
  TaskModel model_;
  int n_ = 0;
  int m_ = 0;
  Eigen::VectorXd outer_w_;
  Eigen::MatrixXd theta_;                // theta_dim x N
  std::vector<Eigen::ArrayXXd> inner_psi_;  // per psi coordinate, M x N; row 0 is the outer psi_i
  Eigen::ArrayXXd inner_w_;              // M x N, each column sums to 1
};

int default_inner_size(int n);

InformationEstimate estimate_information(const TaskModel& model, const Design& x,
                                         const WeightedSampleSet& set, int m, Rng& rng);
double estimate_etig(const TaskModel& model, const Design& x, const WeightedSampleSet& set, int m,
                     Rng& rng);
double estimate_etsig(const TaskModel& model, const Design& x, const WeightedSampleSet& set, int m,
                      Rng& rng);

}  // namespace metaoed
