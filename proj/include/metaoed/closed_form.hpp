#pragma once

#include <Eigen/Dense>
#include <vector>

#include "metaoed/belief.hpp"
#include "metaoed/models.hpp"

namespace metaoed {

// Closed forms for y ~ N(a . params, sigma2) with a Gaussian belief over params.
// `a` is the coefficient vector over the full parameter layout of the belief; for the
// path-analysis model this is the design itself.
double eig_lg(const GaussianBelief& belief, const Eigen::VectorXd& a, double sigma2);
double etig_lg(const GaussianBelief& belief, const Eigen::VectorXd& a, double sigma2);
double etsig_lg(const GaussianBelief& belief, const Eigen::VectorXd& a, double sigma2);

struct ClosedFormValues {
  double eig = 0.0;
  double etig = 0.0;
  double etsig = 0.0;
};
ClosedFormValues closed_form_values(const GaussianBelief& belief, const Eigen::VectorXd& a,
                                    double sigma2);

GaussianBelief posterior_update_lg(const GaussianBelief& belief, const Eigen::VectorXd& a, double y,
                                   double sigma2);
// Joint update with all (a_k, y_k) at once, in information form.
GaussianBelief batch_posterior_lg(const GaussianBelief& belief, const std::vector<Eigen::VectorXd>& as,
                                  const std::vector<double>& ys, double sigma2);

// Model-aware wrappers (Gaussian-outcome models only).
ClosedFormValues closed_form_values(const TaskModel& model, const GaussianBelief& belief,
                                    const Design& x);
GaussianBelief posterior_update(const TaskModel& model, const GaussianBelief& belief,
                                const Design& x, double y);

// Index of the largest value; exact ties go to the lowest index and are logged.
int argmax_lowest(const std::vector<double>& values, const char* what);

}  // namespace metaoed
