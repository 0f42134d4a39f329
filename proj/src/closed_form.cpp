#include "metaoed/closed_form.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

#include "metaoed/errors.hpp"

namespace metaoed {

namespace {

void check(const GaussianBelief& belief, const Eigen::VectorXd& a, double sigma2) {
  if (a.size() != belief.dim()) throw InvalidInput("design length does not match the belief dimension");
  if (!(sigma2 > 0.0)) throw InvalidInput("sigma2 must be positive");
}

// a^T S a through the Cholesky factor: ||L^T a||^2.
double quad_total(const GaussianBelief& belief, const Eigen::VectorXd& a) {
  return (belief.joint().chol().transpose() * a).squaredNorm();
}

// a_psi^T S_{psi|theta} a_psi.
double quad_conditional(const GaussianBelief& belief, const Eigen::VectorXd& a) {
  const Eigen::VectorXd a_psi = belief.psi_part(a);
  return (belief.psi_given_theta().cond_chol.transpose() * a_psi).squaredNorm();
}

Eigen::VectorXd layout_coefficients(const TaskModel& model, const GaussianBelief& belief,
                                    const Design& x) {
  const Eigen::VectorXd a = joint_coefficients(model, x);
  if (a.size() != belief.dim()) throw InvalidInput("belief dimension does not match the model");
  return belief.join(a.head(belief.theta_dim()), a.tail(belief.psi_dim()));
}

}  // namespace

ClosedFormValues closed_form_values(const GaussianBelief& belief, const Eigen::VectorXd& a,
                                    double sigma2) {
  check(belief, a, sigma2);
  const double total = quad_total(belief, a);
  const double cond = quad_conditional(belief, a);
  ClosedFormValues v;
  v.eig = 0.5 * std::log1p(total / sigma2);
  v.etsig = 0.5 * std::log1p(cond / sigma2);
  // written as a difference of the two logs so EIG = ETIG + ETSIG holds to round-off
  v.etig = std::max(v.eig - v.etsig, 0.0);
  v.etsig = v.eig - v.etig;
  return v;
}

double eig_lg(const GaussianBelief& belief, const Eigen::VectorXd& a, double sigma2) {
  return closed_form_values(belief, a, sigma2).eig;
}

double etig_lg(const GaussianBelief& belief, const Eigen::VectorXd& a, double sigma2) {
  return closed_form_values(belief, a, sigma2).etig;
}

double etsig_lg(const GaussianBelief& belief, const Eigen::VectorXd& a, double sigma2) {
  return closed_form_values(belief, a, sigma2).etsig;
}

GaussianBelief posterior_update_lg(const GaussianBelief& belief, const Eigen::VectorXd& a, double y,
                                   double sigma2) {
  check(belief, a, sigma2);
  if (!std::isfinite(y)) throw InvalidInput("outcome must be finite");
  if (a.isZero(0.0)) return belief;
  const Eigen::VectorXd sa = belief.cov() * a;
  const double s = sigma2 + a.dot(sa);
  const Eigen::VectorXd gain = sa / s;
  Eigen::VectorXd mean = belief.mean() + gain * (y - a.dot(belief.mean()));
  Eigen::MatrixXd cov = belief.cov() - gain * sa.transpose();
  return GaussianBelief(std::move(mean), 0.5 * (cov + cov.transpose()), belief.theta_dims());
}

GaussianBelief batch_posterior_lg(const GaussianBelief& belief, const std::vector<Eigen::VectorXd>& as,
                                  const std::vector<double>& ys, double sigma2) {
  if (as.size() != ys.size()) throw InvalidInput("batch update needs one outcome per design");
  if (!(sigma2 > 0.0)) throw InvalidInput("sigma2 must be positive");
  Eigen::LLT<Eigen::MatrixXd> prior(belief.cov());
  Eigen::MatrixXd precision = prior.solve(Eigen::MatrixXd::Identity(belief.dim(), belief.dim()));
  Eigen::VectorXd shift = prior.solve(belief.mean());
  for (std::size_t k = 0; k < as.size(); ++k) {
    check(belief, as[k], sigma2);
    precision += as[k] * as[k].transpose() / sigma2;
    shift += as[k] * ys[k] / sigma2;
  }
  Eigen::LLT<Eigen::MatrixXd> post(0.5 * (precision + precision.transpose()));
  Eigen::MatrixXd cov = post.solve(Eigen::MatrixXd::Identity(belief.dim(), belief.dim()));
  Eigen::VectorXd mean = post.solve(shift);
  return GaussianBelief(std::move(mean), 0.5 * (cov + cov.transpose()), belief.theta_dims());
}

ClosedFormValues closed_form_values(const TaskModel& model, const GaussianBelief& belief,
                                    const Design& x) {
  if (outcome_family(model) != OutcomeFamily::Gaussian)
    throw InvalidInput("closed forms need a Gaussian-outcome model");
  return closed_form_values(belief, layout_coefficients(model, belief, x), noise_variance(model));
}

GaussianBelief posterior_update(const TaskModel& model, const GaussianBelief& belief,
                                const Design& x, double y) {
  if (outcome_family(model) != OutcomeFamily::Gaussian)
    throw InvalidInput("conjugate update needs a Gaussian-outcome model");
  return posterior_update_lg(belief, layout_coefficients(model, belief, x), y, noise_variance(model));
}

int argmax_lowest(const std::vector<double>& values, const char* what) {
  if (values.empty()) throw InvalidInput("argmax over an empty set");
  int best = 0;
  int ties = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i) {
    if (values[i] > values[best]) {
      best = i;
      ties = 0;
    } else if (values[i] == values[best]) {
      ++ties;
    }
  }
  if (ties > 0)
    spdlog::warn("{}: {} designs tie with the maximum at index {}; keeping the lowest index", what,
                 ties, best);
  return best;
}

}  // namespace metaoed
