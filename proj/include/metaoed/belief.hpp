#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "metaoed/rng.hpp"

namespace metaoed {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct UnivariateGaussian {
  double mean = 0.0;
  double variance = 1.0;

  UnivariateGaussian() = default;
  UnivariateGaussian(double m, double v);

  double log_pdf(double y) const;
};

// KL(a || b) in nats.
double kl_gaussian(const UnivariateGaussian& a, const UnivariateGaussian& b);

// Multivariate normal with a cached Cholesky factor.
class Gaussian {
 public:
  Gaussian(VectorXd mean, MatrixXd cov);

  int dim() const { return static_cast<int>(mean_.size()); }
  const VectorXd& mean() const { return mean_; }
  const MatrixXd& cov() const { return cov_; }
  const MatrixXd& chol() const { return chol_; }  // lower triangular L, cov = L L^T

  double log_pdf(const VectorXd& x) const;
  // Log-density for each column of xs.
  VectorXd log_pdf_columns(const MatrixXd& xs) const;
  VectorXd sample(Rng& rng) const;
  MatrixXd sample(Rng& rng, int n) const;  // d x n

 private:
  VectorXd mean_;
  MatrixXd cov_;
  MatrixXd chol_;
  double log_norm_ = 0.0;
};

// Linear-Gaussian regression of the Psi-block on the Theta-block:
// Psi | theta ~ N(psi_mean + gain (theta - theta_mean), cond_cov).
struct PsiGivenTheta {
  VectorXd theta_mean;
  VectorXd psi_mean;
  MatrixXd gain;      // |psi| x |theta|
  MatrixXd cond_cov;  // S_psi - S_theta_psi^T S_theta^{-1} S_theta_psi
  MatrixXd cond_chol;

  VectorXd mean_at(const VectorXd& theta) const {
    return psi_mean + gain * (theta - theta_mean);
  }
};

// Joint Gaussian belief over (Theta, Psi) with an explicit partition of the coordinates.
class GaussianBelief {
 public:
  GaussianBelief(VectorXd mean, MatrixXd cov, std::vector<int> theta_dims);

  int dim() const { return joint_.dim(); }
  int theta_dim() const { return static_cast<int>(theta_dims_.size()); }
  int psi_dim() const { return static_cast<int>(psi_dims_.size()); }
  const std::vector<int>& theta_dims() const { return theta_dims_; }
  const std::vector<int>& psi_dims() const { return psi_dims_; }
  const VectorXd& mean() const { return joint_.mean(); }
  const MatrixXd& cov() const { return joint_.cov(); }
  const Gaussian& joint() const { return joint_; }

  VectorXd theta_mean() const;
  VectorXd psi_mean() const;
  MatrixXd theta_cov() const;
  MatrixXd psi_cov() const;
  MatrixXd theta_psi_cov() const;  // |theta| x |psi|

  // Split a full parameter vector into its blocks and back.
  VectorXd theta_part(const VectorXd& full) const;
  VectorXd psi_part(const VectorXd& full) const;
  VectorXd join(const VectorXd& theta, const VectorXd& psi) const;

  Gaussian marginal_theta() const;
  Gaussian marginal_psi() const;
  // Throws DegenerateConditioning when S_theta is numerically singular.
  const PsiGivenTheta& psi_given_theta() const;
  Gaussian condition_on_theta(const VectorXd& theta) const;
  double log_pdf(const VectorXd& point) const { return joint_.log_pdf(point); }

 private:
  Gaussian joint_;
  std::vector<int> theta_dims_;
  std::vector<int> psi_dims_;
  PsiGivenTheta regression_;
  bool regression_ok_ = false;
  std::string regression_error_;
};

// Free-function forms of the belief operations.
Gaussian condition_on_theta(const GaussianBelief& belief, const VectorXd& theta);
Gaussian marginal_theta(const GaussianBelief& belief);
double log_pdf(const GaussianBelief& belief, const VectorXd& point);

MatrixXd select_block(const MatrixXd& m, const std::vector<int>& rows, const std::vector<int>& cols);
VectorXd select_entries(const VectorXd& v, const std::vector<int>& idx);

}  // namespace metaoed
