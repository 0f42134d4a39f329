#include "metaoed/belief.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "metaoed/errors.hpp"

namespace metaoed {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Relative threshold on the Theta-block eigenvalue spread below which conditioning is refused.
constexpr double kConditioningFloor = 1e-10;

MatrixXd symmetrized(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

UnivariateGaussian::UnivariateGaussian(double m, double v) : mean(m), variance(v) {
  if (!(v > 0.0) || !std::isfinite(v) || !std::isfinite(m))
    throw InvalidInput("univariate gaussian needs finite mean and positive variance");
}

double UnivariateGaussian::log_pdf(double y) const {
  const double r = y - mean;
  return -0.5 * (kLog2Pi + std::log(variance) + r * r / variance);
}

double kl_gaussian(const UnivariateGaussian& a, const UnivariateGaussian& b) {
  if (!(a.variance > 0.0) || !(b.variance > 0.0))
    throw InvalidInput("kl_gaussian: variances must be positive");
  const double ratio = a.variance / b.variance;
  const double d = a.mean - b.mean;
  const double kl = 0.5 * (ratio - 1.0 - std::log(ratio) + d * d / b.variance);
  return std::max(kl, 0.0);
}

Gaussian::Gaussian(VectorXd mean, MatrixXd cov) : mean_(std::move(mean)) {
  if (cov.rows() != cov.cols() || cov.rows() != mean_.size() || mean_.size() == 0)
    throw InvalidInput("gaussian: mean/covariance dimension mismatch");
  if (!mean_.allFinite() || !cov.allFinite()) throw InvalidInput("gaussian: non-finite parameters");
  const double scale = std::max(cov.cwiseAbs().maxCoeff(), 1e-300);
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw InvalidInput("gaussian: covariance is not symmetric");
  cov_ = symmetrized(cov);
  Eigen::LLT<MatrixXd> llt(cov_);
  if (llt.info() != Eigen::Success) throw InvalidInput("gaussian: covariance is not positive definite");
  chol_ = llt.matrixL();
  for (int i = 0; i < chol_.rows(); ++i)
    if (!(chol_(i, i) > 0.0)) throw InvalidInput("gaussian: covariance is not positive definite");
  log_norm_ = -0.5 * dim() * kLog2Pi - chol_.diagonal().array().log().sum();
}

double Gaussian::log_pdf(const VectorXd& x) const {
  if (x.size() != mean_.size()) throw InvalidInput("log_pdf: dimension mismatch");
  const VectorXd z = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
  return log_norm_ - 0.5 * z.squaredNorm();
}

VectorXd Gaussian::log_pdf_columns(const MatrixXd& xs) const {
  if (xs.rows() != mean_.size()) throw InvalidInput("log_pdf: dimension mismatch");
  MatrixXd centered = xs.colwise() - mean_;
  chol_.triangularView<Eigen::Lower>().solveInPlace(centered);
  return (log_norm_ - 0.5 * centered.colwise().squaredNorm().array()).matrix().transpose();
}

VectorXd Gaussian::sample(Rng& rng) const {
  VectorXd z(dim());
  fill_standard_normal(rng, z.data(), static_cast<std::size_t>(z.size()));
  return mean_ + chol_ * z;
}

MatrixXd Gaussian::sample(Rng& rng, int n) const {
  MatrixXd z(dim(), n);
  // column-major fill keeps each draw's coordinates adjacent in the stream
  fill_standard_normal(rng, z.data(), static_cast<std::size_t>(z.size()));
  return (chol_ * z).colwise() + mean_;
}

MatrixXd select_block(const MatrixXd& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  MatrixXd out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  return out;
}

VectorXd select_entries(const VectorXd& v, const std::vector<int>& idx) {
  VectorXd out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
  return out;
}

GaussianBelief::GaussianBelief(VectorXd mean, MatrixXd cov, std::vector<int> theta_dims)
    : joint_(std::move(mean), std::move(cov)), theta_dims_(std::move(theta_dims)) {
  const int d = joint_.dim();
  std::sort(theta_dims_.begin(), theta_dims_.end());
  if (std::adjacent_find(theta_dims_.begin(), theta_dims_.end()) != theta_dims_.end())
    throw InvalidInput("belief: duplicate transferable dimension");
  for (int t : theta_dims_)
    if (t < 0 || t >= d) throw InvalidInput("belief: transferable dimension out of range");
  for (int i = 0; i < d; ++i)
    if (!std::binary_search(theta_dims_.begin(), theta_dims_.end(), i)) psi_dims_.push_back(i);
  if (theta_dims_.empty() || psi_dims_.empty())
    throw InvalidInput("belief: both the transferable and task-specific blocks must be non-empty");

  const MatrixXd s_theta = theta_cov();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s_theta, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || lo < kConditioningFloor * hi) {
    regression_error_ = "theta-block covariance is numerically singular";
    return;
  }
  Eigen::LLT<MatrixXd> llt(s_theta);
  const MatrixXd s_tp = theta_psi_cov();
  regression_.theta_mean = theta_mean();
  regression_.psi_mean = psi_mean();
  regression_.gain = llt.solve(s_tp).transpose();
  MatrixXd cc = symmetrized(psi_cov() - s_tp.transpose() * llt.solve(s_tp));
  Eigen::LLT<MatrixXd> cond(cc);
  if (cond.info() != Eigen::Success) {
    regression_error_ = "conditional task-specific covariance is not positive definite";
    return;
  }
  regression_.cond_cov = cc;
  regression_.cond_chol = cond.matrixL();
  regression_ok_ = true;
}

VectorXd GaussianBelief::theta_mean() const { return select_entries(mean(), theta_dims_); }
VectorXd GaussianBelief::psi_mean() const { return select_entries(mean(), psi_dims_); }
MatrixXd GaussianBelief::theta_cov() const { return select_block(cov(), theta_dims_, theta_dims_); }
MatrixXd GaussianBelief::psi_cov() const { return select_block(cov(), psi_dims_, psi_dims_); }
MatrixXd GaussianBelief::theta_psi_cov() const { return select_block(cov(), theta_dims_, psi_dims_); }

VectorXd GaussianBelief::theta_part(const VectorXd& full) const {
  if (full.size() != dim()) throw InvalidInput("belief: parameter dimension mismatch");
  return select_entries(full, theta_dims_);
}

VectorXd GaussianBelief::psi_part(const VectorXd& full) const {
  if (full.size() != dim()) throw InvalidInput("belief: parameter dimension mismatch");
  return select_entries(full, psi_dims_);
}

VectorXd GaussianBelief::join(const VectorXd& theta, const VectorXd& psi) const {
  if (theta.size() != theta_dim() || psi.size() != psi_dim())
    throw InvalidInput("belief: block dimension mismatch");
  VectorXd full(dim());
  for (int i = 0; i < theta_dim(); ++i) full(theta_dims_[i]) = theta(i);
  for (int i = 0; i < psi_dim(); ++i) full(psi_dims_[i]) = psi(i);
  return full;
}

Gaussian GaussianBelief::marginal_theta() const { return Gaussian(theta_mean(), theta_cov()); }
Gaussian GaussianBelief::marginal_psi() const { return Gaussian(psi_mean(), psi_cov()); }

const PsiGivenTheta& GaussianBelief::psi_given_theta() const {
  if (!regression_ok_) throw DegenerateConditioning("condition_on_theta: " + regression_error_);
  return regression_;
}

Gaussian GaussianBelief::condition_on_theta(const VectorXd& theta) const {
  if (theta.size() != theta_dim()) throw InvalidInput("condition_on_theta: dimension mismatch");
  const PsiGivenTheta& r = psi_given_theta();
  return Gaussian(r.mean_at(theta), r.cond_cov);
}

Gaussian condition_on_theta(const GaussianBelief& belief, const VectorXd& theta) {
  return belief.condition_on_theta(theta);
}

Gaussian marginal_theta(const GaussianBelief& belief) { return belief.marginal_theta(); }

double log_pdf(const GaussianBelief& belief, const VectorXd& point) { return belief.log_pdf(point); }

}  // namespace metaoed
