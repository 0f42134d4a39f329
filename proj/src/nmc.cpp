#include "metaoed/nmc.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "metaoed/errors.hpp"
#include "metaoed/parallel.hpp"

namespace metaoed {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kTiny = 1e-300;

// exp(logw - max) normalized; throws if nothing survives.
Eigen::VectorXd normalize_log_weights(const Eigen::VectorXd& logw) {
  double hi = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < logw.size(); ++i)
    if (std::isfinite(logw(i)) && logw(i) > hi) hi = logw(i);
  if (!std::isfinite(hi)) throw ResampleRequired("all importance weights are zero");
  Eigen::VectorXd w(logw.size());
  for (int i = 0; i < logw.size(); ++i) w(i) = std::isfinite(logw(i)) ? std::exp(logw(i) - hi) : 0.0;
  return w / w.sum();
}

}  // namespace

PosteriorTarget::PosteriorTarget(GaussianBelief prior, TaskModel model,
                                 std::vector<Observation> observations)
    : prior_(std::move(prior)), model_(std::move(model)), observations_(std::move(observations)) {
  if (prior_.dim() != theta_dim(model_) + psi_dim(model_))
    throw InvalidInput("prior dimension does not match the model");
  const bool bernoulli = outcome_family(model_) == OutcomeFamily::Bernoulli;
  for (const auto& obs : observations_) {
    if (bernoulli && obs.y != 0.0 && obs.y != 1.0) throw InvalidInput("Bernoulli outcome must be 0 or 1");
    if (!std::isfinite(obs.y)) throw InvalidInput("outcome must be finite");
    const Eigen::VectorXd a = joint_coefficients(model_, obs.x);
    auto it = std::find_if(groups_.begin(), groups_.end(),
                           [&](const DesignGroup& g) { return g.a == a; });
    if (it == groups_.end()) {
      groups_.push_back(DesignGroup{a});
      it = groups_.end() - 1;
    }
    (obs.y == 1.0 ? it->n1 : it->n0) += 1.0;
    it->count += 1.0;
    it->sum_y += obs.y;
    it->sum_y2 += obs.y * obs.y;
  }
}

PosteriorTarget PosteriorTarget::with(const Observation& obs) const {
  std::vector<Observation> next = observations_;
  next.push_back(obs);
  return PosteriorTarget(prior_, model_, std::move(next));
}

Eigen::VectorXd PosteriorTarget::log_likelihood_columns(const Eigen::MatrixXd& params) const {
  if (params.rows() != prior_.dim()) throw InvalidInput("target: parameter dimension mismatch");
  const Eigen::Index n = params.cols();
  Eigen::VectorXd total = Eigen::VectorXd::Zero(n);
  if (groups_.empty()) return total;
  const bool bernoulli = outcome_family(model_) == OutcomeFamily::Bernoulli;
  const double s2 = bernoulli ? 1.0 : noise_variance(model_);
  // coefficients are (theta, psi) ordered; parameters are stored in belief layout
  const auto& td = prior_.theta_dims();
  const auto& pd = prior_.psi_dims();
  std::vector<int> layout(td);
  layout.insert(layout.end(), pd.begin(), pd.end());
  for (const auto& g : groups_) {
    for (Eigen::Index c = 0; c < n; ++c) {
      double u = 0.0;
      for (std::size_t i = 0; i < layout.size(); ++i) u += g.a(i) * params(layout[i], c);
      if (bernoulli) {
        // log sigmoid(u) = min(u, 0) - log1p(exp(-|u|)), and likewise for -u
        const double l = std::log1p(std::exp(-std::abs(u)));
        total(c) += g.n1 * (std::min(u, 0.0) - l) + g.n0 * (std::min(-u, 0.0) - l);
      } else {
        total(c) += -0.5 * g.count * (kLog2Pi + std::log(s2)) -
                    0.5 * (g.sum_y2 - 2.0 * u * g.sum_y + g.count * u * u) / s2;
      }
    }
  }
  return total;
}

Eigen::VectorXd PosteriorTarget::log_density_columns(const Eigen::MatrixXd& params) const {
  return prior_.joint().log_pdf_columns(params) + log_likelihood_columns(params);
}

double PosteriorTarget::log_density(const Eigen::VectorXd& params) const {
  return log_density_columns(params)(0);
}

double effective_sample_size(const Eigen::VectorXd& weights) {
  const double s = weights.sum();
  if (!(s > 0.0)) return 0.0;
  return s * s / weights.squaredNorm();
}

GaussianBelief fit_variational(const Eigen::MatrixXd& samples, const Eigen::VectorXd& weights,
                               double inflation, const std::vector<int>& theta_dims) {
  if (samples.cols() != weights.size() || samples.cols() < 2)
    throw InvalidInput("fit_variational: need at least two weighted samples");
  if (!(inflation >= 1.0)) throw InvalidInput("fit_variational: inflation must be >= 1");
  if ((weights.array() < 0.0).any()) throw InvalidInput("fit_variational: negative weight");
  const double ess = effective_sample_size(weights);
  if (ess < 2.0) throw ResampleRequired("fit_variational: effective sample size below 2");
  const Eigen::VectorXd w = weights / weights.sum();
  const Eigen::VectorXd mean = samples * w;
  const Eigen::MatrixXd centered = samples.colwise() - mean;
  Eigen::MatrixXd cov = centered * w.asDiagonal() * centered.transpose();
  cov = (inflation * 0.5 * (cov + cov.transpose())).eval();
  // jitter floor, relative to the largest variance
  const double scale = std::max(cov.diagonal().maxCoeff(), 1e-300);
  double jitter = 0.0;
  for (int attempt = 0; attempt < 12; ++attempt) {
    const Eigen::MatrixXd trial = cov + jitter * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
    Eigen::LLT<Eigen::MatrixXd> llt(trial);
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0.0) {
      try {
        return GaussianBelief(mean, trial, theta_dims);
      } catch (const InvalidInput&) {
      }
    }
    jitter = (jitter == 0.0) ? 1e-12 * scale : jitter * 10.0;
  }
  throw ResampleRequired("fit_variational: covariance could not be made positive definite");
}

WeightedSampleSet refresh_samples(const PosteriorTarget& target, const GaussianBelief& variational,
                                  int n, Rng& rng) {
  if (n < 2) throw InvalidInput("refresh_samples: N must be at least 2");
  if (variational.dim() != target.prior().dim())
    throw InvalidInput("refresh_samples: proposal dimension mismatch");
  Eigen::MatrixXd samples = variational.joint().sample(rng, n);
  const Eigen::VectorXd logw =
      target.log_density_columns(samples) - variational.joint().log_pdf_columns(samples);
  Eigen::VectorXd w = normalize_log_weights(logw);
  WeightedSampleSet set{std::move(samples), std::move(w), variational, target};
  spdlog::debug("refresh_samples: N={} ESS={:.1f}", n, set.ess());
  return set;
}

WeightedSampleSet reweight(const WeightedSampleSet& set, const PosteriorTarget& target) {
  const Eigen::VectorXd logw = target.log_density_columns(set.samples) -
                               set.variational.joint().log_pdf_columns(set.samples);
  WeightedSampleSet out{set.samples, normalize_log_weights(logw), set.variational, target};
  spdlog::debug("reweight: ESS={:.1f}", out.ess());
  return out;
}

int default_inner_size(int n) {
  return std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(n)))));
}

NestedEstimator::NestedEstimator(const TaskModel& model, const WeightedSampleSet& set, int m,
                                 Rng& rng)
    : model_(model), n_(set.size()), m_(m), outer_w_(set.weights) {
  if (outcome_family(model_) != OutcomeFamily::Bernoulli)
    throw InvalidInput("nested estimator needs a Bernoulli-outcome model");
  if (m_ < 1) throw InvalidInput("nested estimator: M must be at least 1");
  const GaussianBelief& q = set.variational;
  if (q.theta_dim() != theta_dim(model_) || q.psi_dim() != psi_dim(model_))
    throw InvalidInput("nested estimator: proposal does not match the model");
  const auto& td = q.theta_dims();
  const auto& pd = q.psi_dims();
  const int kt = static_cast<int>(td.size());
  const int kp = static_cast<int>(pd.size());

  theta_.resize(kt, n_);
  for (int k = 0; k < kt; ++k) theta_.row(k) = set.samples.row(td[k]);
  inner_psi_.assign(kp, Eigen::ArrayXXd(m_, n_));
  for (int k = 0; k < kp; ++k) inner_psi_[k].row(0) = set.samples.row(pd[k]).array();

  // conditional proposal psi | theta_i under the variational Gaussian
  const PsiGivenTheta& reg = q.psi_given_theta();
  const Eigen::MatrixXd cond_mean =
      (reg.gain * (theta_.colwise() - reg.theta_mean)).colwise() + reg.psi_mean;
  Eigen::MatrixXd z(kp, n_);
  for (int j = 1; j < m_; ++j) {
    fill_standard_normal(rng, z.data(), static_cast<std::size_t>(z.size()));
    const Eigen::MatrixXd draw = cond_mean + reg.cond_chol.triangularView<Eigen::Lower>() * z;
    for (int k = 0; k < kp; ++k) inner_psi_[k].row(j) = draw.row(k).array();
  }

  // w(psi_j | theta_i) proportional to target(theta_i, psi_j) / p_hat(psi_j | theta_i)
  Eigen::MatrixXd params(q.dim(), static_cast<Eigen::Index>(m_) * n_);
  Eigen::MatrixXd resid(kp, static_cast<Eigen::Index>(m_) * n_);
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < m_; ++j) {
      const Eigen::Index c = static_cast<Eigen::Index>(i) * m_ + j;
      for (int k = 0; k < kt; ++k) params(td[k], c) = theta_(k, i);
      for (int k = 0; k < kp; ++k) {
        params(pd[k], c) = inner_psi_[k](j, i);
        resid(k, c) = inner_psi_[k](j, i) - cond_mean(k, i);
      }
    }
  }
  reg.cond_chol.triangularView<Eigen::Lower>().solveInPlace(resid);
  // constant terms of the conditional density cancel in the per-column normalization
  const Eigen::VectorXd log_prop = -0.5 * resid.colwise().squaredNorm().transpose();
  const Eigen::VectorXd log_tgt = set.target.log_density_columns(params);

  inner_w_.resize(m_, n_);
  for (int i = 0; i < n_; ++i) {
    const Eigen::Index base = static_cast<Eigen::Index>(i) * m_;
    double hi = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < m_; ++j) hi = std::max(hi, log_tgt(base + j) - log_prop(base + j));
    double total = 0.0;
    for (int j = 0; j < m_; ++j) {
      const double lw = log_tgt(base + j) - log_prop(base + j);
      const double v = std::isfinite(hi) ? std::exp(lw - hi) : (j == 0 ? 1.0 : 0.0);
      inner_w_(j, i) = v;
      total += v;
    }
    inner_w_.col(i) /= total;
  }
}

InformationEstimate NestedEstimator::estimate(const Design& x) const {
  const LinearPredictor lp = linear_predictor(model_, x);
  const Eigen::ArrayXd base = (lp.a_theta.transpose() * theta_).transpose().array();
  const std::size_t kp = inner_psi_.size();

  // per outer sample: own likelihood (row 0) and the inner-weighted conditional likelihood
  Eigen::ArrayXd own1(n_), own0(n_), num1(n_), num0(n_);
  Eigen::ArrayXd u(m_), e(m_), big(m_), p1(m_), p0(m_);
  for (int i = 0; i < n_; ++i) {
    u.setConstant(base(i));
    for (std::size_t k = 0; k < kp; ++k) u += lp.a_psi(k) * inner_psi_[k].col(i);
    // sigmoid(u) and sigmoid(-u) from a shared exp(-|u|)
    e = (-u.abs()).exp();
    big = 1.0 / (1.0 + e);
    p1 = (u >= 0.0).select(big, e * big);
    p0 = (u >= 0.0).select(e * big, big);
    own1(i) = p1(0);
    own0(i) = p0(0);
    num1(i) = std::max((inner_w_.col(i) * p1).sum(), kTiny);
    num0(i) = std::max((inner_w_.col(i) * p0).sum(), kTiny);
  }
  const Eigen::ArrayXd w = outer_w_.array();
  const double den1 = std::max((w * own1).sum(), kTiny);
  const double den0 = std::max((w * own0).sum(), kTiny);

  // p log(a/b) with the convention 0 log(.) = 0
  auto term = [](double p, double a, double b) {
    return p > 0.0 ? p * (std::log(std::max(a, kTiny)) - std::log(b)) : 0.0;
  };
  Eigen::ArrayXd c_etig(n_), c_eig(n_);
  for (int i = 0; i < n_; ++i) {
    c_etig(i) = term(own1(i), num1(i), den1) + term(own0(i), num0(i), den0);
    c_eig(i) = term(own1(i), own1(i), den1) + term(own0(i), own0(i), den0);
  }
  const Eigen::ArrayXd c_etsig = c_eig - c_etig;

  InformationEstimate est;
  est.etig = (w * c_etig).sum();
  est.eig = (w * c_eig).sum();
  est.etsig = est.eig - est.etig;
  auto se = [&](const Eigen::ArrayXd& c, double mean) {
    return std::sqrt((w.square() * (c - mean).square()).sum());
  };
  est.se_etig = se(c_etig, est.etig);
  est.se_eig = se(c_eig, est.eig);
  est.se_etsig = se(c_etsig, est.etsig);
  return est;
}

std::vector<InformationEstimate> NestedEstimator::estimate_all(const std::vector<Design>& xs) const {
  std::vector<InformationEstimate> out(xs.size());
  parallel_for(xs.size(), [&](std::size_t i) { out[i] = estimate(xs[i]); });
  return out;
}

InformationEstimate estimate_information(const TaskModel& model, const Design& x,
                                         const WeightedSampleSet& set, int m, Rng& rng) {
  return NestedEstimator(model, set, m, rng).estimate(x);
}

double estimate_etig(const TaskModel& model, const Design& x, const WeightedSampleSet& set, int m,
                     Rng& rng) {
  return estimate_information(model, x, set, m, rng).etig;
}

double estimate_etsig(const TaskModel& model, const Design& x, const WeightedSampleSet& set, int m,
                      Rng& rng) {
  return estimate_information(model, x, set, m, rng).etsig;
}

}  // namespace metaoed
