#pragma once

// Reference computations for the unit tests. Nothing here calls into the library's numerics:
// integrals are brute-force grids and matrix identities go through determinants.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

inline constexpr double kPi = 3.14159265358979323846;

inline Eigen::MatrixXd random_spd(int d, std::mt19937_64& gen, double ridge = 0.3) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = n(gen);
  return a * a.transpose() / d + ridge * Eigen::MatrixXd::Identity(d, d);
}

inline Eigen::VectorXd random_vector(int d, std::mt19937_64& gen, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = n(gen);
  return v;
}

inline double normal_pdf(double x, double m, double v) {
  return std::exp(-0.5 * (x - m) * (x - m) / v) / std::sqrt(2.0 * kPi * v);
}

inline double logistic(double u) { return u >= 0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }

inline double log_logistic(double u) { return u >= 0 ? -std::log1p(std::exp(-u)) : u - std::log1p(std::exp(u)); }

// Composite Simpson rule on [lo, hi] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, int panels = 4000) {
  if (panels % 2) ++panels;
  const double h = (hi - lo) / panels;
  double s = f(lo) + f(hi);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
  return s * h / 3.0;
}

// E[f(Z)] for Z ~ N(m, v), integrated over +-12 sd.
inline double normal_expectation(const std::function<double(double)>& f, double m, double v,
                                 int panels = 4000) {
  const double s = std::sqrt(v);
  return simpson([&](double z) { return f(z) * normal_pdf(z, m, v); }, m - 12 * s, m + 12 * s, panels);
}

inline double bernoulli_kl(double q1, double p1) {
  auto t = [](double a, double b) { return a > 0 ? a * std::log(a / b) : 0.0; };
  return t(q1, p1) + t(1 - q1, 1 - p1);
}

struct GridInfo {
  double eig = 0.0;
  double etig = 0.0;
};

// Preference-model information values on a dense (theta, psi) grid under the posterior
// given `obs`, starting from the diagonal prior N(0, diag(vt, vp)).
// Observations are (design, outcome) pairs.
inline GridInfo grid_information(double vt, double vp,
                                 const std::vector<std::pair<double, double>>& obs, double x,
                                 int n = 400) {
  const double lt = 8 * std::sqrt(vt), lp = 8 * std::sqrt(vp);
  std::vector<double> ts(n), ps(n);
  for (int i = 0; i < n; ++i) {
    ts[i] = -lt + 2 * lt * (i + 0.5) / n;
    ps[i] = -lp + 2 * lp * (i + 0.5) / n;
  }
  std::vector<double> logw(n * n);
  double hi = -1e300;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double l = -0.5 * ts[i] * ts[i] / vt - 0.5 * ps[j] * ps[j] / vp;
      for (const auto& o : obs) {
        const double u = ts[i] - ps[j] * o.first;
        l += oracle::log_logistic(o.second == 1.0 ? u : -u);
      }
      logw[i * n + j] = l;
      hi = std::max(hi, l);
    }
  double total = 0;
  for (double& l : logw) total += (l = std::exp(l - hi));
  auto h = [](double p) {
    double s = 0;
    if (p > 0) s -= p * std::log(p);
    if (p < 1) s -= (1 - p) * std::log(1 - p);
    return s;
  };
  double marg = 0, cond_h = 0, full_h = 0;
  for (int i = 0; i < n; ++i) {
    double wt = 0, pt = 0;
    for (int j = 0; j < n; ++j) {
      const double w = logw[i * n + j] / total;
      const double p = oracle::logistic(ts[i] - ps[j] * x);
      wt += w;
      pt += w * p;
      full_h += w * h(p);
    }
    marg += pt;
    if (wt > 0) cond_h += wt * h(pt / wt);
  }
  return {h(marg) - full_h, h(marg) - cond_h};
}

// rt for y ~ N(a . params, sigma2) under a Gaussian belief with a scalar Theta at index t:
// E_{y ~ N(true_mean, sigma2)}[log p(theta* | y) - log p(theta*)] written out in closed form.
inline double rt_linear_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, int t,
                                 const Eigen::VectorXd& a, double sigma2, double theta_star,
                                 double true_mean) {
  const Eigen::VectorXd sa = cov * a;
  const double vy = a.dot(sa) + sigma2;
  const double c = sa(t);
  const double m0 = mean(t), v0 = cov(t, t);
  const double v1 = v0 - c * c / vy;
  const double m1 = m0 + c / vy * (true_mean - a.dot(mean));
  const double spread = (theta_star - m1) * (theta_star - m1) + (c / vy) * (c / vy) * sigma2;
  return -0.5 * std::log(v1 / v0) - 0.5 * spread / v1 + 0.5 * (theta_star - m0) * (theta_star - m0) / v0;
}

// rt for the preference likelihood sigmoid(theta - psi x) under a bivariate Gaussian belief
// over (theta, psi), by one-dimensional Simpson quadrature of both predictive probabilities.
inline double rt_preference(const Eigen::Vector2d& mean, const Eigen::Matrix2d& cov, double x,
                            double theta_star, double psi_star, int panels = 20000) {
  const double gain = cov(0, 1) / cov(0, 0);
  const double cm = mean(1) + gain * (theta_star - mean(0));
  const double cv = cov(1, 1) - gain * cov(0, 1);
  const double cond1 = normal_expectation([&](double p) { return logistic(theta_star - p * x); }, cm, cv, panels);
  const double cond0 = normal_expectation([&](double p) { return logistic(p * x - theta_star); }, cm, cv, panels);
  const double um = mean(0) - x * mean(1);
  const double uv = cov(0, 0) + x * x * cov(1, 1) - 2 * x * cov(0, 1);
  const double pred1 = normal_expectation(logistic, um, uv, panels);
  const double pred0 = normal_expectation([](double u) { return logistic(-u); }, um, uv, panels);
  const double q1 = logistic(theta_star - psi_star * x);
  const double q0 = logistic(psi_star * x - theta_star);
  auto term = [](double q, double a, double b) { return q > 0 ? q * std::log(a / b) : 0.0; };
  return term(q1, cond1, pred1) + term(q0, cond0, pred0);
}

}  // namespace oracle
