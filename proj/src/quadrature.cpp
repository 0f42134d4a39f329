#include "metaoed/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "metaoed/errors.hpp"

namespace metaoed {

namespace {

// Golub-Welsch: nodes are eigenvalues of the symmetric Jacobi matrix, weights are
// mass * (first eigenvector component)^2.
QuadratureRule golub_welsch(const Eigen::VectorXd& offdiag, double mass) {
  const int n = static_cast<int>(offdiag.size()) + 1;
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k + 1 < n; ++k) {
    j(k, k + 1) = offdiag(k);
    j(k + 1, k) = offdiag(k);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(j);
  QuadratureRule rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = mass * eig.eigenvectors().row(0).transpose().array().square();
  return rule;
}

using Builder = QuadratureRule (*)(int);

const QuadratureRule& cached(std::map<int, std::unique_ptr<QuadratureRule>>& cache, std::mutex& mu,
                             int n, Builder build) {
  if (n < 1) throw InvalidInput("quadrature rule needs at least one node");
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, std::make_unique<QuadratureRule>(build(n))).first;
  return *it->second;
}

QuadratureRule build_hermite(int n) {
  if (n == 1) return {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
  Eigen::VectorXd off(n - 1);
  for (int k = 1; k < n; ++k) off(k - 1) = std::sqrt(static_cast<double>(k));
  return golub_welsch(off, 1.0);
}

QuadratureRule build_legendre(int n) {
  if (n == 1) return {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 2.0)};
  Eigen::VectorXd off(n - 1);
  for (int k = 1; k < n; ++k) off(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  return golub_welsch(off, 2.0);
}

constexpr int kHermiteNodes = 64;
constexpr int kLegendreNodes = 200;
constexpr double kTailCut = 40.0;  // sigmoid(-40) ~ 4e-18

}  // namespace

const QuadratureRule& gauss_hermite_normal(int n) {
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  static std::mutex mu;
  return cached(cache, mu, n, build_hermite);
}

const QuadratureRule& gauss_legendre(int n) {
  static std::map<int, std::unique_ptr<QuadratureRule>> cache;
  static std::mutex mu;
  return cached(cache, mu, n, build_legendre);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double log_sigmoid(double u) {
  if (u >= 0.0) return -std::log1p(std::exp(-u));
  return u - std::log1p(std::exp(u));
}

BernoulliProbs logistic_normal(double mean, double sd) {
  if (!std::isfinite(mean) || !(sd >= 0.0) || !std::isfinite(sd))
    throw InvalidInput("logistic_normal: invalid parameters");
  if (sd < 1e-12) return {sigmoid(mean), sigmoid(-mean)};

  if (sd <= 1.0) {
    // sigmoid is analytic in a strip of half-width pi, so a modest rule is exact to round-off
    const QuadratureRule& gh = gauss_hermite_normal(kHermiteNodes);
    double p1 = 0.0, p0 = 0.0;
    for (int i = 0; i < gh.nodes.size(); ++i) {
      const double u = mean + sd * gh.nodes(i);
      p1 += gh.weights(i) * sigmoid(u);
      p0 += gh.weights(i) * sigmoid(-u);
    }
    return {p1, p0};
  }

  // Wide spread: sigmoid(u) = 1{u > 0} + g(u), with g odd and decaying like exp(-|u|).
  // The step part is a normal cdf; the remainder is integrated on [-L, 0] and [0, L].
  const QuadratureRule& gl = gauss_legendre(kLegendreNodes);
  const double half = 0.5 * kTailCut;
  const double inv_var = 1.0 / (sd * sd);
  const double norm = 1.0 / (sd * std::sqrt(2.0 * M_PI));
  double a = 0.0;  // integral over u < 0 of sigmoid(u) N(u)
  double b = 0.0;  // integral over u > 0 of sigmoid(-u) N(u)
  for (int i = 0; i < gl.nodes.size(); ++i) {
    const double w = gl.weights(i) * half;
    const double un = -half + half * gl.nodes(i);
    const double up = half + half * gl.nodes(i);
    const double dn = un - mean, dp = up - mean;
    a += w * sigmoid(un) * norm * std::exp(-0.5 * dn * dn * inv_var);
    b += w * sigmoid(-up) * norm * std::exp(-0.5 * dp * dp * inv_var);
  }
  const double p1 = normal_cdf(mean / sd) + a - b;
  const double p0 = normal_cdf(-mean / sd) + b - a;
  return {std::clamp(p1, 0.0, 1.0), std::clamp(p0, 0.0, 1.0)};
}

}  // namespace metaoed
