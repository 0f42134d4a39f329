#pragma once

#include <Eigen/Dense>

namespace metaoed {

struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

// Gauss-Hermite rule for the standard normal weight: E[f(Z)] ~ sum w_i f(z_i), sum w_i = 1.
// Rules are built once per size (Golub-Welsch) and cached.
const QuadratureRule& gauss_hermite_normal(int n);
// Gauss-Legendre rule on [-1, 1].
const QuadratureRule& gauss_legendre(int n);

double normal_cdf(double z);
double sigmoid(double u);
double log_sigmoid(double u);

struct BernoulliProbs {
  double p1 = 0.5;
  double p0 = 0.5;
};

// E[sigmoid(U)] and E[sigmoid(-U)] for U ~ N(mean, sd^2). Both tails are computed directly
// rather than as complements, so a tiny probability keeps its relative precision.
BernoulliProbs logistic_normal(double mean, double sd);

}  // namespace metaoed
