#include <doctest.h>

#include <cmath>

#include "metaoed/errors.hpp"
#include "metaoed/harness.hpp"
#include "metaoed/models.hpp"
#include "oracles.hpp"

using namespace metaoed;

namespace {
Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(v.size());
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}
}  // namespace

TEST_CASE("preference likelihood is logistic in theta - psi x") {
  const TaskModel m = make_model(Setting::Preference);
  const Design x = vec({2.0});
  CHECK(likelihood(m, x, vec({std::log(99999.0)}), vec({0.0}), 1.0) ==
        doctest::Approx(0.99999).epsilon(1e-12));
  CHECK(likelihood(m, x, vec({1.0}), vec({0.5}), 1.0) == doctest::Approx(0.5));
  for (double th : {-3.0, 0.2, 8.27}) {
    for (double ps : {-3.18, 0.0, 1.4}) {
      const double ref = 1.0 / (1.0 + std::exp(ps * x(0) - th));
      CHECK(likelihood(m, x, vec({th}), vec({ps}), 1.0) == doctest::Approx(ref).epsilon(1e-13));
      CHECK(likelihood(m, x, vec({th}), vec({ps}), 0.0) == doctest::Approx(1 - ref).epsilon(1e-13));
    }
  }
  CHECK_THROWS_AS(likelihood(m, x, vec({0.0}), vec({0.0}), 0.5), InvalidInput);
}

TEST_CASE("path-analysis likelihood is a gaussian in the design inner product") {
  const TaskModel m = make_model(Setting::PathAnalysis);
  const Design x = vec({0.3, 1.0, -2.0, 0.5});
  const Eigen::VectorXd th = vec({2.0}), ps = vec({1.0, 0.5, -1.0});
  const double mean = 0.3 * 2.0 + 1.0 - 1.0 - 0.5;
  CHECK(likelihood(m, x, th, ps, 1.7) == doctest::Approx(oracle::normal_pdf(1.7, mean, 1.0)).epsilon(1e-13));
  CHECK(log_likelihood(m, x, th, ps, 1.7) == doctest::Approx(std::log(oracle::normal_pdf(1.7, mean, 1.0))));
}

TEST_CASE("toy outcome mean is c x (psi - theta)") {
  const TaskModel m = Toy{2.0, 0.5, {vec({1.0})}};
  const LinearPredictor lp = linear_predictor(m, vec({3.0}));
  CHECK(lp.eval(vec({1.0}), vec({4.0})) == doctest::Approx(2.0 * 3.0 * (4.0 - 1.0)));
}

TEST_CASE("preference grid spans the design range") {
  const auto g = preference_design_grid(5);
  const double expected[] = {-79, -39, 1, 41, 81};
  REQUIRE(g.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(g[i](0) == doctest::Approx(expected[i]));
  for (int n = 2; n <= 160; ++n) {
    const auto h = preference_design_grid(n);
    REQUIRE(static_cast<int>(h.size()) == n);
    CHECK(h.front()(0) == -79.0);
    CHECK(h.back()(0) == 81.0);
    for (int i = 1; i < n; ++i) CHECK(h[i](0) - h[i - 1](0) == doctest::Approx(160.0 / (n - 1)));
  }
  CHECK_THROWS_AS(preference_design_grid(1), InvalidInput);
}

TEST_CASE("path-analysis designs are reproducible and shaped") {
  const auto a = generate_path_analysis_designs(100, 3);
  const auto b = generate_path_analysis_designs(100, 3);
  const auto c = generate_path_analysis_designs(100, 4);
  REQUIRE(a.size() == 100);
  double mean_z = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    CHECK(a[i].size() == 4);
    mean_z += a[i].tail(3).mean() / 100.0;
  }
  CHECK(a[0] != c[0]);
  CHECK(mean_z == doctest::Approx(10.0).epsilon(0.02));
}

TEST_CASE("default priors") {
  const GaussianBelief p = default_prior(make_model(Setting::PathAnalysis));
  CHECK(p.cov().isApprox(10.0 * Eigen::MatrixXd::Identity(4, 4)));
  const GaussianBelief q = default_prior(make_model(Setting::Preference));
  CHECK(q.theta_cov()(0, 0) == 16.0);
  CHECK(q.psi_cov()(0, 0) == 1.0);
  CHECK(q.theta_dims() == std::vector<int>{0});
}

TEST_CASE("validation rejects malformed models and environments") {
  CHECK_THROWS_AS(validate(TaskModel(PathAnalysis{1.0, {}})), InvalidInput);
  CHECK_THROWS_AS(validate(TaskModel(PathAnalysis{0.0, {vec({1, 2, 3, 4})}})), InvalidInput);
  CHECK_THROWS_AS(validate(TaskModel(PathAnalysis{1.0, {vec({1, 2})}})), InvalidInput);
  const TaskModel pref = make_model(Setting::Preference);
  CHECK_THROWS_AS(validate(pref, TaskEnvironment{vec({1.0}), vec({1.0, 2.0})}), InvalidInput);
  CHECK_THROWS_AS(validate(pref, TaskEnvironment{vec({NAN}), vec({1.0})}), InvalidInput);
  CHECK_NOTHROW(validate(pref, TaskEnvironment{vec({1.0}), vec({1.0})}));
}

TEST_CASE("bernoulli sampling frequency matches the likelihood") {
  const TaskModel m = make_model(Setting::Preference);
  Rng rng = make_stream(1, 0);
  const Design x = vec({0.5});
  const Eigen::VectorXd th = vec({0.4}), ps = vec({-1.0});
  const double p = likelihood(m, x, th, ps, 1.0);
  double hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) hits += sample_outcome(m, x, th, ps, rng);
  CHECK(std::abs(hits / n - p) < 4 * std::sqrt(p * (1 - p) / n));
}
