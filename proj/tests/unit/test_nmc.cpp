#include <doctest.h>

#include <cmath>
#include <vector>

#include "metaoed/errors.hpp"
#include "metaoed/harness.hpp"
#include "metaoed/nmc.hpp"
#include "oracles.hpp"

using namespace metaoed;

TEST_CASE("effective sample size bounds") {
  CHECK(effective_sample_size(Eigen::VectorXd::Constant(10, 0.1)) == doctest::Approx(10.0));
  Eigen::VectorXd w = Eigen::VectorXd::Zero(10);
  w(3) = 1;
  CHECK(effective_sample_size(w) == doctest::Approx(1.0));
  CHECK(effective_sample_size(Eigen::VectorXd::Zero(4)) == 0.0);
}

TEST_CASE("variational fit reproduces weighted moments") {
  Rng rng = make_stream(3, 0);
  const Gaussian g(Eigen::Vector2d(1.0, -2.0), (Eigen::Matrix2d() << 2, 0.3, 0.3, 0.5).finished());
  const Eigen::MatrixXd xs = g.sample(rng, 5000);
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(5000, 1.0 / 5000);
  const GaussianBelief fit = fit_variational(xs, w, 1.0, {0});
  const Eigen::VectorXd mean = xs.rowwise().mean();
  const Eigen::MatrixXd c = xs.colwise() - mean;
  CHECK((fit.mean() - mean).norm() < 1e-12);
  CHECK((fit.cov() - c * c.transpose() / 5000).norm() < 1e-10);
  const GaussianBelief wide = fit_variational(xs, w, 1.44, {0});
  CHECK((wide.cov() - 1.44 * fit.cov()).norm() < 1e-10);

  Eigen::VectorXd spike = Eigen::VectorXd::Zero(5000);
  spike(0) = 1.0;
  CHECK_THROWS_AS(fit_variational(xs, spike, 1.0, {0}), ResampleRequired);
  CHECK_THROWS_AS(fit_variational(xs, w, 0.9, {0}), InvalidInput);
}

TEST_CASE("grouped likelihood equals the per-observation sum") {
  const TaskModel m = make_model(Setting::Preference);
  const GaussianBelief prior = default_prior(m);
  std::vector<Observation> obs;
  const auto& ds = designs(m);
  for (int k = 0; k < 15; ++k) obs.push_back({ds[k % 4 * 3], static_cast<double>((k * 7) % 3 == 0)});
  const PosteriorTarget target(prior, m, obs);
  Rng rng = make_stream(4, 4);
  const Eigen::MatrixXd pts = prior.joint().sample(rng, 200);
  const Eigen::VectorXd got = target.log_likelihood_columns(pts);
  for (int c = 0; c < pts.cols(); ++c) {
    double ref = 0;
    for (const auto& o : obs) {
      const double u = pts(0, c) - pts(1, c) * o.x(0);
      ref += oracle::log_logistic(o.y == 1.0 ? u : -u);
    }
    CHECK(got(c) == doctest::Approx(ref).epsilon(1e-10));
  }
  CHECK_THROWS_AS(PosteriorTarget(prior, m, {{ds[0], 0.5}}), InvalidInput);
}

TEST_CASE("gaussian-outcome target matches the conjugate log density") {
  const TaskModel m = make_model(Setting::PathAnalysis);
  const GaussianBelief prior = default_prior(m);
  const std::vector<Observation> obs = {{designs(m)[0], 1.3}, {designs(m)[0], -0.2}, {designs(m)[5], 4.0}};
  const PosteriorTarget target(prior, m, obs);
  Rng rng = make_stream(6, 6);
  const Eigen::MatrixXd pts = prior.joint().sample(rng, 20);
  const Eigen::VectorXd got = target.log_density_columns(pts);
  for (int c = 0; c < pts.cols(); ++c) {
    double ref = prior.log_pdf(pts.col(c));
    for (const auto& o : obs)
      {
        const double r = o.y - o.x.dot(pts.col(c));
        ref += -0.5 * std::log(2 * oracle::kPi) - 0.5 * r * r;
      }
    CHECK(got(c) == doctest::Approx(ref).epsilon(1e-10));
  }
}

TEST_CASE("reweighting against the proposal itself gives uniform weights") {
  const TaskModel m = make_model(Setting::Preference);
  const GaussianBelief prior = default_prior(m);
  const PosteriorTarget target(prior, m);
  Rng rng = make_stream(1, 1);
  const WeightedSampleSet set = refresh_samples(target, prior, 1000, rng);
  CHECK(set.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((set.weights.array() - 1e-3).abs().maxCoeff() < 1e-12);
  CHECK(set.ess() == doctest::Approx(1000.0));
  const WeightedSampleSet again = reweight(set, target);
  CHECK((again.weights - set.weights).norm() < 1e-15);
}

TEST_CASE("nested estimates decompose exactly on a shared reservoir") {
  const TaskModel m = make_model(Setting::Preference);
  const GaussianBelief prior = default_prior(m);
  const PosteriorTarget target(prior, m, {{designs(m)[12], 1.0}, {designs(m)[3], 0.0}});
  Rng rng = make_stream(2, 1);
  const WeightedSampleSet set = refresh_samples(target, fit_variational(prior.joint().sample(rng, 4000),
                                                                        Eigen::VectorXd::Ones(4000), 1.44, {0}),
                                                2000, rng);
  const NestedEstimator est(m, set, 40, rng);
  for (const auto& v : est.estimate_all(designs(m))) {
    CHECK(v.eig - v.etig - v.etsig == 0.0);
    CHECK(v.se_etig >= 0.0);
    CHECK(std::isfinite(v.eig));
  }
}

TEST_CASE("nested ETIG agrees with a grid oracle") {
  const TaskModel m = make_model(Setting::Preference);
  const GaussianBelief prior = default_prior(m);
  Rng rng = make_stream(12, 0);
  const WeightedSampleSet set = refresh_samples(PosteriorTarget(prior, m), prior, 10000, rng);
  const NestedEstimator est(m, set, 100, rng);
  for (int i : {0, 5, 9, 10, 14, 19}) {
    const Design& x = designs(m)[i];
    const oracle::GridInfo ref = oracle::grid_information(16.0, 1.0, {}, x(0));
    const InformationEstimate v = est.estimate(x);
    INFO("design " << x(0));
    CHECK(std::abs(v.etig - ref.etig) <= 0.05);
    CHECK(std::abs(v.eig - ref.eig) <= 0.05);
  }
}

TEST_CASE("nested ETIG after observations agrees with a grid oracle") {
  const TaskModel m = make_model(Setting::Preference);
  const GaussianBelief prior = default_prior(m);
  const auto& ds = designs(m);
  const std::vector<Observation> obs = {{ds[9], 1.0}, {ds[10], 0.0}, {ds[9], 1.0}};
  const PosteriorTarget target(prior, m, obs);
  Rng rng = make_stream(13, 0);
  const WeightedSampleSet first = refresh_samples(target, prior, 10000, rng);
  const GaussianBelief proposal = fit_variational(first.samples, first.weights, 1.44, {0});
  const WeightedSampleSet set = refresh_samples(target, proposal, 10000, rng);
  const NestedEstimator est(m, set, 100, rng);
  for (int i : {8, 9, 10, 11}) {
    std::vector<std::pair<double, double>> pairs;
    for (const auto& o : obs) pairs.emplace_back(o.x(0), o.y);
    const oracle::GridInfo ref = oracle::grid_information(16.0, 1.0, pairs, ds[i](0));
    CHECK(std::abs(est.estimate(ds[i]).etig - ref.etig) <= 0.05);
  }
}

TEST_CASE("nested estimator rejects gaussian-outcome models") {
  const TaskModel m = make_model(Setting::PathAnalysis);
  const GaussianBelief prior = default_prior(m);
  Rng rng = make_stream(1, 0);
  const WeightedSampleSet set = refresh_samples(PosteriorTarget(prior, m), prior, 100, rng);
  CHECK_THROWS_AS(NestedEstimator(m, set, 10, rng), InvalidInput);
  CHECK(default_inner_size(10000) == 100);
  CHECK(default_inner_size(99) == 9);
}

TEST_CASE("self-normalized weights recover the target mean") {
  const TaskModel toy = Toy{1.0, 1.0, {Design::Constant(1, 1.0)}};
  const GaussianBelief target_prior(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2), {0});
  const GaussianBelief proposal(Eigen::VectorXd::Zero(2), 2.0 * Eigen::MatrixXd::Identity(2, 2), {0});
  Rng rng = make_stream(21, 0);
  const WeightedSampleSet set = refresh_samples(PosteriorTarget(target_prior, toy), proposal, 10000, rng);
  const Eigen::VectorXd mean = set.samples * set.weights;
  CHECK(std::abs(mean(0)) < 6.0 / std::sqrt(set.ess()));
  // E[theta^2] = 1 under the target
  const double second = (set.samples.row(0).array().square().matrix() * set.weights)(0);
  CHECK(second == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("a huge design carries almost no transferable information") {
  const TaskModel m = make_model(Setting::Preference);
  const GaussianBelief prior = default_prior(m);
  Rng rng = make_stream(14, 0);
  const WeightedSampleSet set = refresh_samples(PosteriorTarget(prior, m), prior, 10000, rng);
  const NestedEstimator est(m, set, 100, rng);
  CHECK(est.estimate(Design::Constant(1, 1e4)).etig <= 0.05);
  CHECK(oracle::grid_information(16.0, 1.0, {}, 1e4).etig <= 0.05);
}

TEST_CASE("ETSIG vanishes when psi is known and absorbs everything when theta is known") {
  const TaskModel m = make_model(Setting::Preference);
  const Design x = Design::Constant(1, 1.0);
  for (int known : {0, 1}) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2, 2);
    s(0, 0) = known == 1 ? 16.0 : 1e-8;
    s(1, 1) = known == 1 ? 1e-8 : 1.0;
    const GaussianBelief b(Eigen::VectorXd::Zero(2), s, {0});
    Rng rng = make_stream(15, known);
    const WeightedSampleSet set = refresh_samples(PosteriorTarget(b, m), b, 10000, rng);
    const InformationEstimate v = NestedEstimator(m, set, 100, rng).estimate(x);
    if (known == 1) CHECK(std::abs(v.etsig) <= 3 * v.se_etsig + 1e-6);
    else CHECK(std::abs(v.etsig - v.eig) <= 3 * v.se_etsig);
  }
}

TEST_CASE("nested ETSIG agrees with the grid oracle") {
  const TaskModel m = make_model(Setting::Preference);
  const GaussianBelief prior = default_prior(m);
  Rng rng = make_stream(16, 0);
  const WeightedSampleSet set = refresh_samples(PosteriorTarget(prior, m), prior, 10000, rng);
  const InformationEstimate v = NestedEstimator(m, set, 100, rng).estimate(Design::Constant(1, 1.0));
  const oracle::GridInfo ref = oracle::grid_information(16.0, 1.0, {}, 1.0);
  CHECK(std::abs(v.etsig - (ref.eig - ref.etig)) <= 0.05);
}

TEST_CASE("inner-sample bias shrinks with M") {
  const TaskModel m = make_model(Setting::Preference);
  const GaussianBelief prior = default_prior(m);
  const Design x = Design::Constant(1, 1.0);
  const double ref = oracle::grid_information(16.0, 1.0, {}, 1.0).etig;
  double err10 = 0, err100 = 0;
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng = make_stream(100 + seed, 0);
    const WeightedSampleSet set = refresh_samples(PosteriorTarget(prior, m), prior, 10000, rng);
    Rng r10 = make_stream(100 + seed, 1), r100 = make_stream(100 + seed, 1);
    err10 += std::abs(NestedEstimator(m, set, 10, r10).estimate(x).etig - ref) / 20;
    err100 += std::abs(NestedEstimator(m, set, 100, r100).estimate(x).etig - ref) / 20;
  }
  CHECK(err100 <= err10);
}
