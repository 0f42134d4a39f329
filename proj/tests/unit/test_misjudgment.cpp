#include <doctest.h>

#include <cmath>
#include <iomanip>
#include <random>

#include "metaoed/errors.hpp"
#include "metaoed/harness.hpp"
#include "metaoed/misjudgment.hpp"
#include "metaoed/outcome.hpp"
#include "oracles.hpp"

using namespace metaoed;

namespace {

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

// rt for a linear-Gaussian model through the posterior density of theta*:
// E_{y ~ q}[log p(theta* | y) - log p(theta*)], with the theta-y joint written out by hand.
double rt_posterior_route(const GaussianBelief& b, const Eigen::VectorXd& a, double sigma2,
                          double theta_star, double true_mean) {
  const int t = b.theta_dims()[0];
  const Eigen::VectorXd sa = b.cov() * a;
  const double vy = a.dot(sa) + sigma2;
  const double my = a.dot(b.mean());
  const double c = sa(t);
  const double m0 = b.mean()(t), v0 = b.cov()(t, t);
  const double v1 = v0 - c * c / vy;
  const double log_prior = std::log(oracle::normal_pdf(theta_star, m0, v0));
  return oracle::normal_expectation(
      [&](double y) {
        const double m1 = m0 + c / vy * (y - my);
        return -0.5 * std::log(2 * oracle::kPi * v1) - 0.5 * (theta_star - m1) * (theta_star - m1) / v1 -
               log_prior;
      },
      true_mean, sigma2);
}

GaussianBelief random_path_belief(std::mt19937_64& gen) {
  return GaussianBelief(oracle::random_vector(4, gen), oracle::random_spd(4, gen, 0.5) * 3.0, {0});
}

}  // namespace

TEST_CASE("threat level names round-trip") {
  for (auto l : {ThreatLevel::NoThreat, ThreatLevel::Mild, ThreatLevel::Extreme})
    CHECK(parse_threat_level(to_string(l)) == l);
  CHECK_THROWS_AS(parse_threat_level("severe"), InvalidInput);
  CHECK(classify_threat(0.2, 0.1, 0.5) == ThreatLevel::NoThreat);
  CHECK(classify_threat(0.2, 0.2, 0.5) == ThreatLevel::NoThreat);
  CHECK(classify_threat(0.2, 0.3, 0.5) == ThreatLevel::Mild);
  CHECK(classify_threat(0.2, 0.5, 0.5) == ThreatLevel::Mild);
  CHECK(classify_threat(0.2, 0.6, 0.5) == ThreatLevel::Extreme);
}

TEST_CASE("outcome divergences against numerical integration") {
  CHECK(kl_divergence(UnivariateGaussian(0, 1), UnivariateGaussian(1, 1)) == doctest::Approx(0.5));
  CHECK(kl_divergence(BernoulliLaw{0.3, 0.7}, BernoulliLaw{0.6, 0.4}) ==
        doctest::Approx(oracle::bernoulli_kl(0.3, 0.6)).epsilon(1e-14));
  GaussianMixture mix;
  mix.weights = Eigen::Vector3d(0.2, 0.5, 0.3);
  mix.means = Eigen::Vector3d(-2.0, 0.5, 3.0);
  mix.variances = Eigen::Vector3d(0.5, 1.0, 2.0);
  auto mix_pdf = [&](double y) {
    double s = 0;
    for (int k = 0; k < 3; ++k) s += mix.weights(k) * oracle::normal_pdf(y, mix.means(k), mix.variances(k));
    return s;
  };
  CHECK(mix.log_pdf(1.3) == doctest::Approx(std::log(mix_pdf(1.3))).epsilon(1e-13));
  const double ref = oracle::normal_expectation(
      [&](double y) { return std::log(oracle::normal_pdf(y, 0.7, 1.5) / mix_pdf(y)); }, 0.7, 1.5, 20000);
  const double got = kl_divergence(UnivariateGaussian(0.7, 1.5), OutcomeLaw(mix));
  INFO(std::setprecision(17) << got << " vs " << ref);
  // the 96-node outcome rule carries about 1e-7 relative error for this mixture
  CHECK(got == doctest::Approx(ref).epsilon(1e-6));
  CHECK(entropy(UnivariateGaussian(0, 2)) == doctest::Approx(0.5 * std::log(2 * oracle::kPi * M_E * 2)));
}

TEST_CASE("rt matches the posterior-density route on linear-gaussian tasks") {
  const TaskModel m = make_model(Setting::PathAnalysis);
  std::mt19937_64 gen(31);
  for (int trial = 0; trial < 40; ++trial) {
    const GaussianBelief b = random_path_belief(gen);
    const Design& x = designs(m)[trial % designs(m).size()];
    const Eigen::VectorXd th = oracle::random_vector(1, gen, 3.0);
    const Eigen::VectorXd ps = oracle::random_vector(3, gen, 3.0);
    const double true_mean = x(0) * th(0) + x.tail(3).dot(ps);
    const double ref = rt_posterior_route(b, x, 1.0, th(0), true_mean);
    CHECK(rt(m, b, x, th, ps) == doctest::Approx(ref).epsilon(1e-8).scale(1.0));
  }
}

TEST_CASE("rt matches a two-dimensional grid on preference tasks") {
  const TaskModel m = make_model(Setting::Preference);
  const GaussianBelief b = default_prior(m);
  const double cases[][3] = {{8.27, -3.18, 1.0}, {0.3, 0.2, -4.0}, {-2.0, 1.5, 9.0}, {1.0, -0.5, 0.05}};
  for (const auto& c : cases) {
    const double th = c[0], ps = c[1], x = c[2];
    auto sig = [&](double t, double p) { return oracle::logistic(t - p * x); };
    const double q1 = sig(th, ps);
    const double cond1 = oracle::normal_expectation([&](double p) { return sig(th, p); }, 0.0, 1.0, 4000);
    const double pred1 = oracle::normal_expectation(
        [&](double t) {
          return oracle::normal_expectation([&](double p) { return sig(t, p); }, 0.0, 1.0, 600);
        },
        0.0, 16.0, 600);
    const double ref = q1 * std::log(cond1 / pred1) + (1 - q1) * std::log((1 - cond1) / (1 - pred1));
    INFO("theta=" << th << " psi=" << ps << " x=" << x);
    CHECK(rt(m, b, Design::Constant(1, x), scalar(th), scalar(ps)) == doctest::Approx(ref).epsilon(1e-7).scale(1.0));
  }
}

TEST_CASE("rt decomposes into predictive and conditional misjudgment") {
  std::mt19937_64 gen(41);
  const TaskModel path = make_model(Setting::PathAnalysis);
  const TaskModel pref = make_model(Setting::Preference);
  for (int trial = 0; trial < 30; ++trial) {
    const bool bern = trial % 2;
    const TaskModel& m = bern ? pref : path;
    const GaussianBelief b = bern ? default_prior(m) : random_path_belief(gen);
    const Design& x = designs(m)[trial % designs(m).size()];
    const Eigen::VectorXd th = oracle::random_vector(1, gen, 2.0);
    const Eigen::VectorXd ps = oracle::random_vector(psi_dim(m), gen, 2.0);
    Rng rng = make_stream(5, trial);
    const MisjudgmentReport r = misjudgment_report(m, b, x, th, ps, default_epsilon(b), rng);
    CHECK(r.rt_star == doctest::Approx(r.m_pred - r.m_l_star).epsilon(1e-9).scale(1.0));
    CHECK(r.m_pred >= -1e-12);
    CHECK(r.m_l_star >= -1e-12);
    CHECK(r.generic_upper ==
          doctest::Approx(r.outside_mass * (r.m_pred_tilde - r.m_l_star)).epsilon(1e-12).scale(1.0));
    CHECK(r.inside_mass + r.outside_mass == doctest::Approx(1.0));
    CHECK(r.level == classify_threat(r.m_pred, r.m_l_star, r.e_m_l));
  }
}

TEST_CASE("predictive misjudgment never exceeds its conditional average") {
  std::mt19937_64 gen(43);
  const TaskModel m = make_model(Setting::PathAnalysis);
  for (int trial = 0; trial < 50; ++trial) {
    const GaussianBelief b = random_path_belief(gen);
    const Design& x = designs(m)[trial];
    Rng rng = make_stream(2, trial);
    const MisjudgmentContext ctx(m, b, x, 2000, rng);
    const OutcomeLaw q = ctx.truth(oracle::random_vector(1, gen, 3.0), oracle::random_vector(3, gen, 3.0));
    const auto [mean, se] = ctx.expected_m_l(q);
    CHECK(ctx.m_pred(q) <= mean + 3 * se);
  }
}

TEST_CASE("default epsilon scales with the smallest theta standard deviation") {
  const GaussianBelief b = default_prior(make_model(Setting::Preference));
  CHECK(default_epsilon(b) == doctest::Approx(0.05 * 4.0));
}

TEST_CASE("mixing toward the truth shrinks conditional misjudgment") {
  const TaskModel m = make_model(Setting::Preference);
  const GaussianBelief b = default_prior(m);
  const TaskEnvironment env = reference_generating(Setting::Preference, ThreatLevel::Extreme);
  const int xi = xetig_index(m, b);
  Rng rng = make_stream(1, 1);
  const std::vector<double> alphas = {0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0};
  const auto curve = psi_knowledge_curve(m, b, designs(m)[xi], env.theta_star, env.psi_star, alphas, rng);
  REQUIRE(curve.size() == alphas.size());
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].second <= curve[i - 1].second + 1e-12);
  CHECK(std::abs(curve.back().second) < 1e-12);
  Rng rng2 = make_stream(1, 1);
  const double m_l = misjudgment_report(m, b, designs(m)[xi], env.theta_star, env.psi_star,
                                        default_epsilon(b), rng2).m_l_star;
  CHECK(curve.front().second == doctest::Approx(m_l).epsilon(1e-10));
}

TEST_CASE("mixing curve requires a threatening task") {
  const TaskModel m = make_model(Setting::PathAnalysis);
  const GaussianBelief b = default_prior(m);
  const TaskEnvironment env = reference_generating(Setting::PathAnalysis, ThreatLevel::NoThreat);
  const int xi = xetig_index(m, b);
  Rng rng = make_stream(1, 1);
  CHECK_THROWS_AS(psi_knowledge_curve(m, b, designs(m)[xi], env.theta_star, env.psi_star, {0.0, 1.0}, rng),
                  PreconditionFailed);
}

TEST_CASE("rt is unbounded below in the task-specific direction") {
  const TaskModel m = make_model(Setting::PathAnalysis);
  const GaussianBelief b = default_prior(m);
  const Design& x = designs(m)[xetig_index(m, b)];
  const auto sweep = unboundedness_sweep(m, b, x, Eigen::VectorXd::Zero(1), {0, 10, 100, 1000});
  REQUIRE(sweep.size() == 4);
  CHECK(sweep[3].second < sweep[2].second);
  CHECK(sweep[2].second < sweep[1].second);
  CHECK(sweep[3].second < -100.0);
}

TEST_CASE("smoothness check implies the mixed bound") {
  std::mt19937_64 gen(47);
  const TaskModel m = make_model(Setting::PathAnalysis);
  int holds = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const GaussianBelief b = random_path_belief(gen);
    const Design& x = designs(m)[trial];
    const Eigen::VectorXd th = b.theta_mean() + oracle::random_vector(1, gen, 0.5);
    const Eigen::VectorXd ps = oracle::random_vector(3, gen, 2.0);
    const double eps = default_epsilon(b);
    Rng r1 = make_stream(3, trial);
    const AssumptionCheck chk = check_assumption_smoothness(m, b, x, th, ps, eps, 2000, r1);
    if (!chk.holds) continue;
    ++holds;
    Rng r2 = make_stream(3, trial);
    const MisjudgmentReport r = misjudgment_report(m, b, x, th, ps, eps, r2);
    const double bound = r.inside_mass * r.m_l_star + r.outside_mass * r.m_pred_tilde;
    CHECK(r.m_pred <= bound + 3 * (chk.se + r.m_pred_tilde_se * r.outside_mass) + 1e-9);
  }
  CHECK(holds > 0);
}

TEST_CASE("threat atlas is reproducible") {
  const TaskModel m = make_model(Setting::Preference);
  const GaussianBelief b = default_prior(m);
  const auto a = threat_atlas(m, b, xetig_index, 50, 9);
  const auto c = threat_atlas(m, b, xetig_index, 50, 9);
  REQUIRE(a.size() == 50);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].theta == c[i].theta);
    CHECK(a[i].rt_at_xetig == c[i].rt_at_xetig);
    CHECK(a[i].max_rt >= a[i].rt_at_xetig);
  }
}

TEST_CASE("prior ETIG matches the closed form and a grid") {
  const TaskModel path = make_model(Setting::PathAnalysis);
  Design x(4);
  x << 1, 0, 0, 0;
  CHECK(prior_etig(path, default_prior(path), x) == doctest::Approx(0.5 * std::log(11.0)));
  // preference: I(theta; y) = H(y) - E_theta H(y | theta) on a grid
  const TaskModel pref = make_model(Setting::Preference);
  const double xv = 1.0;
  auto h = [](double p) { return -(p * std::log(p) + (1 - p) * std::log(1 - p)); };
  auto cond = [&](double t) {
    return oracle::normal_expectation([&](double p) { return oracle::logistic(t - p * xv); }, 0.0, 1.0, 800);
  };
  const double marg = oracle::normal_expectation(cond, 0.0, 16.0, 800);
  const double ref = h(marg) - oracle::normal_expectation([&](double t) { return h(cond(t)); }, 0.0, 16.0, 800);
  CHECK(prior_etig(pref, default_prior(pref), Design::Constant(1, xv)) == doctest::Approx(ref).epsilon(1e-6));
}
