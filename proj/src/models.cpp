#include "metaoed/models.hpp"

#include <cmath>

#include "metaoed/errors.hpp"
#include "metaoed/quadrature.hpp"

namespace metaoed {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_dims(const TaskModel& model, const Eigen::VectorXd& theta, const Eigen::VectorXd& psi,
                const Design& x) {
  if (theta.size() != theta_dim(model) || psi.size() != psi_dim(model))
    throw InvalidInput("parameter dimension does not match the model");
  if (x.size() != design_length(model)) throw InvalidInput("design length does not match the model");
}

}  // namespace

std::string model_name(const TaskModel& model) {
  return std::visit(overloaded{[](const PathAnalysis&) { return std::string("path"); },
                               [](const Preference&) { return std::string("preference"); },
                               [](const Toy&) { return std::string("toy"); }},
                    model);
}

OutcomeFamily outcome_family(const TaskModel& model) {
  return std::holds_alternative<Preference>(model) ? OutcomeFamily::Bernoulli
                                                   : OutcomeFamily::Gaussian;
}

double noise_variance(const TaskModel& model) {
  return std::visit(overloaded{[](const PathAnalysis& m) { return m.sigma2; },
                               [](const Toy& m) { return m.sigma2; },
                               [](const Preference&) -> double {
                                 throw InvalidInput("preference model has no noise variance");
                               }},
                    model);
}

const std::vector<Design>& designs(const TaskModel& model) {
  return std::visit([](const auto& m) -> const std::vector<Design>& { return m.designs; }, model);
}

int design_length(const TaskModel& model) {
  return std::holds_alternative<PathAnalysis>(model) ? 4 : 1;
}

int theta_dim(const TaskModel&) { return 1; }

int psi_dim(const TaskModel& model) { return std::holds_alternative<PathAnalysis>(model) ? 3 : 1; }

void validate(const TaskModel& model) {
  const auto& ds = designs(model);
  if (ds.empty()) throw InvalidInput("model needs a non-empty design set");
  for (const auto& x : ds) {
    if (x.size() != design_length(model)) throw InvalidInput("design length does not match the model");
    if (!x.allFinite()) throw InvalidInput("design has non-finite entries");
  }
  if (outcome_family(model) == OutcomeFamily::Gaussian && !(noise_variance(model) > 0.0))
    throw InvalidInput("sigma2 must be positive");
  if (const auto* toy = std::get_if<Toy>(&model); toy && !std::isfinite(toy->c))
    throw InvalidInput("toy constant c must be finite");
}

void validate(const TaskModel& model, const TaskEnvironment& env) {
  validate(model);
  if (env.theta_star.size() != theta_dim(model) || env.psi_star.size() != psi_dim(model))
    throw InvalidInput("task environment dimensions do not match the model");
  if (!env.theta_star.allFinite() || !env.psi_star.allFinite())
    throw InvalidInput("task environment has non-finite entries");
}

LinearPredictor linear_predictor(const TaskModel& model, const Design& x) {
  if (x.size() != design_length(model)) throw InvalidInput("design length does not match the model");
  LinearPredictor lp;
  std::visit(overloaded{[&](const PathAnalysis&) {
                          lp.a_theta = x.head(1);
                          lp.a_psi = x.tail(3);
                        },
                        [&](const Preference&) {
                          // success probability is sigmoid(theta - psi x)
                          lp.a_theta = Eigen::VectorXd::Ones(1);
                          lp.a_psi = -x;
                        },
                        [&](const Toy& m) {
                          lp.a_theta = -m.c * x;
                          lp.a_psi = m.c * x;
                        }},
             model);
  return lp;
}

Eigen::VectorXd joint_coefficients(const TaskModel& model, const Design& x) {
  const LinearPredictor lp = linear_predictor(model, x);
  Eigen::VectorXd a(lp.a_theta.size() + lp.a_psi.size());
  a << lp.a_theta, lp.a_psi;
  return a;
}

double log_likelihood(const TaskModel& model, const Design& x, const Eigen::VectorXd& theta,
                      const Eigen::VectorXd& psi, double y) {
  check_dims(model, theta, psi, x);
  const double u = linear_predictor(model, x).eval(theta, psi);
  if (outcome_family(model) == OutcomeFamily::Bernoulli) {
    if (y == 1.0) return log_sigmoid(u);
    if (y == 0.0) return log_sigmoid(-u);
    throw InvalidInput("Bernoulli outcome must be 0 or 1");
  }
  if (!std::isfinite(y)) throw InvalidInput("outcome must be finite");
  const double s2 = noise_variance(model);
  const double r = y - u;
  return -0.5 * (kLog2Pi + std::log(s2) + r * r / s2);
}

double likelihood(const TaskModel& model, const Design& x, const Eigen::VectorXd& theta,
                  const Eigen::VectorXd& psi, double y) {
  if (outcome_family(model) == OutcomeFamily::Bernoulli) {
    check_dims(model, theta, psi, x);
    const double u = linear_predictor(model, x).eval(theta, psi);
    if (y == 1.0) return sigmoid(u);
    if (y == 0.0) return sigmoid(-u);
    throw InvalidInput("Bernoulli outcome must be 0 or 1");
  }
  return std::exp(log_likelihood(model, x, theta, psi, y));
}

double sample_outcome(const TaskModel& model, const Design& x, const Eigen::VectorXd& theta,
                      const Eigen::VectorXd& psi, Rng& rng) {
  check_dims(model, theta, psi, x);
  const double u = linear_predictor(model, x).eval(theta, psi);
  if (outcome_family(model) == OutcomeFamily::Bernoulli) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    return unif(rng) < sigmoid(u) ? 1.0 : 0.0;
  }
  return u + std::sqrt(noise_variance(model)) * standard_normal(rng);
}

std::vector<Design> generate_path_analysis_designs(int count, std::uint64_t seed) {
  if (count < 1) throw InvalidInput("design count must be at least 1");
  Rng rng = make_stream(seed, 0x5041544855ULL);
  const double sd = 0.5;  // variance .25
  std::vector<Design> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double z = 10.0 + sd * standard_normal(rng);
    Design x(4);
    x(0) = -1.0 / z + sd * standard_normal(rng);
    for (int k = 1; k < 4; ++k) x(k) = z + sd * standard_normal(rng);
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<Design> preference_design_grid(int count) {
  if (count < 2) throw InvalidInput("preference grid needs at least 2 points");
  std::vector<Design> out;
  out.reserve(count);
  const double lo = -79.0, hi = 81.0;
  for (int i = 0; i < count; ++i) {
    const double v = (i == count - 1) ? hi : lo + (hi - lo) * i / (count - 1);
    out.push_back(Design::Constant(1, v));
  }
  return out;
}

GaussianBelief default_prior(const TaskModel& model) {
  return std::visit(
      overloaded{[](const PathAnalysis&) {
                   return GaussianBelief(Eigen::VectorXd::Zero(4),
                                         10.0 * Eigen::MatrixXd::Identity(4, 4), {0});
                 },
                 [](const Preference&) {
                   Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2, 2);
                   s(0, 0) = 16.0;
                   s(1, 1) = 1.0;
                   return GaussianBelief(Eigen::VectorXd::Zero(2), s, {0});
                 },
                 [](const Toy&) {
                   return GaussianBelief(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2),
                                         {0});
                 }},
      model);
}

}  // namespace metaoed
