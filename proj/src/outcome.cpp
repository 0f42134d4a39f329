#include "metaoed/outcome.hpp"

#include <cmath>
#include <limits>

#include "metaoed/errors.hpp"
#include "metaoed/quadrature.hpp"

namespace metaoed {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kTiny = 1e-300;

double safe_log(double p) { return std::log(std::max(p, kTiny)); }

double log_pdf_of(const OutcomeLaw& p, double y) {
  if (const auto* g = std::get_if<UnivariateGaussian>(&p)) return g->log_pdf(y);
  if (const auto* m = std::get_if<GaussianMixture>(&p)) return m->log_pdf(y);
  throw InvalidInput("cannot evaluate a Bernoulli law at a continuous outcome");
}

}  // namespace

double GaussianMixture::log_pdf(double y) const {
  double hi = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd terms(weights.size());
  for (int k = 0; k < weights.size(); ++k) {
    const double r = y - means(k);
    terms(k) = (weights(k) > 0.0)
                   ? std::log(weights(k)) - 0.5 * (kLog2Pi + std::log(variances(k)) + r * r / variances(k))
                   : -std::numeric_limits<double>::infinity();
    hi = std::max(hi, terms(k));
  }
  if (!std::isfinite(hi)) return hi;
  return hi + std::log((terms.array() - hi).exp().sum());
}

double cross_entropy(const OutcomeLaw& q, const OutcomeLaw& p) {
  if (const auto* qb = std::get_if<BernoulliLaw>(&q)) {
    const auto* pb = std::get_if<BernoulliLaw>(&p);
    if (!pb) throw InvalidInput("cross_entropy: outcome families differ");
    double ce = 0.0;
    if (qb->p1 > 0.0) ce -= qb->p1 * safe_log(pb->p1);
    if (qb->p0 > 0.0) ce -= qb->p0 * safe_log(pb->p0);
    return ce;
  }
  const auto* qg = std::get_if<UnivariateGaussian>(&q);
  if (!qg) throw InvalidInput("cross_entropy: reference law must be Gaussian or Bernoulli");
  if (const auto* pg = std::get_if<UnivariateGaussian>(&p)) {
    const double d = qg->mean - pg->mean;
    return 0.5 * (kLog2Pi + std::log(pg->variance) + (d * d + qg->variance) / pg->variance);
  }
  if (std::holds_alternative<BernoulliLaw>(p)) throw InvalidInput("cross_entropy: outcome families differ");
  const QuadratureRule& gh = gauss_hermite_normal(kOutcomeNodes);
  const double sd = std::sqrt(qg->variance);
  double ce = 0.0;
  for (int i = 0; i < gh.nodes.size(); ++i) ce -= gh.weights(i) * log_pdf_of(p, qg->mean + sd * gh.nodes(i));
  return ce;
}

double entropy(const OutcomeLaw& q) {
  if (const auto* qb = std::get_if<BernoulliLaw>(&q)) {
    double h = 0.0;
    if (qb->p1 > 0.0) h -= qb->p1 * std::log(qb->p1);
    if (qb->p0 > 0.0) h -= qb->p0 * std::log(qb->p0);
    return h;
  }
  const auto* qg = std::get_if<UnivariateGaussian>(&q);
  if (!qg) throw InvalidInput("entropy: reference law must be Gaussian or Bernoulli");
  return 0.5 * (kLog2Pi + 1.0 + std::log(qg->variance));
}

double kl_divergence(const OutcomeLaw& q, const OutcomeLaw& p) {
  const auto* qg = std::get_if<UnivariateGaussian>(&q);
  const auto* pg = std::get_if<UnivariateGaussian>(&p);
  if (qg && pg) return kl_gaussian(*qg, *pg);
  if (const auto* qb = std::get_if<BernoulliLaw>(&q)) {
    const auto* pb = std::get_if<BernoulliLaw>(&p);
    if (!pb) throw InvalidInput("kl_divergence: outcome families differ");
    double kl = 0.0;
    if (qb->p1 > 0.0) kl += qb->p1 * (std::log(qb->p1) - safe_log(pb->p1));
    if (qb->p0 > 0.0) kl += qb->p0 * (std::log(qb->p0) - safe_log(pb->p0));
    return std::max(kl, 0.0);
  }
  if (!qg) throw InvalidInput("kl_divergence: reference law must be Gaussian or Bernoulli");
  const QuadratureRule& gh = gauss_hermite_normal(kOutcomeNodes);
  const double sd = std::sqrt(qg->variance);
  double kl = 0.0;
  for (int i = 0; i < gh.nodes.size(); ++i) {
    const double y = qg->mean + sd * gh.nodes(i);
    kl += gh.weights(i) * (qg->log_pdf(y) - log_pdf_of(p, y));
  }
  return std::max(kl, 0.0);
}

OutcomeLaw mix(double alpha, const OutcomeLaw& q, const OutcomeLaw& p) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidInput("mix: alpha must lie in [0, 1]");
  Eigen::VectorXd w(2);
  w << alpha, 1.0 - alpha;
  return average_laws({q, p}, w);
}

OutcomeLaw average_laws(const std::vector<OutcomeLaw>& laws, const Eigen::VectorXd& weights) {
  if (laws.empty() || static_cast<int>(laws.size()) != weights.size())
    throw InvalidInput("average_laws: need one weight per law");
  const double total = weights.sum();
  if (!(total > 0.0)) throw InvalidInput("average_laws: weights must have positive sum");
  if (std::holds_alternative<BernoulliLaw>(laws.front())) {
    BernoulliLaw out{0.0, 0.0};
    for (std::size_t k = 0; k < laws.size(); ++k) {
      const auto* b = std::get_if<BernoulliLaw>(&laws[k]);
      if (!b) throw InvalidInput("average_laws: outcome families differ");
      out.p1 += weights(k) / total * b->p1;
      out.p0 += weights(k) / total * b->p0;
    }
    return out;
  }
  std::vector<double> w, m, v;
  for (std::size_t k = 0; k < laws.size(); ++k) {
    const double wk = weights(k) / total;
    if (const auto* g = std::get_if<UnivariateGaussian>(&laws[k])) {
      w.push_back(wk);
      m.push_back(g->mean);
      v.push_back(g->variance);
    } else if (const auto* mm = std::get_if<GaussianMixture>(&laws[k])) {
      for (int j = 0; j < mm->weights.size(); ++j) {
        w.push_back(wk * mm->weights(j));
        m.push_back(mm->means(j));
        v.push_back(mm->variances(j));
      }
    } else {
      throw InvalidInput("average_laws: outcome families differ");
    }
  }
  GaussianMixture out;
  out.weights = Eigen::Map<Eigen::VectorXd>(w.data(), w.size());
  out.means = Eigen::Map<Eigen::VectorXd>(m.data(), m.size());
  out.variances = Eigen::Map<Eigen::VectorXd>(v.data(), v.size());
  return out;
}

OutcomeLaw true_law(const TaskModel& model, const Design& x, const Eigen::VectorXd& theta,
                    const Eigen::VectorXd& psi) {
  const double u = linear_predictor(model, x).eval(theta, psi);
  if (outcome_family(model) == OutcomeFamily::Bernoulli) return BernoulliLaw{sigmoid(u), sigmoid(-u)};
  return UnivariateGaussian(u, noise_variance(model));
}

namespace {

OutcomeLaw law_from_predictor(const TaskModel& model, double mean, double var) {
  if (outcome_family(model) == OutcomeFamily::Bernoulli) {
    const BernoulliProbs p = logistic_normal(mean, std::sqrt(std::max(var, 0.0)));
    return BernoulliLaw{p.p1, p.p0};
  }
  return UnivariateGaussian(mean, noise_variance(model) + std::max(var, 0.0));
}

}  // namespace

OutcomeLaw conditional_predictive(const TaskModel& model, const GaussianBelief& belief,
                                  const Design& x, const Eigen::VectorXd& theta) {
  const LinearPredictor lp = linear_predictor(model, x);
  const PsiGivenTheta& reg = belief.psi_given_theta();
  const double mean = lp.eval(theta, reg.mean_at(theta));
  const double var = (reg.cond_chol.transpose() * lp.a_psi).squaredNorm();
  return law_from_predictor(model, mean, var);
}

OutcomeLaw prior_predictive(const TaskModel& model, const GaussianBelief& belief, const Design& x) {
  const Eigen::VectorXd a = joint_coefficients(model, x);
  // coefficients are (theta, psi) ordered; map them onto the belief layout
  const Eigen::VectorXd a_full = belief.join(a.head(belief.theta_dim()), a.tail(belief.psi_dim()));
  const double mean = a_full.dot(belief.mean());
  const double var = (belief.joint().chol().transpose() * a_full).squaredNorm();
  return law_from_predictor(model, mean, var);
}

}  // namespace metaoed
