#include "metaoed/misjudgment.hpp"

#include <cmath>
#include <limits>

#include "metaoed/closed_form.hpp"
#include "metaoed/errors.hpp"
#include "metaoed/parallel.hpp"
#include "metaoed/quadrature.hpp"

namespace metaoed {

namespace {

constexpr double kMinOutsideMass = 1e-3;
constexpr double kZCut = 12.0;
constexpr int kExpectationNodes = 96;

double log_ratio_term(double q, double p) {
  return q > 0.0 ? q * std::log(std::max(p, 1e-300)) : 0.0;
}

// Per-component influence E_q[f_s(y) / p~(y)] of a pseudo-prior mixture; its spread gives the
// delta-method standard error of cross-entropies against the mixture.
Eigen::ArrayXd mixture_influence(const OutcomeLaw& q, const std::vector<OutcomeLaw>& comps,
                                 const OutcomeLaw& mixture) {
  Eigen::ArrayXd out(comps.size());
  if (const auto* qb = std::get_if<BernoulliLaw>(&q)) {
    const auto& mb = std::get<BernoulliLaw>(mixture);
    for (std::size_t s = 0; s < comps.size(); ++s) {
      const auto& cb = std::get<BernoulliLaw>(comps[s]);
      out(s) = qb->p1 * cb.p1 / std::max(mb.p1, 1e-300) + qb->p0 * cb.p0 / std::max(mb.p0, 1e-300);
    }
    return out;
  }
  const auto& qg = std::get<UnivariateGaussian>(q);
  const QuadratureRule& gh = gauss_hermite_normal(kOutcomeNodes);
  const double sd = std::sqrt(qg.variance);
  Eigen::VectorXd log_mix(gh.nodes.size());
  const auto& mm = std::get<GaussianMixture>(mixture);
  for (int k = 0; k < gh.nodes.size(); ++k) log_mix(k) = mm.log_pdf(qg.mean + sd * gh.nodes(k));
  for (std::size_t s = 0; s < comps.size(); ++s) {
    const auto& cg = std::get<UnivariateGaussian>(comps[s]);
    double acc = 0.0;
    for (int k = 0; k < gh.nodes.size(); ++k)
      acc += gh.weights(k) * std::exp(cg.log_pdf(qg.mean + sd * gh.nodes(k)) - log_mix(k));
    out(s) = acc;
  }
  return out;
}

double weighted_sd_error(const Eigen::ArrayXd& influence, const Eigen::VectorXd& weights) {
  const Eigen::ArrayXd w = weights.array();
  const double mean = (w * influence).sum();
  return std::sqrt((w.square() * (influence - mean).square()).sum());
}

struct TildeLaw {
  OutcomeLaw law;
  double ce_se = 0.0;  // standard error of E_q[log p~]
};

TildeLaw tilde_law(const MisjudgmentContext& ctx, const PseudoPrior& pp, const OutcomeLaw& q) {
  std::vector<OutcomeLaw> comps;
  comps.reserve(pp.thetas.size());
  for (const auto& t : pp.thetas) comps.push_back(ctx.conditional(t));
  TildeLaw out{average_laws(comps, pp.weights), 0.0};
  if (!pp.quadrature) out.ce_se = weighted_sd_error(mixture_influence(q, comps, out.law), pp.weights);
  return out;
}

// Left side E_q[log p(y|x)] against the mixture of the conditional at theta* and the pseudo-prior
// marginal, with a round-off allowance on top of the Monte Carlo error.
AssumptionCheck smoothness(const MisjudgmentContext& ctx, const PseudoPrior& pp, const TildeLaw& tl,
                           const OutcomeLaw& q, const Eigen::VectorXd& theta_star) {
  AssumptionCheck out;
  out.lhs = -cross_entropy(q, ctx.predictive());
  out.rhs = -pp.inside_mass * cross_entropy(q, ctx.conditional(theta_star)) -
            pp.outside_mass * cross_entropy(q, tl.law);
  out.slack = out.lhs - out.rhs;
  out.se = pp.outside_mass * tl.ce_se;
  const double roundoff = 1e-9 * (1.0 + std::abs(out.lhs));
  out.holds = out.slack >= -3.0 * out.se - roundoff;
  return out;
}

}  // namespace

std::string to_string(ThreatLevel level) {
  switch (level) {
    case ThreatLevel::NoThreat: return "none";
    case ThreatLevel::Mild: return "mild";
    case ThreatLevel::Extreme: return "extreme";
  }
  return "none";
}

ThreatLevel parse_threat_level(const std::string& text) {
  if (text == "none" || text == "no" || text == "nothreat") return ThreatLevel::NoThreat;
  if (text == "mild") return ThreatLevel::Mild;
  if (text == "extreme") return ThreatLevel::Extreme;
  throw InvalidInput("unknown threat level '" + text + "' (expected none, mild or extreme)");
}

ThreatLevel classify_threat(double m_pred, double m_l_star, double e_m_l) {
  if (m_l_star <= m_pred) return ThreatLevel::NoThreat;
  if (m_l_star <= e_m_l) return ThreatLevel::Mild;
  return ThreatLevel::Extreme;
}

double default_epsilon(const GaussianBelief& belief) {
  return 0.05 * std::sqrt(belief.theta_cov().diagonal().minCoeff());
}

MisjudgmentContext::MisjudgmentContext(const TaskModel& model, const GaussianBelief& belief,
                                       const Design& x, int theta_samples, Rng& rng)
    : model_(model), belief_(belief), x_(x) {
  if (theta_samples < 2) throw InvalidInput("misjudgment: need at least two Theta samples");
  thetas_ = belief_.marginal_theta().sample(rng, theta_samples);
  precompute();
}

MisjudgmentContext::MisjudgmentContext(const TaskModel& model, const GaussianBelief& belief,
                                       const Design& x, Eigen::MatrixXd theta_samples)
    : model_(model), belief_(belief), x_(x), thetas_(std::move(theta_samples)) {
  if (thetas_.rows() != belief_.theta_dim() || thetas_.cols() < 2)
    throw InvalidInput("misjudgment: Theta sample matrix has the wrong shape");
  precompute();
}

void MisjudgmentContext::precompute() {
  if (belief_.theta_dim() != theta_dim(model_) || belief_.psi_dim() != psi_dim(model_))
    throw InvalidInput("misjudgment: belief does not match the model");
  if (x_.size() != design_length(model_)) throw InvalidInput("misjudgment: design length mismatch");
  predictive_ = prior_predictive(model_, belief_, x_);
  // E[M_L] points: Gauss-Hermite nodes of the Theta prior when it is one-dimensional, else the samples
  Eigen::MatrixXd pts = thetas_;
  if (belief_.theta_dim() == 1) {
    const QuadratureRule& gh = gauss_hermite_normal(kExpectationNodes);
    const double sd = std::sqrt(belief_.theta_cov()(0, 0));
    pts = ((belief_.theta_mean()(0) + sd * gh.nodes.array()).matrix()).transpose();
    expect_w_ = gh.weights.array();
  } else {
    expect_w_ = Eigen::ArrayXd::Constant(pts.cols(), 1.0 / pts.cols());
  }
  const int s = static_cast<int>(pts.cols());
  if (outcome_family(model_) == OutcomeFamily::Bernoulli) {
    cond_p1_.resize(s);
    cond_p0_.resize(s);
    for (int i = 0; i < s; ++i) {
      const auto b = std::get<BernoulliLaw>(conditional(pts.col(i)));
      cond_p1_(i) = b.p1;
      cond_p0_(i) = b.p0;
    }
  } else {
    cond_mean_.resize(s);
    for (int i = 0; i < s; ++i) {
      const auto g = std::get<UnivariateGaussian>(conditional(pts.col(i)));
      cond_mean_(i) = g.mean;
      cond_var_ = g.variance;
    }
  }
}

OutcomeLaw MisjudgmentContext::truth(const Eigen::VectorXd& theta, const Eigen::VectorXd& psi) const {
  return true_law(model_, x_, theta, psi);
}

OutcomeLaw MisjudgmentContext::conditional(const Eigen::VectorXd& theta) const {
  return conditional_predictive(model_, belief_, x_, theta);
}

double MisjudgmentContext::m_pred(const OutcomeLaw& q) const { return kl_divergence(q, predictive_); }

double MisjudgmentContext::m_l(const OutcomeLaw& q, const Eigen::VectorXd& theta) const {
  return kl_divergence(q, conditional(theta));
}

std::pair<double, double> MisjudgmentContext::expected_m_l(const OutcomeLaw& q) const {
  const int s = static_cast<int>(expect_w_.size());
  Eigen::ArrayXd kl(s);
  if (const auto* qb = std::get_if<BernoulliLaw>(&q)) {
    const double neg_h = -entropy(q);
    for (int i = 0; i < s; ++i)
      kl(i) = std::max(0.0, neg_h - log_ratio_term(qb->p1, cond_p1_(i)) -
                                log_ratio_term(qb->p0, cond_p0_(i)));
  } else {
    const auto& qg = std::get<UnivariateGaussian>(q);
    const double ratio = qg.variance / cond_var_;
    const Eigen::ArrayXd d = qg.mean - cond_mean_.array();
    kl = (0.5 * (ratio - 1.0 - std::log(ratio) + d.square() / cond_var_)).max(0.0);
  }
  if (belief_.theta_dim() == 1) return {(expect_w_ * kl).sum(), 0.0};
  const double mean = kl.mean();
  const double var = (kl - mean).square().sum() / (s - 1);
  return {mean, std::sqrt(var / s)};
}

double MisjudgmentContext::rt(const Eigen::VectorXd& theta, const Eigen::VectorXd& psi) const {
  const OutcomeLaw q = truth(theta, psi);
  return cross_entropy(q, predictive_) - cross_entropy(q, conditional(theta));
}

ThreatLevel MisjudgmentContext::classify(const Eigen::VectorXd& theta,
                                         const Eigen::VectorXd& psi) const {
  const OutcomeLaw q = truth(theta, psi);
  return classify_threat(m_pred(q), m_l(q, theta), expected_m_l(q).first);
}

PseudoPrior MisjudgmentContext::pseudo_prior(const Eigen::VectorXd& theta_star, double epsilon,
                                             int tilde_nodes) const {
  if (!(epsilon > 0.0)) throw InvalidInput("epsilon must be positive");
  PseudoPrior pp;
  if (belief_.theta_dim() == 1) {
    // exact masses; the complement is integrated by Gauss-Legendre on each tail
    const double mu = belief_.theta_mean()(0);
    const double sd = std::sqrt(belief_.theta_cov()(0, 0));
    const double zl = (theta_star(0) - epsilon - mu) / sd;
    const double zu = (theta_star(0) + epsilon - mu) / sd;
    pp.inside_mass = std::max(0.0, normal_cdf(zu) - normal_cdf(zl));
    pp.outside_mass = normal_cdf(zl) + normal_cdf(-zu);
    pp.quadrature = true;
    const QuadratureRule& gl = gauss_legendre(std::max(tilde_nodes, 2));
    std::vector<double> w;
    auto add_interval = [&](double a, double b) {
      if (!(b > a)) return;
      const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
      for (int i = 0; i < gl.nodes.size(); ++i) {
        const double z = mid + half * gl.nodes(i);
        pp.thetas.push_back(Eigen::VectorXd::Constant(1, mu + sd * z));
        w.push_back(half * gl.weights(i) * std::exp(-0.5 * z * z));
      }
    };
    add_interval(-kZCut, std::min(zl, kZCut));
    add_interval(std::max(zu, -kZCut), kZCut);
    pp.weights = Eigen::Map<Eigen::VectorXd>(w.data(), w.size());
    if (pp.weights.size() > 0 && pp.weights.sum() > 0.0) pp.weights /= pp.weights.sum();
  } else {
    std::vector<Eigen::VectorXd> outside;
    for (int i = 0; i < thetas_.cols(); ++i)
      if ((thetas_.col(i) - theta_star).norm() >= epsilon) outside.push_back(thetas_.col(i));
    pp.outside_mass = static_cast<double>(outside.size()) / thetas_.cols();
    pp.inside_mass = 1.0 - pp.outside_mass;
    pp.thetas = std::move(outside);
    pp.weights = Eigen::VectorXd::Constant(pp.thetas.size(), 1.0 / std::max<std::size_t>(pp.thetas.size(), 1));
  }
  if (pp.outside_mass < kMinOutsideMass || pp.thetas.empty() || !(pp.weights.sum() > 0.0))
    throw BoundUndefined("epsilon-neighborhood covers almost all prior mass; bounds are undefined");
  return pp;
}

MisjudgmentReport MisjudgmentContext::report(const Eigen::VectorXd& theta_star,
                                             const Eigen::VectorXd& psi_star, double epsilon,
                                             int tilde_nodes) const {
  MisjudgmentReport r;
  r.design = x_;
  r.epsilon = epsilon;
  const OutcomeLaw q = truth(theta_star, psi_star);
  r.m_pred = m_pred(q);
  r.m_l_star = m_l(q, theta_star);
  std::tie(r.e_m_l, r.e_m_l_se) = expected_m_l(q);
  r.rt_star = rt(theta_star, psi_star);
  r.level = classify_threat(r.m_pred, r.m_l_star, r.e_m_l);
  if (r.level == ThreatLevel::Mild) {
    r.level_lower = r.m_pred - r.e_m_l;
    r.level_upper = 0.0;
  } else if (r.level == ThreatLevel::Extreme) {
    r.level_upper = r.m_pred - r.e_m_l;
  }

  const PseudoPrior pp = pseudo_prior(theta_star, epsilon, tilde_nodes);
  r.inside_mass = pp.inside_mass;
  r.outside_mass = pp.outside_mass;
  const TildeLaw tl = tilde_law(*this, pp, q);
  r.m_pred_tilde = kl_divergence(q, tl.law);
  r.m_pred_tilde_se = tl.ce_se;
  r.generic_upper = r.outside_mass * (r.m_pred_tilde - r.m_l_star);
  r.generic_upper_se = r.outside_mass * r.m_pred_tilde_se;
  r.assumption = smoothness(*this, pp, tl, q, theta_star);
  return r;
}

double rt(const TaskModel& model, const GaussianBelief& belief, const Design& x,
          const Eigen::VectorXd& theta, const Eigen::VectorXd& psi) {
  const OutcomeLaw q = true_law(model, x, theta, psi);
  return cross_entropy(q, prior_predictive(model, belief, x)) -
         cross_entropy(q, conditional_predictive(model, belief, x, theta));
}

MisjudgmentReport misjudgment_report(const TaskModel& model, const GaussianBelief& belief,
                                     const Design& x, const Eigen::VectorXd& theta_star,
                                     const Eigen::VectorXd& psi_star, double epsilon, Rng& rng,
                                     const MisjudgmentOptions& options) {
  validate(model, TaskEnvironment{theta_star, psi_star});
  if (!(epsilon > 0.0)) throw InvalidInput("epsilon must be positive");
  MisjudgmentContext ctx(model, belief, x, options.theta_samples, rng);
  return ctx.report(theta_star, psi_star, epsilon, options.tilde_nodes);
}

AssumptionCheck check_assumption_smoothness(const TaskModel& model, const GaussianBelief& belief,
                                            const Design& x, const Eigen::VectorXd& theta_star,
                                            const Eigen::VectorXd& psi_star, double epsilon,
                                            int mc_samples, Rng& rng) {
  if (!(epsilon > 0.0)) throw InvalidInput("epsilon must be positive");
  MisjudgmentContext ctx(model, belief, x, std::max(mc_samples, 2), rng);
  const OutcomeLaw q = ctx.truth(theta_star, psi_star);
  const PseudoPrior pp = ctx.pseudo_prior(theta_star, epsilon, 200);
  return smoothness(ctx, pp, tilde_law(ctx, pp, q), q, theta_star);
}

std::vector<std::pair<double, double>> psi_knowledge_curve(const TaskModel& model,
                                                      const GaussianBelief& belief, const Design& x,
                                                      const Eigen::VectorXd& theta_star,
                                                      const Eigen::VectorXd& psi_star,
                                                      const std::vector<double>& alphas, Rng& rng,
                                                      const MisjudgmentOptions& options) {
  MisjudgmentContext ctx(model, belief, x, options.theta_samples, rng);
  if (ctx.classify(theta_star, psi_star) == ThreatLevel::NoThreat)
    throw PreconditionFailed("psi_knowledge_curve: instance has no threat of negative transfer");
  const OutcomeLaw q = ctx.truth(theta_star, psi_star);
  const OutcomeLaw p_star = ctx.conditional(theta_star);
  std::vector<std::pair<double, double>> out;
  out.reserve(alphas.size());
  for (double a : alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw InvalidInput("psi_knowledge_curve: alpha must lie in [0, 1]");
    double value = 0.0;
    if (a == 0.0) value = kl_divergence(q, p_star);
    else if (a < 1.0) value = kl_divergence(q, mix(a, q, p_star));
    out.emplace_back(a, value);
  }
  return out;
}

std::vector<std::pair<double, double>> unboundedness_sweep(const TaskModel& model,
                                                           const GaussianBelief& belief,
                                                           const Design& x,
                                                           const Eigen::VectorXd& theta_star,
                                                           const std::vector<double>& psi_grid,
                                                           std::optional<Eigen::VectorXd> direction) {
  const Eigen::VectorXd dir = direction.value_or(Eigen::VectorXd::Ones(psi_dim(model)));
  if (dir.size() != psi_dim(model)) throw InvalidInput("sweep direction has the wrong length");
  bool up = true, down = true;
  for (std::size_t i = 1; i < psi_grid.size(); ++i) {
    up = up && psi_grid[i] > psi_grid[i - 1];
    down = down && psi_grid[i] < psi_grid[i - 1];
  }
  if (!(up || down)) throw InvalidInput("psi grid must be strictly monotone");
  const OutcomeLaw pred = prior_predictive(model, belief, x);
  const OutcomeLaw cond = conditional_predictive(model, belief, x, theta_star);
  std::vector<std::pair<double, double>> out;
  out.reserve(psi_grid.size());
  for (double s : psi_grid) {
    const OutcomeLaw q = true_law(model, x, theta_star, s * dir);
    out.emplace_back(s, cross_entropy(q, pred) - cross_entropy(q, cond));
  }
  return out;
}

double prior_etig(const TaskModel& model, const GaussianBelief& belief, const Design& x) {
  if (outcome_family(model) == OutcomeFamily::Gaussian)
    return closed_form_values(model, belief, x).etig;
  if (belief.theta_dim() != 1)
    throw InvalidInput("prior_etig: quadrature needs a one-dimensional Theta block");
  const QuadratureRule& gh = gauss_hermite_normal(400);
  const double mu = belief.theta_mean()(0);
  const double sd = std::sqrt(belief.theta_cov()(0, 0));
  std::vector<BernoulliLaw> laws;
  laws.reserve(gh.nodes.size());
  BernoulliLaw marginal{0.0, 0.0};
  for (int i = 0; i < gh.nodes.size(); ++i) {
    const auto b = std::get<BernoulliLaw>(
        conditional_predictive(model, belief, x, Eigen::VectorXd::Constant(1, mu + sd * gh.nodes(i))));
    laws.push_back(b);
    marginal.p1 += gh.weights(i) * b.p1;
    marginal.p0 += gh.weights(i) * b.p0;
  }
  double mi = 0.0;
  for (int i = 0; i < gh.nodes.size(); ++i) mi += gh.weights(i) * kl_divergence(laws[i], marginal);
  return std::max(mi, 0.0);
}

int xetig_index(const TaskModel& model, const GaussianBelief& belief) {
  const auto& ds = designs(model);
  std::vector<double> values(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) values[i] = prior_etig(model, belief, ds[i]);
  return argmax_lowest(values, "x_ETIG");
}

std::vector<AtlasRecord> threat_atlas(const TaskModel& model, const GaussianBelief& belief,
                                      const DesignSelector& selector, int n_samples,
                                      std::uint64_t seed, const MisjudgmentOptions& options) {
  if (n_samples < 1) throw InvalidInput("threat_atlas: need at least one sample");
  validate(model);
  const int idx = selector ? selector(model, belief) : xetig_index(model, belief);
  const auto& ds = designs(model);
  if (idx < 0 || idx >= static_cast<int>(ds.size())) throw InvalidInput("design selector out of range");

  Rng ctx_rng = make_stream(seed, 0, 1);
  const MisjudgmentContext ctx(model, belief, ds[idx], options.theta_samples, ctx_rng);
  Rng draw_rng = make_stream(seed, 1, 0);
  const Eigen::MatrixXd draws = belief.joint().sample(draw_rng, n_samples);

  std::vector<OutcomeLaw> preds;
  preds.reserve(ds.size());
  for (const auto& x : ds) preds.push_back(prior_predictive(model, belief, x));

  std::vector<AtlasRecord> out(n_samples);
  parallel_for(n_samples, [&](std::size_t k) {
    AtlasRecord rec;
    const Eigen::VectorXd full = draws.col(k);
    rec.theta = belief.theta_part(full);
    rec.psi = belief.psi_part(full);
    rec.p_psi_given_theta = std::exp(belief.condition_on_theta(rec.theta).log_pdf(rec.psi));
    rec.xetig_index = idx;
    rec.level = ctx.classify(rec.theta, rec.psi);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < ds.size(); ++d) {
      const OutcomeLaw q = true_law(model, ds[d], rec.theta, rec.psi);
      const double value = cross_entropy(q, preds[d]) -
                           cross_entropy(q, conditional_predictive(model, belief, ds[d], rec.theta));
      if (static_cast<int>(d) == idx) rec.rt_at_xetig = value;
      best = std::max(best, value);
    }
    rec.max_rt = best;
    out[k] = std::move(rec);
  });
  return out;
}

}  // namespace metaoed
