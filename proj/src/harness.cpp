#include "metaoed/harness.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

#include "metaoed/closed_form.hpp"
#include "metaoed/errors.hpp"
#include "metaoed/nmc.hpp"
#include "metaoed/parallel.hpp"
#include "metaoed/stats.hpp"

namespace metaoed {

namespace {

// Substreams of one replication's seed.
enum Stream : std::uint64_t { kOutcomes = 0, kReservoir = 1, kInner = 2, kOracle = 3 };

constexpr std::uint64_t kSelectionStream = 0x5e1ec7ULL;
constexpr std::uint64_t kBoundStream = 0xb0b0ULL;

std::vector<double> column(const std::vector<ClosedFormValues>& v, double ClosedFormValues::*f) {
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) out.push_back(e.*f);
  return out;
}

}  // namespace

std::string to_string(Setting s) { return s == Setting::PathAnalysis ? "path" : "preference"; }
std::string to_string(Policy p) { return p == Policy::NaiveSOED ? "naive" : "oracle"; }
std::string to_string(OracleCadence c) { return c == OracleCadence::EveryStep ? "every-step" : "once"; }

Setting parse_setting(const std::string& text) {
  if (text == "path" || text == "path-analysis") return Setting::PathAnalysis;
  if (text == "preference") return Setting::Preference;
  throw InvalidInput("unknown setting '" + text + "' (expected path or preference)");
}

Policy parse_policy(const std::string& text) {
  if (text == "naive") return Policy::NaiveSOED;
  if (text == "oracle") return Policy::Oracle;
  throw InvalidInput("unknown policy '" + text + "' (expected naive or oracle)");
}

OracleCadence parse_cadence(const std::string& text) {
  if (text == "every-step") return OracleCadence::EveryStep;
  if (text == "once") return OracleCadence::Once;
  throw InvalidInput("unknown oracle cadence '" + text + "' (expected every-step or once)");
}

TaskModel make_model(Setting setting, const ModelOptions& options) {
  if (setting == Setting::PathAnalysis)
    return PathAnalysis{1.0, generate_path_analysis_designs(options.path_design_count,
                                                            options.path_design_seed)};
  return Preference{preference_design_grid(options.preference_grid)};
}

TaskEnvironment reference_generating(Setting setting, ThreatLevel level) {
  auto vec = [](std::initializer_list<double> v) {
    Eigen::VectorXd out(v.size());
    int i = 0;
    for (double e : v) out(i++) = e;
    return out;
  };
  if (setting == Setting::PathAnalysis) {
    switch (level) {
      case ThreatLevel::NoThreat: return {vec({-7.46}), vec({-5.79, -2.87, -9.36})};
      case ThreatLevel::Mild: return {vec({-3.20}), vec({1.58, 1.75, -2.87})};
      case ThreatLevel::Extreme: return {vec({9.33}), vec({-3.39, -4.11, -5.17})};
    }
  }
  switch (level) {
    case ThreatLevel::NoThreat: return {vec({-16.43}), vec({-0.32})};
    case ThreatLevel::Mild: return {vec({2.21}), vec({-0.91})};
    case ThreatLevel::Extreme: return {vec({8.27}), vec({-3.18})};
  }
  throw InvalidInput("unknown threat level");
}

int EstimatorKnobs::inner() const { return m.value_or(default_inner_size(n)); }

void validate(const ExperimentConfig& config) {
  if (config.steps < 1) throw InvalidInput("steps must be at least 1");
  if (config.replications < 1) throw InvalidInput("replications must be at least 1");
  if (config.knobs.n < 2) throw InvalidInput("N must be at least 2");
  if (config.knobs.inner() < 1) throw InvalidInput("M must be at least 1");
  if (!(config.knobs.inflation >= 1.0)) throw InvalidInput("inflation must be at least 1");
  if (config.misjudgment.theta_samples < 2) throw InvalidInput("theta samples must be at least 2");
}

ExperimentTrace run_replication(const ExperimentConfig& config, const TaskModel& model,
                                int replication) {
  const GaussianBelief prior = default_prior(model);
  const TaskEnvironment& truth = config.generating;
  validate(model, truth);
  const auto& ds = designs(model);
  const bool bernoulli = outcome_family(model) == OutcomeFamily::Bernoulli;

  Rng rng_out = make_stream(config.seed, replication, kOutcomes);
  Rng rng_res = make_stream(config.seed, replication, kReservoir);
  Rng rng_inner = make_stream(config.seed, replication, kInner);
  Rng rng_oracle = make_stream(config.seed, replication, kOracle);

  ExperimentTrace trace;
  trace.replication = replication;
  trace.prior_metric = prior.marginal_theta().log_pdf(truth.theta_star);

  try {
    GaussianBelief belief = prior;
    std::optional<PosteriorTarget> target;
    std::optional<WeightedSampleSet> set;
    if (bernoulli) {
      target.emplace(prior, model);
      // the first proposal is the prior itself, so the initial weights are uniform
      set.emplace(refresh_samples(*target, prior, config.knobs.n, rng_res));
    }
    std::optional<bool> frozen_mode;

    for (int t = 1; t <= config.steps; ++t) {
      std::vector<double> etig(ds.size()), etsig(ds.size());
      if (bernoulli) {
        const NestedEstimator est(model, *set, config.knobs.inner(), rng_inner);
        const auto values = est.estimate_all(ds);
        for (std::size_t i = 0; i < ds.size(); ++i) {
          etig[i] = values[i].etig;
          etsig[i] = values[i].etsig;
        }
      } else {
        std::vector<ClosedFormValues> values(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) values[i] = closed_form_values(model, belief, ds[i]);
        etig = column(values, &ClosedFormValues::etig);
        etsig = column(values, &ClosedFormValues::etsig);
      }
      const int x_etig = argmax_lowest(etig, "ETIG");
      int choice = x_etig;
      bool use_etsig = false;
      if (config.policy == Policy::Oracle) {
        if (config.cadence == OracleCadence::Once && frozen_mode) {
          use_etsig = *frozen_mode;
        } else {
          const MisjudgmentContext ctx(model, belief, ds[x_etig], config.misjudgment.theta_samples,
                                       rng_oracle);
          use_etsig = ctx.classify(truth.theta_star, truth.psi_star) != ThreatLevel::NoThreat;
          frozen_mode = use_etsig;
        }
        if (use_etsig) choice = argmax_lowest(etsig, "ETSIG");
      }

      const Design& x = ds[choice];
      const double y = sample_outcome(model, x, truth.theta_star, truth.psi_star, rng_out);
      if (bernoulli) {
        *target = target->with(Observation{x, y});
        const WeightedSampleSet reweighted = reweight(*set, *target);
        const GaussianBelief proposal = fit_variational(reweighted.samples, reweighted.weights,
                                                        config.knobs.inflation, prior.theta_dims());
        set.emplace(refresh_samples(*target, proposal, config.knobs.n, rng_res));
        belief = fit_variational(set->samples, set->weights, 1.0, prior.theta_dims());
      } else {
        belief = posterior_update(model, belief, x, y);
      }

      TraceStep step;
      step.t = t;
      step.design_index = choice;
      step.y = y;
      step.etig = etig[choice];
      step.etsig = etsig[choice];
      step.metric = belief.marginal_theta().log_pdf(truth.theta_star);
      step.chose_etsig = use_etsig;
      trace.steps.push_back(step);
    }
  } catch (const ResampleRequired& e) {
    trace.failed = true;
    trace.failure = e.what();
  } catch (const DegenerateConditioning& e) {
    trace.failed = true;
    trace.failure = e.what();
  }
  if (trace.failed)
    spdlog::warn("replication {} failed: {}", replication, trace.failure);
  return trace;
}

std::vector<ExperimentTrace> run_experiment(const ExperimentConfig& config) {
  validate(config);
  const TaskModel model = make_model(config.setting, config.model);
  validate(model, config.generating);
  std::vector<ExperimentTrace> traces(config.replications);
  parallel_for(config.replications,
               [&](std::size_t r) { traces[r] = run_replication(config, model, static_cast<int>(r)); });
  return traces;
}

Curves aggregate(const std::vector<ExperimentTrace>& traces) {
  Curves c;
  std::vector<const ExperimentTrace*> ok;
  for (const auto& tr : traces) {
    if (tr.failed) ++c.failed;
    else ok.push_back(&tr);
  }
  if (ok.empty()) throw PreconditionFailed("aggregate: no successful replication");
  const std::size_t steps = ok.front()->steps.size();
  for (const auto* tr : ok)
    if (tr->steps.size() != steps) throw InvalidInput("aggregate: traces differ in length");
  c.successful = static_cast<int>(ok.size());
  for (std::size_t t = 0; t <= steps; ++t) {
    std::vector<double> v;
    v.reserve(ok.size());
    for (const auto* tr : ok) v.push_back(t == 0 ? tr->prior_metric : tr->steps[t - 1].metric);
    double sum = 0.0;
    for (double e : v) sum += e;
    c.mean.push_back(sum / v.size());
    c.q25.push_back(percentile(v, 0.25));
    c.q75.push_back(percentile(v, 0.75));
  }
  return c;
}

BoundLines bound_reference_lines(const ExperimentConfig& config) {
  const TaskModel model = make_model(config.setting, config.model);
  validate(model, config.generating);
  const GaussianBelief prior = default_prior(model);
  BoundLines out;
  out.design_index = xetig_index(model, prior);
  out.log_prior = prior.marginal_theta().log_pdf(config.generating.theta_star);
  Rng rng = make_stream(config.seed, kBoundStream);
  const MisjudgmentContext ctx(model, prior, designs(model)[out.design_index],
                               config.misjudgment.theta_samples, rng);
  out.report = ctx.report(config.generating.theta_star, config.generating.psi_star,
                          default_epsilon(prior), config.misjudgment.tilde_nodes);
  const double line = out.log_prior + (out.report.m_pred - out.report.e_m_l);
  if (out.report.level == ThreatLevel::Mild) out.lower = line;
  if (out.report.level == ThreatLevel::Extreme) out.upper = line;
  return out;
}

int default_candidates(Setting setting) { return setting == Setting::PathAnalysis ? 20000 : 10000; }

SelectionResult select_generating_params(Setting setting, ThreatLevel level, int n_candidates,
                                         std::uint64_t seed, const ModelOptions& model_options,
                                         const MisjudgmentOptions& options) {
  if (n_candidates < 1) throw InvalidInput("need at least one candidate");
  const TaskModel model = make_model(setting, model_options);
  const GaussianBelief prior = default_prior(model);
  const int idx = xetig_index(model, prior);
  Rng ctx_rng = make_stream(seed, kSelectionStream, 1);
  const MisjudgmentContext ctx(model, prior, designs(model)[idx], options.theta_samples, ctx_rng);
  Rng draw_rng = make_stream(seed, kSelectionStream, 0);
  const Eigen::MatrixXd draws = prior.joint().sample(draw_rng, n_candidates);

  struct Candidate {
    double rt, m_pred, m_l, e_m_l;
    ThreatLevel level;
  };
  std::vector<Candidate> cands(n_candidates);
  parallel_for(n_candidates, [&](std::size_t k) {
    const Eigen::VectorXd theta = prior.theta_part(draws.col(k));
    const Eigen::VectorXd psi = prior.psi_part(draws.col(k));
    const OutcomeLaw q = ctx.truth(theta, psi);
    Candidate c;
    c.m_pred = ctx.m_pred(q);
    c.m_l = ctx.m_l(q, theta);
    c.e_m_l = ctx.expected_m_l(q).first;
    c.rt = ctx.rt(theta, psi);
    c.level = classify_threat(c.m_pred, c.m_l, c.e_m_l);
    cands[k] = c;
  });

  int best = -1;
  for (int k = 0; k < n_candidates; ++k) {
    const Candidate& c = cands[k];
    switch (level) {
      case ThreatLevel::NoThreat:
        if (best < 0 || c.rt > cands[best].rt) best = k;
        break;
      case ThreatLevel::Extreme:
        if (best < 0 || c.rt < cands[best].rt) best = k;
        break;
      case ThreatLevel::Mild:
        if (c.rt < 0.0 && c.level == ThreatLevel::Mild &&
            (best < 0 || std::abs(c.m_l - c.e_m_l) < std::abs(cands[best].m_l - cands[best].e_m_l)))
          best = k;
        break;
    }
  }
  if (best < 0) throw SelectionFailed("no candidate satisfies the mild-threat selection rule");
  SelectionResult out;
  out.environment = {prior.theta_part(draws.col(best)), prior.psi_part(draws.col(best))};
  out.level = cands[best].level;
  out.rt = cands[best].rt;
  out.m_pred = cands[best].m_pred;
  out.m_l_star = cands[best].m_l;
  out.e_m_l = cands[best].e_m_l;
  out.candidate = best;
  out.xetig_index = idx;
  return out;
}

}  // namespace metaoed
