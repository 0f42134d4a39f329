#include "metaoed/cli.hpp"

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "metaoed/closed_form.hpp"
#include "metaoed/errors.hpp"
#include "metaoed/harness.hpp"
#include "metaoed/misjudgment.hpp"
#include "metaoed/quadrature.hpp"
#include "metaoed/stats.hpp"

namespace metaoed::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

class IoError : public Error {
 public:
  using Error::Error;
};

struct CommonArgs {
  std::string setting = "path";
  std::uint64_t seed = 7;
  std::string out = ".";
  std::uint64_t design_seed = kDefaultPathDesignSeed;
  int design_count = kDefaultPathDesignCount;
  int grid = kDefaultPreferenceGrid;
  int theta_samples = 2000;
};

struct DiagnoseArgs {
  int samples = 10000;
};

struct RunArgs {
  std::string level = "extreme";
  std::string policy = "naive";
  std::string cadence = "every-step";
  int steps = 10;
  int reps = 200;
  int n = 10000;
  int m = 0;  // 0 selects floor(sqrt(n))
  double inflation = 1.44;
  std::string generating;
  bool select_generating = false;
  int candidates = 0;  // 0 selects the setting default
};

struct ToyArgs {
  int x1_max = 5;
  int x2_max = 5;
  double sigma_theta2 = 1.0;
  double sigma_psi2 = 1.0;
  double sigma2 = 1.0;
  double c = 1.0;
  double theta_star = 1.0;
  double psi_star = 3.0;
  int grid_points = 81;
  double grid_limit = 4.0;
};

struct SelectArgs {
  std::string level = "all";
  int candidates = 0;
};

json common_json(const CommonArgs& a) {
  json j;
  j["setting"] = a.setting;
  j["seed"] = a.seed;
  j["design-seed"] = a.design_seed;
  j["design-count"] = a.design_count;
  j["grid"] = a.grid;
  j["theta-samples"] = a.theta_samples;
  return j;
}

ModelOptions model_options(const CommonArgs& a) {
  if (a.design_count < 1) throw InvalidInput("--design-count must be at least 1");
  if (a.grid < 2) throw InvalidInput("--grid must be at least 2");
  if (a.theta_samples < 2) throw InvalidInput("--theta-samples must be at least 2");
  return {a.design_count, a.design_seed, a.grid};
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + path.string() + "' for writing");
  f << content;
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

class CsvWriter {
 public:
  CsvWriter(const json& config, const std::vector<std::string>& columns) {
    ss_ << "# " << config.dump() << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) ss_ << (i ? "," : "") << columns[i];
    ss_ << '\n';
  }
  CsvWriter& cell(double v) { return raw(format_number(v)); }
  CsvWriter& cell(int v) { return raw(std::to_string(v)); }
  CsvWriter& cell(const std::string& v) { return raw(v); }
  void end_row() {
    ss_ << '\n';
    first_ = true;
  }
  std::string str() const { return ss_.str(); }

 private:
  CsvWriter& raw(const std::string& s) {
    if (!first_) ss_ << ',';
    ss_ << s;
    first_ = false;
    return *this;
  }
  std::ostringstream ss_;
  bool first_ = true;
};

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json report_json(const MisjudgmentReport& r) {
  json j;
  j["m_pred"] = number(r.m_pred);
  j["m_l_star"] = number(r.m_l_star);
  j["e_m_l"] = number(r.e_m_l);
  j["e_m_l_se"] = number(r.e_m_l_se);
  j["rt_star"] = number(r.rt_star);
  j["level"] = to_string(r.level);
  // the generic bound is reported only where the smoothness assumption was verified
  const bool smooth = r.assumption.holds;
  j["generic_upper"] = smooth ? number(r.generic_upper) : json(nullptr);
  j["generic_upper_se"] = smooth ? number(r.generic_upper_se) : json(nullptr);
  j["assumption_holds"] = smooth;
  j["assumption_slack"] = number(r.assumption.slack);
  j["level_lower"] = r.level_lower ? number(*r.level_lower) : json(nullptr);
  j["level_upper"] = r.level_upper ? number(*r.level_upper) : json(nullptr);
  j["epsilon"] = number(r.epsilon);
  j["inside_mass"] = number(r.inside_mass);
  j["outside_mass"] = number(r.outside_mass);
  j["m_pred_tilde"] = number(r.m_pred_tilde);
  return j;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidInput("cannot parse number '" + item + "' in list '" + text + "'");
    }
  }
  return out;
}

TaskEnvironment environment_from_list(const TaskModel& model, const std::vector<double>& v) {
  const int kt = theta_dim(model), kp = psi_dim(model);
  if (static_cast<int>(v.size()) != kt + kp)
    throw InvalidInput("--generating needs " + std::to_string(kt + kp) + " comma-separated values");
  TaskEnvironment env{Eigen::VectorXd(kt), Eigen::VectorXd(kp)};
  for (int i = 0; i < kt; ++i) env.theta_star(i) = v[i];
  for (int i = 0; i < kp; ++i) env.psi_star(i) = v[kt + i];
  return env;
}

json env_json(const TaskEnvironment& env) {
  json j;
  j["theta"] = std::vector<double>(env.theta_star.data(), env.theta_star.data() + env.theta_star.size());
  j["psi"] = std::vector<double>(env.psi_star.data(), env.psi_star.data() + env.psi_star.size());
  return j;
}

// ---------------------------------------------------------------- diagnose

void cmd_diagnose(const CommonArgs& common, const DiagnoseArgs& args) {
  if (args.samples < 1) throw InvalidInput("--samples must be at least 1");
  const Setting setting = parse_setting(common.setting);
  const TaskModel model = make_model(setting, model_options(common));
  const GaussianBelief prior = default_prior(model);
  MisjudgmentOptions opts;
  opts.theta_samples = common.theta_samples;
  const fs::path dir = prepare_out(common.out);

  json config = common_json(common);
  config["command"] = "diagnose";
  config["samples"] = args.samples;

  const auto atlas = threat_atlas(model, prior, nullptr, args.samples, common.seed, opts);

  std::vector<std::string> cols;
  for (int i = 0; i < theta_dim(model); ++i) cols.push_back(theta_dim(model) == 1 ? "theta" : "theta" + std::to_string(i + 1));
  for (int i = 0; i < psi_dim(model); ++i) cols.push_back(psi_dim(model) == 1 ? "psi" : "psi" + std::to_string(i + 1));
  for (const char* c : {"psi_avg", "p_psi_given_theta", "level", "rt_at_xetig", "max_rt", "xetig_index"})
    cols.emplace_back(c);
  CsvWriter csv(config, cols);
  int counts[3] = {0, 0, 0};
  std::vector<double> dens, rts;
  for (const auto& r : atlas) {
    for (int i = 0; i < r.theta.size(); ++i) csv.cell(r.theta(i));
    for (int i = 0; i < r.psi.size(); ++i) csv.cell(r.psi(i));
    csv.cell(r.psi.mean()).cell(r.p_psi_given_theta).cell(to_string(r.level)).cell(r.rt_at_xetig)
        .cell(r.max_rt).cell(r.xetig_index);
    csv.end_row();
    ++counts[static_cast<int>(r.level)];
    if (r.rt_at_xetig < 0.0) {
      dens.push_back(r.p_psi_given_theta);
      rts.push_back(r.rt_at_xetig);
    }
  }
  write_file(dir / "atlas.csv", csv.str());

  const double n = static_cast<double>(atlas.size());
  const Correlation corr = spearman(dens, rts);
  json summary;
  summary["config"] = config;
  summary["xetig_index"] = atlas.front().xetig_index;
  const Design& xe = designs(model)[atlas.front().xetig_index];
  summary["xetig_design"] = std::vector<double>(xe.data(), xe.data() + xe.size());
  summary["counts"] = {{"none", counts[0]}, {"mild", counts[1]}, {"extreme", counts[2]}};
  summary["fractions"] = {{"none", counts[0] / n}, {"mild", counts[1] / n}, {"extreme", counts[2] / n}};
  summary["threatening_fraction"] = (counts[1] + counts[2]) / n;
  summary["negative_rt_fraction"] = rts.size() / n;
  summary["spearman_density_vs_rt_negative"] = {
      {"rho", number(corr.rho)}, {"p_value", number(corr.p_value)}, {"n", corr.n}};
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  std::cout << "threatening fraction " << format_number((counts[1] + counts[2]) / n) << " over "
            << atlas.size() << " draws\n";
}

// ---------------------------------------------------------------- run

int cmd_run(const CommonArgs& common, const RunArgs& args) {
  const Setting setting = parse_setting(common.setting);
  const ThreatLevel level = parse_threat_level(args.level);
  ExperimentConfig cfg;
  cfg.setting = setting;
  cfg.policy = parse_policy(args.policy);
  cfg.cadence = parse_cadence(args.cadence);
  cfg.steps = args.steps;
  cfg.replications = args.reps;
  cfg.seed = common.seed;
  cfg.model = model_options(common);
  cfg.knobs.n = args.n;
  if (args.m < 0) throw InvalidInput("--m must be non-negative");
  if (args.m > 0) cfg.knobs.m = args.m;
  cfg.knobs.inflation = args.inflation;
  cfg.misjudgment.theta_samples = common.theta_samples;
  validate(cfg);
  const TaskModel model = make_model(setting, cfg.model);

  std::string source = "reference";
  if (!args.generating.empty()) {
    cfg.generating = environment_from_list(model, parse_list(args.generating));
    source = "flag";
  } else if (args.select_generating) {
    const int cands = args.candidates > 0 ? args.candidates : default_candidates(setting);
    MisjudgmentOptions opts;
    opts.theta_samples = common.theta_samples;
    cfg.generating = select_generating_params(setting, level, cands, common.seed, cfg.model, opts).environment;
    source = "selected";
  } else {
    cfg.generating = reference_generating(setting, level);
  }
  validate(model, cfg.generating);
  const fs::path dir = prepare_out(common.out);

  json config = common_json(common);
  config["command"] = "run";
  config["level"] = args.level;
  config["policy"] = to_string(cfg.policy);
  config["cadence"] = to_string(cfg.cadence);
  config["steps"] = cfg.steps;
  config["reps"] = cfg.replications;
  config["n"] = cfg.knobs.n;
  config["m"] = cfg.knobs.inner();
  config["inflation"] = cfg.knobs.inflation;
  config["generating"] = env_json(cfg.generating);
  config["generating_source"] = source;

  const auto traces = run_experiment(cfg);
  CsvWriter trace_csv(config, {"rep", "t", "design_index", "y", "etig", "etsig", "metric"});
  for (const auto& tr : traces) {
    if (tr.failed) continue;
    for (const auto& s : tr.steps) {
      trace_csv.cell(tr.replication).cell(s.t).cell(s.design_index).cell(s.y).cell(s.etig)
          .cell(s.etsig).cell(s.metric);
      trace_csv.end_row();
    }
  }
  write_file(dir / "trace.csv", trace_csv.str());

  int failed = 0;
  for (const auto& tr : traces) failed += tr.failed ? 1 : 0;
  json summary;
  summary["config"] = config;
  summary["replications_failed"] = failed;
  summary["replications_succeeded"] = static_cast<int>(traces.size()) - failed;
  if (failed == static_cast<int>(traces.size())) {
    write_file(dir / "summary.json", summary.dump(2) + "\n");
    spdlog::error("every replication failed; no curves written");
    return kExitEstimatorFailure;
  }

  const Curves curves = aggregate(traces);
  const BoundLines lines = bound_reference_lines(cfg);
  const std::optional<double> line = lines.lower ? lines.lower : lines.upper;
  CsvWriter curves_csv(config, {"t", "mean", "q25", "q75", "bound_line"});
  for (std::size_t t = 0; t < curves.mean.size(); ++t) {
    curves_csv.cell(static_cast<int>(t)).cell(curves.mean[t]).cell(curves.q25[t]).cell(curves.q75[t]);
    curves_csv.cell(line ? format_number(*line) : std::string());
    curves_csv.end_row();
  }
  write_file(dir / "curves.csv", curves_csv.str());

  summary["final_mean_metric"] = number(curves.mean.back());
  summary["initial_metric"] = number(curves.mean.front());
  summary["bound_lines"] = {{"lower", lines.lower ? number(*lines.lower) : json(nullptr)},
                            {"upper", lines.upper ? number(*lines.upper) : json(nullptr)},
                            {"log_prior", number(lines.log_prior)},
                            {"design_index", lines.design_index},
                            {"checked_at_t", 1}};
  summary["first_step_report"] = report_json(lines.report);
  if (setting == Setting::Preference)
    summary["metric_note"] =
        "log density of theta* under the theta-marginal of the moment-matched Gaussian posterior fit";
  else
    summary["metric_note"] = "exact conjugate posterior theta-marginal log density";
  write_file(dir / "summary.json", summary.dump(2) + "\n");
  std::cout << "final mean metric " << format_number(curves.mean.back()) << " ("
            << curves.successful << " replications, " << failed << " failed)\n";
  return kExitOk;
}

// ---------------------------------------------------------------- toy

void cmd_toy(const CommonArgs& common, const ToyArgs& a) {
  if (a.x1_max < 1 || a.x2_max < 1) throw InvalidInput("--x1-max and --x2-max must be at least 1");
  if (!(a.sigma_theta2 > 0.0) || !(a.sigma_psi2 > 0.0) || !(a.sigma2 > 0.0))
    throw InvalidInput("toy variances must be positive");
  if (a.grid_points < 2 || !(a.grid_limit > 0.0)) throw InvalidInput("toy grid must have >= 2 points");
  const fs::path dir = prepare_out(common.out);
  json config;
  config["command"] = "toy";
  for (const auto& [k, v] : std::vector<std::pair<std::string, double>>{
           {"x1-max", a.x1_max}, {"x2-max", a.x2_max}, {"sigma-theta2", a.sigma_theta2},
           {"sigma-psi2", a.sigma_psi2}, {"sigma2", a.sigma2}, {"c", a.c},
           {"theta-star", a.theta_star}, {"psi-star", a.psi_star},
           {"grid-points", a.grid_points}, {"grid-limit", a.grid_limit}})
    config[k] = v;

  // action set: every integer pair in the box with at least one coordinate zero
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2, 2);
  s(0, 0) = a.sigma_theta2;
  s(1, 1) = a.sigma_psi2;
  const GaussianBelief belief(Eigen::VectorXd::Zero(2), s, {0});
  std::vector<Eigen::VectorXd> actions;
  for (int x1 = 0; x1 <= a.x1_max; ++x1) actions.push_back(Eigen::Vector2d(x1, 0));
  for (int x2 = 1; x2 <= a.x2_max; ++x2) actions.push_back(Eigen::Vector2d(0, x2));
  std::vector<ClosedFormValues> values;
  std::vector<double> etig;
  for (const auto& x : actions) {
    values.push_back(closed_form_values(belief, x, a.sigma2));
    etig.push_back(values.back().etig);
  }
  const int best = argmax_lowest(etig, "toy ETIG");
  CsvWriter table(config, {"design_index", "x1", "x2", "eig", "etig", "etsig", "is_xetig"});
  for (std::size_t i = 0; i < actions.size(); ++i) {
    table.cell(static_cast<int>(i)).cell(actions[i](0)).cell(actions[i](1)).cell(values[i].eig)
        .cell(values[i].etig).cell(values[i].etsig).cell(static_cast<int>(i) == best ? 1 : 0);
    table.end_row();
  }
  write_file(dir / "toy_actions.csv", table.str());

  // y ~ N(c (psi - theta), sigma2) with a N(0, I) prior; one observation at the truth's mean
  const double y = a.c * (a.psi_star - a.theta_star);
  const int g = a.grid_points;
  std::vector<double> axis(g);
  for (int i = 0; i < g; ++i) axis[i] = -a.grid_limit + 2.0 * a.grid_limit * i / (g - 1);
  std::vector<double> prior_d(g * g), post_d(g * g);
  double z = 0.0;
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j) {
      const double th = axis[i], ps = axis[j];
      const double p = std::exp(-0.5 * (th * th + ps * ps)) / (2.0 * M_PI);
      const double r = y - a.c * (ps - th);
      prior_d[i * g + j] = p;
      post_d[i * g + j] = p * std::exp(-0.5 * r * r / a.sigma2);
      z += post_d[i * g + j];
    }
  const double cell = std::pow(2.0 * a.grid_limit / (g - 1), 2);
  CsvWriter grid(config, {"theta", "psi", "mean_y", "prior_density", "posterior_density"});
  std::vector<double> theta_marginal(g, 0.0);
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j) {
      const double post = post_d[i * g + j] / (z * cell);
      theta_marginal[i] += post;
      grid.cell(axis[i]).cell(axis[j]).cell(a.c * (axis[j] - axis[i])).cell(prior_d[i * g + j]).cell(post);
      grid.end_row();
    }
  write_file(dir / "toy_grid.csv", grid.str());
  const int mode = static_cast<int>(std::max_element(theta_marginal.begin(), theta_marginal.end()) -
                                    theta_marginal.begin());

  json summary;
  summary["config"] = config;
  summary["xetig_index"] = best;
  summary["xetig"] = {actions[best](0), actions[best](1)};
  summary["etsig_at_xetig"] = values[best].etsig;
  summary["observed_y"] = y;
  summary["theta_posterior_mode"] = axis[mode];
  write_file(dir / "toy_summary.json", summary.dump(2) + "\n");
  std::cout << "x_ETIG = (" << actions[best](0) << ", " << actions[best](1)
            << "), ETSIG there = " << format_number(values[best].etsig) << "\n";
}

// ---------------------------------------------------------------- select-params

void cmd_select(const CommonArgs& common, const SelectArgs& a) {
  const Setting setting = parse_setting(common.setting);
  std::vector<ThreatLevel> levels;
  if (a.level == "all") levels = {ThreatLevel::NoThreat, ThreatLevel::Mild, ThreatLevel::Extreme};
  else levels = {parse_threat_level(a.level)};
  const int cands = a.candidates > 0 ? a.candidates : default_candidates(setting);
  MisjudgmentOptions opts;
  opts.theta_samples = common.theta_samples;
  const ModelOptions mo = model_options(common);
  const fs::path dir = prepare_out(common.out);
  json config = common_json(common);
  config["command"] = "select-params";
  config["level"] = a.level;
  config["candidates"] = cands;
  json out;
  out["config"] = config;
  for (ThreatLevel lv : levels) {
    json entry;
    try {
      const SelectionResult r = select_generating_params(setting, lv, cands, common.seed, mo, opts);
      entry = env_json(r.environment);
      entry["classified_level"] = to_string(r.level);
      entry["rt_at_xetig"] = number(r.rt);
      entry["m_pred"] = number(r.m_pred);
      entry["m_l_star"] = number(r.m_l_star);
      entry["e_m_l"] = number(r.e_m_l);
      entry["candidate"] = r.candidate;
      entry["xetig_index"] = r.xetig_index;
    } catch (const SelectionFailed& e) {
      entry["error"] = e.what();
    }
    out["selections"][to_string(lv)] = entry;
  }
  write_file(dir / "selection.json", out.dump(2) + "\n");
  std::cout << out["selections"].dump(2) << "\n";
}

// ---------------------------------------------------------------- config merging

bool flag_present(const std::vector<std::string>& args, const std::string& name) {
  const std::string flag = "--" + name;
  for (const auto& a : args)
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  return false;
}

// Flat JSON keyed by flag name; values become arguments placed before the explicit ones so
// explicit flags win.
std::vector<std::string> merge_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot read config file '" + path + "'");
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidInput("config file must hold a flat JSON object");
  std::size_t sub = 1;
  while (sub < args.size() && args[sub].rfind("-", 0) == 0) ++sub;
  if (sub >= args.size()) return args;
  std::vector<std::string> out(args.begin(), args.begin() + sub + 1);
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "config" || flag_present(args, it.key())) continue;
    const json& v = it.value();
    if (v.is_boolean()) {
      if (v.get<bool>()) out.push_back("--" + it.key());
    } else if (v.is_string()) {
      out.push_back("--" + it.key());
      out.push_back(v.get<std::string>());
    } else if (v.is_number_integer() || v.is_number_unsigned()) {
      out.push_back("--" + it.key());
      out.push_back(v.dump());
    } else if (v.is_number()) {
      out.push_back("--" + it.key());
      out.push_back(format_number(v.get<double>()));
    } else {
      throw InvalidInput("config key '" + it.key() + "' must be a scalar");
    }
  }
  out.insert(out.end(), args.begin() + sub + 1, args.end());
  return out;
}

void add_common(CLI::App* app, CommonArgs& c) {
  app->add_option("--setting", c.setting, "Experimental setting: path or preference")->capture_default_str();
  app->add_option("--seed", c.seed, "Master random seed")->capture_default_str();
  app->add_option("--out", c.out, "Output directory")->capture_default_str();
  app->add_option("--design-seed", c.design_seed, "Seed of the shared path-analysis design set")->capture_default_str();
  app->add_option("--design-count", c.design_count, "Number of path-analysis designs")->capture_default_str();
  app->add_option("--grid", c.grid, "Number of preference designs on [-79, 81]")->capture_default_str();
  app->add_option("--theta-samples", c.theta_samples, "Theta-prior samples for E[M_L] and the pseudo-prior (multi-dimensional Theta only)")->capture_default_str();
  app->add_option("--config", "Flat JSON file keyed by flag names; explicit flags override it");
}

}  // namespace

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

int run(const std::vector<std::string>& raw_args) {
  CLI::App app{"Transfer-aware active meta-learning diagnostics and experiments"};
  app.require_subcommand(1);
  CommonArgs common;
  DiagnoseArgs diag;
  RunArgs runa;
  ToyArgs toy;
  SelectArgs sel;

  auto* d = app.add_subcommand("diagnose", "Threat atlas over prior draws (atlas.csv, summary.json)");
  add_common(d, common);
  d->add_option("--samples", diag.samples, "Number of prior draws")->capture_default_str();

  auto* r = app.add_subcommand("run", "Simulated sequential experiments (trace.csv, curves.csv, summary.json)");
  add_common(r, common);
  r->add_option("--level", runa.level, "Threat level of the generating values: none, mild, extreme")->capture_default_str();
  r->add_option("--policy", runa.policy, "naive or oracle")->capture_default_str();
  r->add_option("--cadence", runa.cadence, "Oracle threat re-evaluation: every-step or once")->capture_default_str();
  r->add_option("--steps", runa.steps, "Steps per replication")->capture_default_str();
  r->add_option("--reps", runa.reps, "Replications")->capture_default_str();
  r->add_option("--n", runa.n, "Outer importance samples N (preference)")->capture_default_str();
  r->add_option("--m", runa.m, "Inner samples M (0 = floor(sqrt(N)))")->capture_default_str();
  r->add_option("--inflation", runa.inflation, "Covariance inflation of the proposal")->capture_default_str();
  r->add_option("--generating", runa.generating, "Comma-separated theta,psi... overriding the level's values");
  r->add_flag("--select-generating", runa.select_generating, "Select generating values from prior draws");
  r->add_option("--candidates", runa.candidates, "Candidates for --select-generating (0 = setting default)")->capture_default_str();

  auto* t = app.add_subcommand("toy", "Two-parameter toy tables (toy_actions.csv, toy_grid.csv)");
  add_common(t, common);
  t->add_option("--x1-max", toy.x1_max)->capture_default_str();
  t->add_option("--x2-max", toy.x2_max)->capture_default_str();
  t->add_option("--sigma-theta2", toy.sigma_theta2)->capture_default_str();
  t->add_option("--sigma-psi2", toy.sigma_psi2)->capture_default_str();
  t->add_option("--sigma2", toy.sigma2)->capture_default_str();
  t->add_option("--c", toy.c, "Outcome scale of y ~ N(c (psi - theta), sigma2)")->capture_default_str();
  t->add_option("--theta-star", toy.theta_star)->capture_default_str();
  t->add_option("--psi-star", toy.psi_star)->capture_default_str();
  t->add_option("--grid-points", toy.grid_points)->capture_default_str();
  t->add_option("--grid-limit", toy.grid_limit)->capture_default_str();

  auto* s = app.add_subcommand("select-params", "Select generating values per threat level (selection.json)");
  add_common(s, common);
  s->add_option("--level", sel.level, "none, mild, extreme or all")->capture_default_str();
  s->add_option("--candidates", sel.candidates, "Prior draws (0 = setting default)")->capture_default_str();

  try {
    const std::vector<std::string> args = merge_config(raw_args);
    std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
    app.parse(rev);
    if (d->parsed()) cmd_diagnose(common, diag);
    else if (r->parsed()) return cmd_run(common, runa);
    else if (t->parsed()) cmd_toy(common, toy);
    else if (s->parsed()) cmd_select(common, sel);
    return kExitOk;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInvalidConfig;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInvalidConfig;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalidConfig;
  } catch (const InvalidInput& e) {
    spdlog::error("invalid configuration: {}", e.what());
    return kExitInvalidConfig;
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  } catch (const ResampleRequired& e) {
    spdlog::error("estimator failure: {}", e.what());
    return kExitEstimatorFailure;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return kExitEstimatorFailure;
  }
}

}  // namespace metaoed::cli
