#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "metaoed/misjudgment.hpp"
#include "metaoed/models.hpp"

namespace metaoed {

enum class Setting { PathAnalysis, Preference };
enum class Policy { NaiveSOED, Oracle };
// When the oracle policy re-evaluates the threat of negative transfer.
enum class OracleCadence { EveryStep, Once };

std::string to_string(Setting s);
std::string to_string(Policy p);
std::string to_string(OracleCadence c);
Setting parse_setting(const std::string& text);  // "path" | "preference"
Policy parse_policy(const std::string& text);    // "naive" | "oracle"
OracleCadence parse_cadence(const std::string& text);  // "every-step" | "once"

inline constexpr std::uint64_t kDefaultPathDesignSeed = 1;
inline constexpr int kDefaultPathDesignCount = 100;
inline constexpr int kDefaultPreferenceGrid = 20;

struct ModelOptions {
  int path_design_count = kDefaultPathDesignCount;
  std::uint64_t path_design_seed = kDefaultPathDesignSeed;
  int preference_grid = kDefaultPreferenceGrid;
};

TaskModel make_model(Setting setting, const ModelOptions& options = {});
// Generating values used for the figures of each threat level.
TaskEnvironment reference_generating(Setting setting, ThreatLevel level);

struct EstimatorKnobs {
  int n = 10000;
  std::optional<int> m;  // defaults to floor(sqrt(n))
  double inflation = 1.44;

  int inner() const;
};

struct ExperimentConfig {
  Setting setting = Setting::PathAnalysis;
  Policy policy = Policy::NaiveSOED;
  OracleCadence cadence = OracleCadence::EveryStep;
  int steps = 10;
  int replications = 200;
  std::uint64_t seed = 0;
  TaskEnvironment generating;
  EstimatorKnobs knobs;
  ModelOptions model;
  MisjudgmentOptions misjudgment;
};

void validate(const ExperimentConfig& config);

struct TraceStep {
  int t = 0;  // 1-based step index
  int design_index = 0;
  double y = 0.0;
  double etig = 0.0;
  double etsig = 0.0;
  double metric = 0.0;  // log p(theta* | data up to and including this step)
  bool chose_etsig = false;
};

struct ExperimentTrace {
  int replication = 0;
  bool failed = false;
  std::string failure;
  double prior_metric = 0.0;  // log p(theta*) before any data
  std::vector<TraceStep> steps;
};

ExperimentTrace run_replication(const ExperimentConfig& config, const TaskModel& model, int replication);
std::vector<ExperimentTrace> run_experiment(const ExperimentConfig& config);

struct Curves {
  // index 0 is the prior (t = 0); index t is after t observations
  std::vector<double> mean;
  std::vector<double> q25;
  std::vector<double> q75;
  int successful = 0;
  int failed = 0;
};

// Throws PreconditionFailed when no trace succeeded.
Curves aggregate(const std::vector<ExperimentTrace>& traces);

struct BoundLines {
  std::optional<double> lower;
  std::optional<double> upper;
  double log_prior = 0.0;
  int design_index = 0;
  MisjudgmentReport report;
};

// First-step threat-level bound expressed in metric units: log p(theta*) + (M_pred - E[M_L]) at x_ETIG.
BoundLines bound_reference_lines(const ExperimentConfig& config);

struct SelectionResult {
  TaskEnvironment environment;
  ThreatLevel level = ThreatLevel::NoThreat;
  double rt = 0.0;
  double m_pred = 0.0;
  double m_l_star = 0.0;
  double e_m_l = 0.0;
  int candidate = 0;
  int xetig_index = 0;
};

SelectionResult select_generating_params(Setting setting, ThreatLevel level, int n_candidates,
                                         std::uint64_t seed, const ModelOptions& model_options = {},
                                         const MisjudgmentOptions& options = {});

int default_candidates(Setting setting);

}  // namespace metaoed
