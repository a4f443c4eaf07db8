#pragma once

#include "endo/dgp.hpp"
#include "endo/diagnostics.hpp"
#include "endo/estimators.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace endo::harness {

/// A number, or the median of the corresponding column in a pilot sample.
struct Value {
  bool median = false;
  double number = 0.0;
};

struct PointSpec {
  std::optional<Value> d;
  std::vector<Value> x;
  std::optional<Value> z;
};

struct EstimatorSpec {
  est::EstimatorId id = est::EstimatorId::ols;
  /// Row label in the summary; defaults to the estimator id (ols/tsls add the coefficient).
  std::string label;
  /// ols/tsls: intercept, d, x1..xk.
  std::string coefficient = "d";
  std::vector<PointSpec> points;
  std::optional<Value> d_tilde;
  est::EffectMode mode = est::EffectMode::conditional_independence;
  est::EstimatorConfig config;
  /// Bootstrap replicates per experiment replicate; 0 disables.
  std::size_t bootstrap = 0;
};

enum class DiagnosticKind { separability, support_overlap, cv_uniformity };

struct DiagnosticSpec {
  DiagnosticKind kind = DiagnosticKind::separability;
  Value d;
  Value d_tilde;
  std::optional<double> threshold;
  std::vector<double> bandwidths;
  /// cv_uniformity: first-stage smoother for the control variable.
  est::EstimatorConfig config;
};

struct ExperimentConfig {
  int version = 1;
  std::string name;
  std::string dgp;
  dgp::ModelSpec model;
  std::size_t n = 1000;
  std::size_t reps = 1;
  std::uint64_t master_seed = 1;
  int workers = 0;
  std::size_t oracle_draws = dgp::default_oracle_draws;
  std::size_t projection_draws = 10'000'000;
  std::size_t pilot_n = 100'000;
  std::vector<EstimatorSpec> estimators;
  std::vector<DiagnosticSpec> diagnostics;
  std::string csv_output;
  std::string json_output;
};

/// Parses a version-1 experiment file. Errors are ConfigError with the source line.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

struct OracleEntry {
  double value = 0.0;
  double se = 0.0;
  std::string provenance;
};

/// One output row: an estimator entry at one evaluation point.
struct RowSummary {
  std::string label;
  std::string estimator;
  std::optional<double> eval_d;
  std::vector<double> eval_x;
  std::optional<double> d_tilde;
  std::optional<OracleEntry> oracle;
  std::optional<double> projection;
  std::string oracle_note;
  double mean = 0.0;
  double sd = 0.0;
  std::optional<double> bias;
  std::optional<double> rmse;
  double trimmed_frac = 0.0;
  std::optional<double> mean_se;
  std::size_t failures = 0;
  std::size_t successes = 0;
  std::size_t warnings = 0;
  std::string first_error;
};

struct DiagnosticSummary {
  std::string name;
  double mean_statistic = 0.0;
  double median_statistic = 0.0;
  double threshold = 0.0;
  std::size_t pass = 0;
  std::size_t warn = 0;
  std::size_t fail = 0;
  std::size_t failures = 0;
};

struct ExperimentSummary {
  std::string name;
  std::string dgp;
  std::size_t n = 0;
  std::size_t reps = 0;
  std::uint64_t master_seed = 0;
  std::vector<RowSummary> rows;
  std::vector<DiagnosticSummary> diagnostics;

  nlohmann::ordered_json to_json() const;
  static ExperimentSummary from_json(const nlohmann::ordered_json& j);
  /// `estimator_id,eval_d,eval_x,oracle,mean,bias,sd,rmse,trimmed_frac,failures`;
  /// eval_x joins several controls with ';', and iv_ratio rows carry z in eval_d.
  std::string to_csv() const;
  std::string to_text() const;
};

/// Resolved evaluation rows with their ground truth, computed once per experiment.
struct PlannedRow {
  std::size_t estimator = 0;
  std::optional<double> eval_d;
  std::vector<double> eval_x;
  std::optional<double> eval_z;
  std::optional<double> d_tilde;
  std::optional<OracleEntry> oracle;
  std::optional<double> projection;
  std::string oracle_note;
};

struct Plan {
  std::vector<PlannedRow> rows;
  /// Resolved (d, d_tilde) for each diagnostic entry.
  std::vector<std::pair<double, double>> diagnostic_points;
};

Plan plan_experiment(const ExperimentConfig& config);

/// Throws Error naming the estimator when more than half of its replicates fail.
ExperimentSummary run_experiment(const ExperimentConfig& config, int workers = 0);
ExperimentSummary run_experiment(const ExperimentConfig& config, const Plan& plan, int workers = 0);

enum class ExportFormat { csv, json };
/// Throws IoError when the file cannot be written.
void export_summary(const ExperimentSummary& summary, ExportFormat format, const std::filesystem::path& path);
ExperimentSummary load_summary_json(const std::filesystem::path& path);
std::string dump_json(const ExperimentSummary& summary);

} // namespace endo::harness
