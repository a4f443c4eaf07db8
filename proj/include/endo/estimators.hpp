#pragma once

#include "endo/dataset.hpp"
#include "endo/dgp.hpp"
#include "endo/kernels.hpp"
#include "endo/smoothers.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace endo::est {

enum class EstimatorId {
  ols,
  tsls,
  iv_ratio,
  clar_continuous,
  lar_continuous,
  clar_binary,
  lar_binary,
  clar_triangular,
  lar_triangular,
  counterfactual_mean,
  att,
  ate,
};

const char* to_string(EstimatorId id);
/// Throws ConfigError for an unknown name.
EstimatorId estimator_from_string(const std::string& name);

struct EstimatorInfo {
  EstimatorId id;
  std::string description;
};
std::vector<EstimatorInfo> estimator_registry();

/// How averaged effects condition: on X alone, or on X and the control variable V.
enum class EffectMode { conditional_independence, triangular };
const char* to_string(EffectMode mode);
EffectMode effect_mode_from_string(const std::string& name);

struct EstimatorConfig {
  /// Second-stage smoother. Empty bandwidths are selected from the data and
  /// multiplied by bandwidth_scale; a zero trim floor is replaced by
  /// trim_relative times the largest density over the sample.
  smooth::SmootherConfig smoother;
  /// Smoother for the control-variable CDF over (D; Z, X).
  smooth::SmootherConfig first_stage;
  smooth::BandwidthMethod bandwidth_method = smooth::BandwidthMethod::rule_of_thumb;
  double bandwidth_scale = 1.0;
  double first_stage_scale = 1.0;
  double trim_relative = 1e-3;
  /// Averaged effects fail when more than this share of their weight is trimmed.
  double max_trimmed_fraction = 0.10;
  double denominator_floor = 1e-3;
  double weak_instrument_f = 10.0;
  std::size_t effect_grid_points = 21;
  /// Rows further than this many bandwidths from the target D are left out of averages.
  double window_cutoff = 4.0;
};

struct Estimate {
  EstimatorId id = EstimatorId::ols;
  double value = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> se;
  std::optional<double> eval_d;
  std::vector<double> eval_x;
  double n_effective = 0.0;
  double trimmed_fraction = 0.0;
  std::vector<double> bandwidths;
  double trim_floor = 0.0;
  std::vector<std::string> warnings;

  static std::string csv_header(std::size_t num_controls);
  /// `estimator_id,d,x...,value,se,n_effective,trimmed_fraction`
  std::string csv_row(std::size_t num_controls) const;
  nlohmann::ordered_json to_json() const;
};

/// Linear regression output; coefficients are named intercept, d, x1..xk.
struct LinearFit {
  std::vector<std::string> names;
  std::vector<double> coef;
  std::vector<double> se;
  std::optional<double> first_stage_f;
  std::vector<std::string> warnings;
  std::size_t n = 0;

  /// Throws PreconditionError for an unknown coefficient name.
  double coefficient(const std::string& name) const;
  double standard_error(const std::string& name) const;
  Estimate as_estimate(EstimatorId id, const std::string& name) const;
};

/// OLS of Y on (1, D, X) with heteroskedasticity-robust (HC0) standard errors.
LinearFit ols_fit(const DataView& data);

struct LinearProjection {
  std::vector<std::string> names;
  std::vector<double> coef;
  dgp::Provenance provenance = dgp::Provenance::closed_form;
  /// Monte Carlo standard errors; zero for closed form.
  std::vector<double> se;
};

/// Population projection of Y on (1, D, X) under the spec's law. Closed form
/// when every term is affine in the primitive draws, Monte Carlo otherwise.
LinearProjection theoretical_lp(const dgp::ModelSpec& spec, std::size_t mc_draws = 10'000'000,
                                std::uint64_t seed = 1);

/// 2SLS with instruments (1, Z, X). Attaches a warning when the first-stage
/// F statistic on Z is below `config.weak_instrument_f`.
LinearFit tsls_fit(const DataView& data, const EstimatorConfig& config = {});

/// dE[Y|Z,X]/dz divided by dE[D|Z,X]/dz at (z, x).
Estimate iv_ratio(const DataView& data, double z, std::span<const double> x, const EstimatorConfig& config);

Estimate clar_continuous(const DataView& data, double d, std::span<const double> x, const EstimatorConfig& config);
Estimate lar_continuous(const DataView& data, double d, const EstimatorConfig& config);

Estimate clar_binary(const DataView& data, std::span<const double> x, const EstimatorConfig& config);
Estimate lar_binary(const DataView& data, int d, const EstimatorConfig& config);

struct ControlVariableColumn {
  std::vector<double> v;
  std::vector<char> trimmed;
  std::vector<double> bandwidths;
};

/// v_i = F(D_i | Z_i, X_i), row-aligned with `data`.
ControlVariableColumn construct_control_variable(const DataView& data, const EstimatorConfig& config);

Estimate clar_triangular(const DataView& data, const ControlVariableColumn& v, double d, std::span<const double> x,
                         const EstimatorConfig& config);
Estimate lar_triangular(const DataView& data, const ControlVariableColumn& v, double d,
                        const EstimatorConfig& config);

/// E[Y(d) | D = d_tilde]. Triangular mode needs `v`.
Estimate counterfactual_mean(const DataView& data, double d, double d_tilde, const EstimatorConfig& config,
                             EffectMode mode = EffectMode::conditional_independence,
                             const ControlVariableColumn* v = nullptr);

/// Binary D: E[Y(1) - Y(0) | D = 1]; d and d_tilde are ignored.
/// Continuous D: d/dt E[Y(t) | D = d_tilde] at t = d.
Estimate att(const DataView& data, double d, double d_tilde, const EstimatorConfig& config,
             EffectMode mode = EffectMode::conditional_independence, const ControlVariableColumn* v = nullptr);

/// Binary D: E[Y(1) - Y(0)]; d is ignored. Continuous D: d/dt E[Y(t)] at t = d.
Estimate ate(const DataView& data, double d, const EstimatorConfig& config,
             EffectMode mode = EffectMode::conditional_independence, const ControlVariableColumn* v = nullptr);

using ScalarEstimator = std::function<double(const DataView&)>;

/// Pairs-bootstrap standard deviation over `replicates` resamples. Replicate b
/// draws from derive_seed(seed, b). Throws PreconditionError for fewer than 50
/// replicates and InstabilityError when more than 10% of them fail.
double bootstrap_se(const ScalarEstimator& estimator, const DataView& data, std::size_t replicates,
                    std::uint64_t seed, kernels::Exec exec = kernels::Exec::parallel);

} // namespace endo::est
