#include "endo/errors.hpp"
#include "endo/estimators.hpp"
#include "endo/format.hpp"

#include <array>
#include <utility>

namespace endo::est {

namespace {

constexpr std::array<std::pair<EstimatorId, const char*>, 12> id_names{{
  {EstimatorId::ols, "ols"},
  {EstimatorId::tsls, "tsls"},
  {EstimatorId::iv_ratio, "iv_ratio"},
  {EstimatorId::clar_continuous, "clar_continuous"},
  {EstimatorId::lar_continuous, "lar_continuous"},
  {EstimatorId::clar_binary, "clar_binary"},
  {EstimatorId::lar_binary, "lar_binary"},
  {EstimatorId::clar_triangular, "clar_triangular"},
  {EstimatorId::lar_triangular, "lar_triangular"},
  {EstimatorId::counterfactual_mean, "counterfactual_mean"},
  {EstimatorId::att, "att"},
  {EstimatorId::ate, "ate"},
}};

nlohmann::ordered_json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

} // namespace

const char* to_string(EstimatorId id) {
  for (const auto& [key, name] : id_names) {
    if (key == id) return name;
  }
  return "?";
}

EstimatorId estimator_from_string(const std::string& name) {
  for (const auto& [key, label] : id_names) {
    if (name == label) return key;
  }
  std::string known;
  for (const auto& [key, label] : id_names) known += (known.empty() ? "" : ", ") + std::string(label);
  throw ConfigError("unknown estimator '" + name + "' (known: " + known + ")");
}

std::vector<EstimatorInfo> estimator_registry() {
  return {
    {EstimatorId::ols, "least squares of Y on (1, D, X) with HC0 standard errors"},
    {EstimatorId::tsls, "two-stage least squares with instruments (1, Z, X) and first-stage F"},
    {EstimatorId::iv_ratio, "ratio of local-linear z-derivatives of E[Y|Z,X] and E[D|Z,X]"},
    {EstimatorId::clar_continuous, "local-linear derivative of E[Y|D,X] in d at (d, x)"},
    {EstimatorId::lar_continuous, "conditional derivative averaged over X given D near d"},
    {EstimatorId::clar_binary, "E[Y|D=1,X=x] - E[Y|D=0,X=x] from arm-wise local fits"},
    {EstimatorId::lar_binary, "arm contrast averaged over X given D = d"},
    {EstimatorId::clar_triangular, "derivative of E[Y|D,X,V] averaged over V given (D,X) near (d,x)"},
    {EstimatorId::lar_triangular, "derivative of E[Y|D,X,V] averaged over (X,V) given D near d"},
    {EstimatorId::counterfactual_mean, "E[Y(d)|D=d_tilde] by averaging fitted means over the d_tilde population"},
    {EstimatorId::att, "effect on the treated: arm contrast over X|D=1, or d-derivative of E[Y(d)|D=d_tilde]"},
    {EstimatorId::ate, "average effect: arm contrast over X, or d-derivative of E[Y(d)]"},
  };
}

const char* to_string(EffectMode mode) {
  return mode == EffectMode::conditional_independence ? "conditional_independence" : "triangular";
}

EffectMode effect_mode_from_string(const std::string& name) {
  if (name == "conditional_independence") return EffectMode::conditional_independence;
  if (name == "triangular") return EffectMode::triangular;
  throw ConfigError("unknown mode '" + name + "' (known: conditional_independence, triangular)");
}

std::string Estimate::csv_header(std::size_t num_controls) {
  std::string out = "estimator_id,d";
  for (std::size_t j = 0; j < num_controls; ++j) out += ",x" + std::to_string(j + 1);
  return out + ",value,se,n_effective,trimmed_fraction";
}

std::string Estimate::csv_row(std::size_t num_controls) const {
  std::string out = to_string(id);
  out += ',' + (eval_d ? format_double(*eval_d) : std::string());
  for (std::size_t j = 0; j < num_controls; ++j) {
    out += ',' + (j < eval_x.size() ? format_double(eval_x[j]) : std::string());
  }
  out += ',' + format_field(value);
  out += ',' + (se ? format_field(*se) : std::string());
  out += ',' + format_double(n_effective);
  out += ',' + format_double(trimmed_fraction);
  return out;
}

nlohmann::ordered_json Estimate::to_json() const {
  nlohmann::ordered_json j;
  j["estimator_id"] = to_string(id);
  j["eval_d"] = eval_d ? number_or_null(*eval_d) : nlohmann::ordered_json(nullptr);
  j["eval_x"] = eval_x;
  j["value"] = number_or_null(value);
  j["se"] = se ? number_or_null(*se) : nlohmann::ordered_json(nullptr);
  j["n_effective"] = n_effective;
  j["trimmed_fraction"] = trimmed_fraction;
  j["bandwidths"] = bandwidths;
  j["trim_floor"] = trim_floor;
  j["warnings"] = warnings;
  return j;
}

} // namespace endo::est
