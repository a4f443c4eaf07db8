#include "endo/errors.hpp"
#include "endo/harness.hpp"
#include "yaml_util.hpp"

#include <fstream>
#include <sstream>

namespace endo::harness {

namespace {

using yamlu::check_keys;
using yamlu::integer;
using yamlu::line_of;
using yamlu::number;
using yamlu::text;

/// Overlay `over` onto `base`; maps merge key by key, anything else replaces.
YAML::Node merge(const YAML::Node& base, const YAML::Node& over) {
  if (!base || !base.IsMap() || !over.IsMap()) return over;
  YAML::Node out = YAML::Clone(base);
  for (const auto& kv : over) {
    const auto key = kv.first.as<std::string>();
    const YAML::Node existing = base[key];
    out[key] = existing ? merge(existing, kv.second) : kv.second;
  }
  return out;
}

std::size_t positive(const YAML::Node& node, const char* key, long long min_value) {
  const long long v = integer(node, key);
  if (v < min_value) {
    throw ConfigError(std::string("'") + key + "' must be at least " + std::to_string(min_value), line_of(node));
  }
  return static_cast<std::size_t>(v);
}

Value parse_value(const YAML::Node& node, const char* key) {
  if (node.IsScalar() && node.as<std::string>() == "median") return {true, 0.0};
  const double v = number(node, key);
  if (!std::isfinite(v)) throw ConfigError(std::string("'") + key + "' must be finite", line_of(node));
  return {false, v};
}

std::vector<double> number_list(const YAML::Node& node, const char* key) {
  if (!node.IsSequence()) throw ConfigError(std::string("'") + key + "' must be a list", line_of(node));
  std::vector<double> out;
  for (const auto& item : node) out.push_back(number(item, key));
  return out;
}

smooth::Kernel parse_kernel(const YAML::Node& node) {
  return yamlu::parse_enum(node, std::map<std::string, smooth::Kernel>{{"gaussian", smooth::Kernel::gaussian},
                                                                     {"epanechnikov", smooth::Kernel::epanechnikov}},
                           "kernel");
}

void parse_smoother(const YAML::Node& node, est::EstimatorConfig& cfg) {
  check_keys(node,
             {"kernel", "degree", "bandwidths", "bandwidth_scale", "bandwidth_method", "trim_relative",
              "trim_density_floor"},
             "smoother");
  if (node["kernel"]) cfg.smoother.kernel = parse_kernel(node["kernel"]);
  if (node["degree"]) {
    const long long deg = integer(node["degree"], "degree");
    if (deg < 0 || deg > 2) throw ConfigError("'degree' must be 0, 1 or 2", line_of(node["degree"]));
    cfg.smoother.degree = static_cast<int>(deg);
  }
  if (node["bandwidths"]) {
    cfg.smoother.bandwidths = number_list(node["bandwidths"], "bandwidths");
    for (double h : cfg.smoother.bandwidths) {
      if (!(h > 0.0)) throw ConfigError("bandwidths must be positive", line_of(node["bandwidths"]));
    }
  }
  if (node["bandwidth_scale"]) cfg.bandwidth_scale = number(node["bandwidth_scale"], "bandwidth_scale");
  if (node["bandwidth_method"]) {
    cfg.bandwidth_method = yamlu::parse_enum(
      node["bandwidth_method"],
      std::map<std::string, smooth::BandwidthMethod>{{"rule_of_thumb", smooth::BandwidthMethod::rule_of_thumb},
                                                     {"lscv", smooth::BandwidthMethod::lscv}},
      "bandwidth method");
  }
  if (node["trim_relative"]) cfg.trim_relative = number(node["trim_relative"], "trim_relative");
  if (node["trim_density_floor"]) {
    cfg.smoother.trim_density_floor = number(node["trim_density_floor"], "trim_density_floor");
  }
  if (!(cfg.bandwidth_scale > 0.0)) throw ConfigError("'bandwidth_scale' must be positive", line_of(node));
  if (!(cfg.trim_relative >= 0.0) || !(cfg.smoother.trim_density_floor >= 0.0)) {
    throw ConfigError("trim settings must be nonnegative", line_of(node));
  }
}

void parse_first_stage(const YAML::Node& node, est::EstimatorConfig& cfg) {
  check_keys(node, {"kernel", "bandwidths", "scale"}, "first_stage");
  if (node["kernel"]) cfg.first_stage.kernel = parse_kernel(node["kernel"]);
  if (node["bandwidths"]) cfg.first_stage.bandwidths = number_list(node["bandwidths"], "bandwidths");
  if (node["scale"]) cfg.first_stage_scale = number(node["scale"], "scale");
  if (!(cfg.first_stage_scale > 0.0)) throw ConfigError("first-stage 'scale' must be positive", line_of(node));
}

PointSpec parse_point(const YAML::Node& node, std::size_t k) {
  check_keys(node, {"d", "x", "z"}, "evaluation point");
  PointSpec p;
  if (node["d"]) p.d = parse_value(node["d"], "d");
  if (node["z"]) p.z = parse_value(node["z"], "z");
  if (node["x"]) {
    const YAML::Node xs = node["x"];
    if (xs.IsScalar()) {
      p.x.assign(k, parse_value(xs, "x"));
    } else {
      if (!xs.IsSequence()) throw ConfigError("'x' must be a list", line_of(xs));
      for (const auto& item : xs) p.x.push_back(parse_value(item, "x"));
    }
    if (p.x.size() != k) {
      throw ConfigError("'x' has " + std::to_string(p.x.size()) + " values but the model has " + std::to_string(k) +
                          " controls",
                        line_of(xs));
    }
  }
  return p;
}

bool needs_instrument(const EstimatorSpec& e) {
  return e.id == est::EstimatorId::tsls || e.id == est::EstimatorId::iv_ratio ||
         e.id == est::EstimatorId::clar_triangular || e.id == est::EstimatorId::lar_triangular ||
         e.mode == est::EffectMode::triangular;
}

bool pointwise(est::EstimatorId id) {
  using est::EstimatorId;
  return id == EstimatorId::iv_ratio || id == EstimatorId::clar_continuous || id == EstimatorId::lar_continuous ||
         id == EstimatorId::clar_binary || id == EstimatorId::lar_binary || id == EstimatorId::clar_triangular ||
         id == EstimatorId::lar_triangular || id == EstimatorId::counterfactual_mean || id == EstimatorId::att ||
         id == EstimatorId::ate;
}

EstimatorSpec parse_estimator(const YAML::Node& node, const dgp::ModelSpec& model) {
  check_keys(node,
             {"id", "label", "coefficient", "eval", "d_tilde", "mode", "smoother", "first_stage", "bootstrap",
              "max_trimmed_fraction", "denominator_floor", "weak_instrument_f", "effect_grid_points",
              "window_cutoff"},
             "estimator");
  if (!node["id"]) throw ConfigError("estimator entry needs an 'id'", line_of(node));
  EstimatorSpec e;
  try {
    e.id = est::estimator_from_string(text(node["id"], "id"));
  } catch (const ConfigError& err) {
    throw ConfigError(err.what(), line_of(node["id"]));
  }
  const std::size_t k = model.num_controls;
  const bool binary = model.treatment_kind() == dgp::TreatmentKind::binary;

  if (node["coefficient"]) e.coefficient = text(node["coefficient"], "coefficient");
  if (node["mode"]) {
    try {
      e.mode = est::effect_mode_from_string(text(node["mode"], "mode"));
    } catch (const ConfigError& err) {
      throw ConfigError(err.what(), line_of(node["mode"]));
    }
  }
  if (node["smoother"]) parse_smoother(node["smoother"], e.config);
  if (node["first_stage"]) parse_first_stage(node["first_stage"], e.config);
  if (node["bootstrap"]) {
    e.bootstrap = static_cast<std::size_t>(integer(node["bootstrap"], "bootstrap"));
    if (e.bootstrap != 0 && e.bootstrap < 50) {
      throw ConfigError("'bootstrap' must be 0 or at least 50", line_of(node["bootstrap"]));
    }
  }
  if (node["max_trimmed_fraction"]) {
    e.config.max_trimmed_fraction = number(node["max_trimmed_fraction"], "max_trimmed_fraction");
  }
  if (node["denominator_floor"]) e.config.denominator_floor = number(node["denominator_floor"], "denominator_floor");
  if (node["weak_instrument_f"]) e.config.weak_instrument_f = number(node["weak_instrument_f"], "weak_instrument_f");
  if (node["effect_grid_points"]) {
    e.config.effect_grid_points = positive(node["effect_grid_points"], "effect_grid_points", 3);
  }
  if (node["window_cutoff"]) e.config.window_cutoff = number(node["window_cutoff"], "window_cutoff");
  if (node["d_tilde"]) e.d_tilde = parse_value(node["d_tilde"], "d_tilde");

  const int line = line_of(node);
  using est::EstimatorId;
  const bool binary_only = e.id == EstimatorId::clar_binary || e.id == EstimatorId::lar_binary;
  const bool continuous_only = e.id == EstimatorId::clar_continuous || e.id == EstimatorId::lar_continuous ||
                               e.id == EstimatorId::clar_triangular || e.id == EstimatorId::lar_triangular ||
                               e.id == EstimatorId::iv_ratio;
  if (binary_only && !binary) throw ConfigError(std::string(est::to_string(e.id)) + " needs a binary treatment", line);
  if (continuous_only && binary) {
    throw ConfigError(std::string(est::to_string(e.id)) + " needs a continuous treatment", line);
  }
  if (needs_instrument(e) && !model.instrument) {
    throw ConfigError(std::string(est::to_string(e.id)) + " needs a model with an instrument", line);
  }
  if (binary && e.mode == est::EffectMode::triangular) {
    throw ConfigError("triangular mode needs a continuous treatment", line);
  }
  if (e.id == EstimatorId::ols || e.id == EstimatorId::tsls) {
    bool ok = e.coefficient == "intercept" || e.coefficient == "d";
    for (std::size_t j = 0; j < k; ++j) ok = ok || e.coefficient == "x" + std::to_string(j + 1);
    if (!ok) throw ConfigError("unknown coefficient '" + e.coefficient + "'", line);
  }

  if (node["eval"]) {
    if (!pointwise(e.id) || (binary && (e.id == EstimatorId::att || e.id == EstimatorId::ate))) {
      throw ConfigError(std::string(est::to_string(e.id)) + " takes no evaluation points here", line_of(node["eval"]));
    }
    const YAML::Node evals = node["eval"];
    if (!evals.IsSequence() || evals.size() == 0) {
      throw ConfigError("'eval' must be a nonempty list", line_of(evals));
    }
    for (const auto& p : evals) e.points.push_back(parse_point(p, k));
  } else if (pointwise(e.id) && !(binary && (e.id == EstimatorId::att || e.id == EstimatorId::ate))) {
    e.points.push_back(PointSpec{});
  }

  // Fill defaults and check what each estimator needs.
  for (auto& p : e.points) {
    const bool wants_x = e.id == EstimatorId::iv_ratio || e.id == EstimatorId::clar_continuous ||
                         e.id == EstimatorId::clar_binary || e.id == EstimatorId::clar_triangular;
    const bool wants_d = e.id != EstimatorId::iv_ratio && e.id != EstimatorId::clar_binary;
    if (wants_x && p.x.empty()) p.x.assign(k, Value{true, 0.0});
    if (e.id == EstimatorId::iv_ratio && !p.z) p.z = Value{true, 0.0};
    if (wants_d && !p.d) p.d = e.id == EstimatorId::lar_binary ? Value{false, 1.0} : Value{true, 0.0};
    if (binary && p.d && (p.d->median || (p.d->number != 0.0 && p.d->number != 1.0))) {
      throw ConfigError("binary treatment evaluation points need d in {0, 1}", line);
    }
  }
  if (binary && e.d_tilde && (e.d_tilde->median || (e.d_tilde->number != 0.0 && e.d_tilde->number != 1.0))) {
    throw ConfigError("binary treatment needs d_tilde in {0, 1}", line);
  }

  e.label = node["label"] ? text(node["label"], "label") : std::string(est::to_string(e.id));
  if (!node["label"] && (e.id == EstimatorId::ols || e.id == EstimatorId::tsls)) e.label += "_" + e.coefficient;
  return e;
}

DiagnosticSpec parse_diagnostic(const YAML::Node& node, const dgp::ModelSpec& model) {
  check_keys(node, {"name", "d", "d_tilde", "threshold", "bandwidths", "first_stage"}, "diagnostic");
  if (!node["name"]) throw ConfigError("diagnostic entry needs a 'name'", line_of(node));
  DiagnosticSpec d;
  d.kind = yamlu::parse_enum(node["name"],
                             std::map<std::string, DiagnosticKind>{{"separability", DiagnosticKind::separability},
                                                                   {"support_overlap", DiagnosticKind::support_overlap},
                                                                   {"cv_uniformity", DiagnosticKind::cv_uniformity}},
                             "diagnostic");
  if (node["threshold"]) d.threshold = number(node["threshold"], "threshold");
  if (node["bandwidths"]) d.bandwidths = number_list(node["bandwidths"], "bandwidths");
  if (node["first_stage"]) parse_first_stage(node["first_stage"], d.config);
  const bool binary = model.treatment_kind() == dgp::TreatmentKind::binary;
  d.d = binary ? Value{false, 0.0} : Value{true, 0.0};
  d.d_tilde = binary ? Value{false, 1.0} : Value{true, 0.0};
  if (node["d"]) d.d = parse_value(node["d"], "d");
  if (node["d_tilde"]) d.d_tilde = parse_value(node["d_tilde"], "d_tilde");
  if (d.kind == DiagnosticKind::cv_uniformity && !model.instrument) {
    throw ConfigError("cv_uniformity needs a model with an instrument", line_of(node));
  }
  return d;
}

} // namespace

ExperimentConfig parse_config(const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(source);
  } catch (const YAML::Exception& err) {
    throw ConfigError("malformed YAML: " + err.msg, err.mark.line >= 0 ? err.mark.line + 1 : 0);
  }
  if (!root || !root.IsMap()) throw ConfigError("experiment config must be a mapping", line_of(root));
  check_keys(root,
             {"version", "name", "model", "n", "reps", "master_seed", "workers", "oracle_draws", "projection_draws",
              "pilot_n", "estimators", "diagnostics", "outputs"},
             "experiment config");

  ExperimentConfig cfg;
  if (!root["version"]) throw ConfigError("missing 'version' (expected 1)", 1);
  cfg.version = static_cast<int>(integer(root["version"], "version"));
  if (cfg.version != 1) {
    throw ConfigError("unsupported config version " + std::to_string(cfg.version), line_of(root["version"]));
  }
  if (!root["name"]) throw ConfigError("missing 'name'", 1);
  cfg.name = text(root["name"], "name");

  if (!root["model"]) throw ConfigError("missing 'model'", 1);
  const YAML::Node model = root["model"];
  check_keys(model, {"dgp", "params", "spec"}, "model");
  YAML::Node spec_node;
  if (model["spec"]) {
    if (model["dgp"] || model["params"]) {
      throw ConfigError("model takes either 'spec' or 'dgp' (with optional 'params')", line_of(model));
    }
    spec_node = model["spec"];
    cfg.dgp = "custom";
  } else {
    if (!model["dgp"]) throw ConfigError("model needs 'dgp' or 'spec'", line_of(model));
    cfg.dgp = text(model["dgp"], "dgp");
    dgp::ModelSpec base;
    try {
      base = dgp::registry_spec(cfg.dgp);
    } catch (const ConfigError& err) {
      throw ConfigError(err.what(), line_of(model["dgp"]));
    }
    spec_node = dgp::to_node(base);
    if (model["params"]) spec_node = merge(spec_node, model["params"]);
  }
  try {
    cfg.model = dgp::from_node(spec_node);
  } catch (const ConfigError& err) {
    if (err.line() > 0) throw;
    throw ConfigError(err.what(), line_of(model));
  }

  if (root["n"]) cfg.n = positive(root["n"], "n", 1);
  if (root["reps"]) cfg.reps = positive(root["reps"], "reps", 1);
  if (root["master_seed"]) {
    try {
      cfg.master_seed = root["master_seed"].as<std::uint64_t>();
    } catch (const YAML::Exception&) {
      throw ConfigError("'master_seed' must be a nonnegative integer", line_of(root["master_seed"]));
    }
  }
  if (root["workers"]) cfg.workers = static_cast<int>(integer(root["workers"], "workers"));
  if (root["oracle_draws"]) cfg.oracle_draws = positive(root["oracle_draws"], "oracle_draws", 1000);
  if (root["projection_draws"]) cfg.projection_draws = positive(root["projection_draws"], "projection_draws", 1000);
  if (root["pilot_n"]) cfg.pilot_n = positive(root["pilot_n"], "pilot_n", 100);

  if (root["estimators"]) {
    const YAML::Node list = root["estimators"];
    if (!list.IsSequence()) throw ConfigError("'estimators' must be a list", line_of(list));
    for (const auto& item : list) cfg.estimators.push_back(parse_estimator(item, cfg.model));
  }
  for (std::size_t a = 0; a < cfg.estimators.size(); ++a) {
    for (std::size_t b = a + 1; b < cfg.estimators.size(); ++b) {
      if (cfg.estimators[a].label == cfg.estimators[b].label) {
        throw ConfigError("duplicate estimator label '" + cfg.estimators[a].label + "'",
                          line_of(root["estimators"][b]));
      }
    }
  }
  if (root["diagnostics"]) {
    const YAML::Node list = root["diagnostics"];
    if (!list.IsSequence()) throw ConfigError("'diagnostics' must be a list", line_of(list));
    for (const auto& item : list) cfg.diagnostics.push_back(parse_diagnostic(item, cfg.model));
  }
  if (root["outputs"]) {
    const YAML::Node out = root["outputs"];
    check_keys(out, {"csv", "json"}, "outputs");
    if (out["csv"]) cfg.csv_output = text(out["csv"], "csv");
    if (out["json"]) cfg.json_output = text(out["json"], "json");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

} // namespace endo::harness
