#include "endo/dgp.hpp"
#include "endo/errors.hpp"
#include "yaml_util.hpp"

#include <yaml-cpp/yaml.h>

#include <map>

namespace endo::dgp {

namespace {

using yamlu::check_keys;
using yamlu::line_of;
using yamlu::number;
using yamlu::parse_enum;

const std::map<std::string, Shape>& shape_names() {
  static const std::map<std::string, Shape> m{{"zero", Shape::zero},
                                              {"identity", Shape::identity},
                                              {"square", Shape::square},
                                              {"centered_square", Shape::centered_square},
                                              {"cube", Shape::cube},
                                              {"sin", Shape::sin},
                                              {"cos", Shape::cos},
                                              {"tanh", Shape::tanh},
                                              {"step", Shape::step}};
  return m;
}

YAML::Node term_node(const ControlTerm& t) {
  YAML::Node n;
  n["linear"] = t.linear;
  n["nonlinear"] = t.nonlinear;
  n["shape"] = to_string(t.shape);
  return n;
}

ControlTerm parse_term(const YAML::Node& node, const char* where) {
  check_keys(node, {"linear", "nonlinear", "shape"}, where);
  ControlTerm t;
  if (node["linear"]) t.linear = number(node["linear"], "linear");
  if (node["nonlinear"]) t.nonlinear = number(node["nonlinear"], "nonlinear");
  if (node["shape"]) t.shape = parse_enum(node["shape"], shape_names(), "shape");
  return t;
}

YAML::Node dist_node(const Distribution& d) {
  YAML::Node n;
  n["dist"] = to_string(d.kind);
  n["loc"] = d.loc;
  n["scale"] = d.scale;
  return n;
}

Distribution parse_dist(const YAML::Node& node, const char* where) {
  static const std::map<std::string, DistKind> kinds{
    {"normal", DistKind::normal}, {"uniform", DistKind::uniform}, {"exponential", DistKind::exponential}};
  check_keys(node, {"dist", "loc", "scale"}, where);
  Distribution d;
  if (node["dist"]) d.kind = parse_enum(node["dist"], kinds, "distribution");
  if (node["loc"]) d.loc = number(node["loc"], "loc");
  if (node["scale"]) d.scale = number(node["scale"], "scale");
  return d;
}

ModelSpec base_model(const std::string& name) {
  ModelSpec s;
  s.name = name;
  s.num_controls = 1;
  s.outcome.beta = {1.0};
  return s;
}

// Y = 2D + X + eps, D = 0.8X + U, eps = 0.5X + nu; X, U, nu standard normal.
ModelSpec make_dgp_l1() {
  ModelSpec s = base_model("dgp_l1");
  s.outcome.tau = 2.0;
  s.treatment.x = {0.8, 0.0, Shape::zero};
  s.errors.x = {0.5, 0.0, Shape::zero};
  return s;
}

// Skewed X (centered Exp(1)); eps = 0.5(X^2 - 1) + nu; D = 0.8X + 0.4(X^2 - 1) + U.
ModelSpec make_dgp_l2() {
  ModelSpec s = base_model("dgp_l2");
  s.outcome.tau = 2.0;
  s.errors.x_dist = {DistKind::exponential, -1.0, 1.0};
  s.errors.x = {0.0, 0.5, Shape::centered_square};
  s.treatment.x = {0.8, 0.4, Shape::centered_square};
  return s;
}

// Y = (1 + 0.5 eps) D + X^2, eps = 0.5(X^2 - 1) + nu, D = 0.8X + U.
ModelSpec make_interaction() {
  ModelSpec s = base_model("interaction");
  s.outcome.family = Family::interaction;
  s.outcome.slope = 1.0;
  s.outcome.slope_eps = 0.5;
  s.outcome.h = {0.0, 1.0, Shape::square};
  s.outcome.eps_loading = 0.0;
  s.errors.x = {0.0, 0.5, Shape::centered_square};
  s.treatment.x = {0.8, 0.0, Shape::zero};
  return s;
}

// Y = sin(D) + X^3 + eps, eps = 0.5X + nu, D = 0.8X + U.
ModelSpec make_additive_sin() {
  ModelSpec s = base_model("additive_sin");
  s.outcome.family = Family::additive;
  s.outcome.d_shape = Shape::sin;
  s.outcome.h = {0.0, 1.0, Shape::cube};
  s.errors.x = {0.5, 0.0, Shape::zero};
  s.treatment.x = {0.8, 0.0, Shape::zero};
  return s;
}

// Y = 1.5D + X + eps, eps = 0.5X + nu, D = 1{0.8X + U > 0}.
ModelSpec make_binary_const() {
  ModelSpec s = base_model("binary_const");
  s.outcome.tau = 1.5;
  s.treatment.kind = TreatmentKind::binary;
  s.treatment.x = {0.8, 0.0, Shape::zero};
  s.errors.x = {0.5, 0.0, Shape::zero};
  return s;
}

// Y = D X (no noise), D = 1{X + U > 0}.
ModelSpec make_binary_dx() {
  ModelSpec s = base_model("binary_dx");
  s.outcome.family = Family::interaction;
  s.outcome.slope = 0.0;
  s.outcome.slope_x = 1.0;
  s.outcome.eps_loading = 0.0;
  s.errors.nu_scale = 0.0;
  s.treatment.kind = TreatmentKind::binary;
  s.treatment.x = {1.0, 0.0, Shape::zero};
  return s;
}

// Every unit treated: D = 1{1 > 0}.
ModelSpec make_binary_degenerate() {
  ModelSpec s = make_binary_const();
  s.name = "binary_degenerate";
  s.treatment.intercept = 1.0;
  s.treatment.x = {0.0, 0.0, Shape::zero};
  s.treatment.u_scale = 0.0;
  return s;
}

// Triangular, endogenous control:
//   Y = 2D + X + eps, D = Z + 0.5X + eta, Z = 0.5(X^2 - 1) + zeta,
//   eps = 0.5(X^2 - 1) + 0.5 eta + nu.
ModelSpec make_triangular_endox() {
  ModelSpec s = base_model("triangular_endox");
  s.outcome.tau = 2.0;
  s.instrument = InstrumentSpec{{0.0, 0.5, Shape::centered_square}, {}};
  s.treatment.x = {0.5, 0.0, Shape::zero};
  s.treatment.pi_z = 1.0;
  s.errors.x = {0.0, 0.5, Shape::centered_square};
  s.errors.u_loading = 0.5;
  return s;
}

// Textbook triangular model with exogenous control: Z independent of X, eps = 0.5 eta + nu.
ModelSpec make_triangular_exog() {
  ModelSpec s = base_model("triangular_exog");
  s.outcome.tau = 2.0;
  s.instrument = InstrumentSpec{{0.0, 0.0, Shape::zero}, {}};
  s.treatment.x = {0.5, 0.0, Shape::zero};
  s.treatment.pi_z = 1.0;
  s.errors.u_loading = 0.5;
  return s;
}

// Heterogeneous effect in a triangular model: Y = (1 + 0.5 eps) D + X^2.
ModelSpec make_triangular_interaction() {
  ModelSpec s = make_triangular_endox();
  s.name = "triangular_interaction";
  s.outcome.family = Family::interaction;
  s.outcome.slope = 1.0;
  s.outcome.slope_eps = 0.5;
  s.outcome.h = {0.0, 1.0, Shape::square};
  s.outcome.eps_loading = 0.0;
  return s;
}

struct Preset {
  const char* name;
  const char* description;
  ModelSpec (*make)();
};

const Preset presets[] = {
  {"dgp_l1", "linear, Y=2D+X+eps, D=0.8X+U, eps=0.5X+nu (Gaussian)", make_dgp_l1},
  {"dgp_l2", "linear, skewed X, eps=0.5(X^2-1)+nu, D=0.8X+0.4(X^2-1)+U", make_dgp_l2},
  {"interaction", "Y=(1+0.5eps)D+X^2, eps=0.5(X^2-1)+nu, D=0.8X+U", make_interaction},
  {"additive_sin", "Y=sin(D)+X^3+eps, eps=0.5X+nu, D=0.8X+U", make_additive_sin},
  {"binary_const", "Y=1.5D+X+eps, eps=0.5X+nu, D=1{0.8X+U>0}", make_binary_const},
  {"binary_dx", "Y=D*X (noiseless), D=1{X+U>0}", make_binary_dx},
  {"binary_degenerate", "binary_const with D=1 for every unit", make_binary_degenerate},
  {"triangular_endox", "Y=2D+X+eps, D=Z+0.5X+eta, Z=0.5(X^2-1)+zeta, eps=0.5(X^2-1)+0.5eta+nu",
   make_triangular_endox},
  {"triangular_exog", "Y=2D+X+eps, D=Z+0.5X+eta, Z independent of X, eps=0.5eta+nu", make_triangular_exog},
  {"triangular_interaction", "triangular_endox with Y=(1+0.5eps)D+X^2", make_triangular_interaction},
};

} // namespace

std::vector<RegistryEntry> registry() {
  std::vector<RegistryEntry> out;
  for (const auto& p : presets) out.push_back({p.name, p.description});
  return out;
}

ModelSpec registry_spec(const std::string& name) {
  for (const auto& p : presets) {
    if (name == p.name) return p.make();
  }
  throw ConfigError("unknown DGP '" + name + "' (see list-dgps)");
}

YAML::Node to_node(const ModelSpec& spec) {
  YAML::Node n;
  n["name"] = spec.name;
  n["controls"] = spec.num_controls;

  YAML::Node o;
  o["family"] = to_string(spec.outcome.family);
  o["intercept"] = spec.outcome.intercept;
  o["tau"] = spec.outcome.tau;
  YAML::Node beta(YAML::NodeType::Sequence);
  for (double b : spec.outcome.beta) beta.push_back(b);
  beta.SetStyle(YAML::EmitterStyle::Flow);
  o["beta"] = beta;
  o["d_shape"] = to_string(spec.outcome.d_shape);
  o["d_scale"] = spec.outcome.d_scale;
  o["h"] = term_node(spec.outcome.h);
  o["slope"] = spec.outcome.slope;
  o["slope_eps"] = spec.outcome.slope_eps;
  o["slope_x"] = spec.outcome.slope_x;
  o["eps_loading"] = spec.outcome.eps_loading;
  n["outcome"] = o;

  YAML::Node t;
  t["kind"] = to_string(spec.treatment.kind);
  t["intercept"] = spec.treatment.intercept;
  t["x"] = term_node(spec.treatment.x);
  t["pi_z"] = spec.treatment.pi_z;
  t["u_scale"] = spec.treatment.u_scale;
  n["treatment"] = t;

  if (spec.instrument) {
    YAML::Node i;
    i["x"] = term_node(spec.instrument->x);
    i["innovation"] = dist_node(spec.instrument->innovation);
    n["instrument"] = i;
  }

  YAML::Node e;
  e["x_dist"] = dist_node(spec.errors.x_dist);
  e["u_dist"] = dist_node(spec.errors.u_dist);
  e["nu_dist"] = dist_node(spec.errors.nu_dist);
  e["nu_scale"] = spec.errors.nu_scale;
  e["x"] = term_node(spec.errors.x);
  e["u_loading"] = spec.errors.u_loading;
  n["errors"] = e;
  return n;
}

ModelSpec from_node(const YAML::Node& node) {
  static const std::map<std::string, Family> families{
    {"linear", Family::linear}, {"additive", Family::additive}, {"interaction", Family::interaction}};
  static const std::map<std::string, TreatmentKind> kinds{{"continuous", TreatmentKind::continuous},
                                                          {"binary", TreatmentKind::binary}};
  check_keys(node, {"name", "controls", "outcome", "treatment", "instrument", "errors"}, "model");
  ModelSpec s;
  s.outcome.beta.clear();
  if (node["name"]) s.name = node["name"].as<std::string>();
  if (node["controls"]) {
    const double k = number(node["controls"], "controls");
    if (k < 1 || k != static_cast<double>(static_cast<std::size_t>(k))) {
      throw ConfigError("'controls' must be a positive integer", line_of(node["controls"]));
    }
    s.num_controls = static_cast<std::size_t>(k);
  }
  if (const auto o = node["outcome"]) {
    check_keys(o, {"family", "intercept", "tau", "beta", "d_shape", "d_scale", "h", "slope", "slope_eps", "slope_x",
                   "eps_loading"},
               "outcome");
    if (o["family"]) s.outcome.family = parse_enum(o["family"], families, "family");
    if (o["intercept"]) s.outcome.intercept = number(o["intercept"], "intercept");
    if (o["tau"]) s.outcome.tau = number(o["tau"], "tau");
    if (o["beta"]) {
      if (!o["beta"].IsSequence()) throw ConfigError("'beta' must be a list", line_of(o["beta"]));
      for (const auto& b : o["beta"]) s.outcome.beta.push_back(number(b, "beta"));
    }
    if (o["d_shape"]) s.outcome.d_shape = parse_enum(o["d_shape"], shape_names(), "shape");
    if (o["d_scale"]) s.outcome.d_scale = number(o["d_scale"], "d_scale");
    if (o["h"]) s.outcome.h = parse_term(o["h"], "outcome.h");
    if (o["slope"]) s.outcome.slope = number(o["slope"], "slope");
    if (o["slope_eps"]) s.outcome.slope_eps = number(o["slope_eps"], "slope_eps");
    if (o["slope_x"]) s.outcome.slope_x = number(o["slope_x"], "slope_x");
    if (o["eps_loading"]) s.outcome.eps_loading = number(o["eps_loading"], "eps_loading");
  }
  if (s.outcome.beta.empty()) s.outcome.beta.assign(s.num_controls, s.outcome.family == Family::linear ? 1.0 : 0.0);
  if (const auto t = node["treatment"]) {
    check_keys(t, {"kind", "intercept", "x", "pi_z", "u_scale"}, "treatment");
    if (t["kind"]) s.treatment.kind = parse_enum(t["kind"], kinds, "treatment kind");
    if (t["intercept"]) s.treatment.intercept = number(t["intercept"], "intercept");
    if (t["x"]) s.treatment.x = parse_term(t["x"], "treatment.x");
    if (t["pi_z"]) s.treatment.pi_z = number(t["pi_z"], "pi_z");
    if (t["u_scale"]) s.treatment.u_scale = number(t["u_scale"], "u_scale");
  }
  if (const auto i = node["instrument"]) {
    if (!i.IsNull()) {
      check_keys(i, {"x", "innovation"}, "instrument");
      InstrumentSpec inst;
      if (i["x"]) inst.x = parse_term(i["x"], "instrument.x");
      if (i["innovation"]) inst.innovation = parse_dist(i["innovation"], "instrument.innovation");
      s.instrument = inst;
    }
  }
  if (const auto e = node["errors"]) {
    check_keys(e, {"x_dist", "u_dist", "nu_dist", "nu_scale", "x", "u_loading"}, "errors");
    if (e["x_dist"]) s.errors.x_dist = parse_dist(e["x_dist"], "errors.x_dist");
    if (e["u_dist"]) s.errors.u_dist = parse_dist(e["u_dist"], "errors.u_dist");
    if (e["nu_dist"]) s.errors.nu_dist = parse_dist(e["nu_dist"], "errors.nu_dist");
    if (e["nu_scale"]) s.errors.nu_scale = number(e["nu_scale"], "nu_scale");
    if (e["x"]) s.errors.x = parse_term(e["x"], "errors.x");
    if (e["u_loading"]) s.errors.u_loading = number(e["u_loading"], "u_loading");
  }
  try {
    s.validate();
  } catch (const ConfigError& err) {
    throw ConfigError(err.what(), line_of(node));
  }
  return s;
}

std::string to_yaml(const ModelSpec& spec) {
  YAML::Emitter out;
  out << to_node(spec);
  return std::string(out.c_str()) + "\n";
}

ModelSpec from_yaml(const std::string& text) {
  YAML::Node node;
  try {
    node = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, e.mark.line + 1);
  }
  return from_node(node);
}

} // namespace endo::dgp
