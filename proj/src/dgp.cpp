#include "endo/dgp.hpp"

#include "endo/errors.hpp"

#include <cmath>
#include <numbers>

namespace endo::dgp {

double apply(Shape shape, double v) {
  switch (shape) {
  case Shape::zero: return 0.0;
  case Shape::identity: return v;
  case Shape::square: return v * v;
  case Shape::centered_square: return v * v - 1.0;
  case Shape::cube: return v * v * v;
  case Shape::sin: return std::sin(v);
  case Shape::cos: return std::cos(v);
  case Shape::tanh: return std::tanh(v);
  case Shape::step: return v > 0.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

bool differentiable(Shape shape) { return shape != Shape::step; }

double derivative(Shape shape, double v) {
  switch (shape) {
  case Shape::zero: return 0.0;
  case Shape::identity: return 1.0;
  case Shape::square:
  case Shape::centered_square: return 2.0 * v;
  case Shape::cube: return 3.0 * v * v;
  case Shape::sin: return std::cos(v);
  case Shape::cos: return -std::sin(v);
  case Shape::tanh: {
    const double t = std::tanh(v);
    return 1.0 - t * t;
  }
  case Shape::step: break;
  }
  throw UnsupportedFamilyError(std::string("shape '") + to_string(shape) + "' is not differentiable");
}

double Distribution::mean() const {
  switch (kind) {
  case DistKind::normal: return loc;
  case DistKind::uniform: return loc + 0.5 * scale;
  case DistKind::exponential: return loc + scale;
  }
  return loc;
}

double Distribution::variance() const {
  switch (kind) {
  case DistKind::normal: return scale * scale;
  case DistKind::uniform: return scale * scale / 12.0;
  case DistKind::exponential: return scale * scale;
  }
  return 0.0;
}

double Distribution::pdf(double v) const {
  if (scale <= 0.0) return 0.0;
  const double t = (v - loc) / scale;
  switch (kind) {
  case DistKind::normal: return std::exp(-0.5 * t * t) / (scale * std::sqrt(2.0 * std::numbers::pi));
  case DistKind::uniform: return (t >= 0.0 && t <= 1.0) ? 1.0 / scale : 0.0;
  case DistKind::exponential: return t >= 0.0 ? std::exp(-t) / scale : 0.0;
  }
  return 0.0;
}

double Distribution::sample(Rng& rng) const {
  switch (kind) {
  case DistKind::normal: return loc + scale * std::normal_distribution<double>(0.0, 1.0)(rng);
  case DistKind::uniform: return loc + scale * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  case DistKind::exponential: return loc + scale * std::exponential_distribution<double>(1.0)(rng);
  }
  return loc;
}

double ControlTerm::eval(std::span<const double> x) const {
  double s = 0.0;
  for (double v : x) s += linear * v + nonlinear * apply(shape, v);
  return s;
}

double OutcomeFn::value(double d, std::span<const double> x, double eps) const {
  switch (family) {
  case Family::linear: {
    double s = intercept + tau * d + eps_loading * eps;
    for (std::size_t j = 0; j < x.size(); ++j) s += beta[j] * x[j];
    return s;
  }
  case Family::additive: return intercept + d_scale * apply(d_shape, d) + h.eval(x) + eps_loading * eps;
  case Family::interaction: {
    double sx = 0.0;
    for (double v : x) sx += v;
    return intercept + (slope + slope_eps * eps + slope_x * sx) * d + h.eval(x) + eps_loading * eps;
  }
  }
  return 0.0;
}

double OutcomeFn::d_derivative(double d, std::span<const double> x, double eps) const {
  switch (family) {
  case Family::linear: return tau;
  case Family::additive: return d_scale * derivative(d_shape, d);
  case Family::interaction: {
    double sx = 0.0;
    for (double v : x) sx += v;
    return slope + slope_eps * eps + slope_x * sx;
  }
  }
  return 0.0;
}

double OutcomeFn::binary_contrast(std::span<const double> x, double eps) const {
  return value(1.0, x, eps) - value(0.0, x, eps);
}

std::optional<double> ModelSpec::true_tau() const {
  if (outcome.family == Family::linear) return outcome.tau;
  return std::nullopt;
}

void ModelSpec::validate() const {
  if (num_controls < 1 || num_controls > 5) {
    throw ConfigError("model '" + name + "': controls must be between 1 and 5");
  }
  if (outcome.family == Family::linear && outcome.beta.size() != num_controls) {
    throw ConfigError("model '" + name + "': linear outcome needs one beta per control (" +
                      std::to_string(num_controls) + "), got " + std::to_string(outcome.beta.size()));
  }
  const auto check_dist = [&](const Distribution& dist, const char* what, bool allow_degenerate) {
    if (!(dist.scale >= 0.0) || !std::isfinite(dist.scale) || !std::isfinite(dist.loc)) {
      throw ConfigError("model '" + name + "': " + what + " has an invalid scale");
    }
    if (!allow_degenerate && dist.scale == 0.0) {
      throw ConfigError("model '" + name + "': " + what + " must have positive scale");
    }
  };
  check_dist(errors.x_dist, "x_dist", false);
  check_dist(errors.nu_dist, "nu_dist", true);
  check_dist(errors.u_dist, "u_dist", treatment.kind == TreatmentKind::binary);
  if (errors.nu_scale < 0.0) throw ConfigError("model '" + name + "': nu_scale must be nonnegative");
  if (treatment.kind == TreatmentKind::continuous && treatment.u_scale == 0.0) {
    throw ConfigError("model '" + name +
                      "': continuous treatment must be strictly monotone in U (u_scale != 0)");
  }
  if (instrument) {
    check_dist(instrument->innovation, "instrument innovation", false);
  } else if (treatment.pi_z != 0.0) {
    throw ConfigError("model '" + name + "': pi_z is nonzero but no instrument is declared");
  }
  if (instrument && treatment.kind == TreatmentKind::binary) {
    throw ConfigError("model '" + name + "': instruments are only supported with continuous treatment");
  }
}

void draw_row(const ModelSpec& spec, Rng& rng, Draw& out) {
  out.x.resize(spec.num_controls);
  for (auto& v : out.x) v = spec.errors.x_dist.sample(rng);
  out.u = spec.errors.u_dist.sample(rng);
  out.nu = spec.errors.nu_dist.sample(rng);
  if (spec.instrument) {
    out.zeta = spec.instrument->innovation.sample(rng);
    out.z = spec.instrument->x.eval(out.x) + out.zeta;
  } else {
    out.zeta = 0.0;
    out.z = 0.0;
  }
  out.eps = spec.errors.x.eval(out.x) + spec.errors.u_loading * out.u + spec.errors.nu_scale * out.nu;
  const double index =
    spec.treatment.intercept + spec.treatment.x.eval(out.x) + spec.treatment.pi_z * out.z + spec.treatment.u_scale * out.u;
  out.d = spec.treatment.kind == TreatmentKind::continuous ? index : (index > 0.0 ? 1.0 : 0.0);
  out.y = spec.outcome.value(out.d, out.x, out.eps);
}

DataSet sample(const ModelSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  DataSet data;
  data.y.resize(n);
  data.d.resize(n);
  data.x.assign(spec.num_controls, std::vector<double>(n));
  if (spec.instrument) data.z.emplace(n);
  LatentColumns latent;
  latent.eps.resize(n);
  latent.eta.resize(n);
  latent.nu.resize(n);
  if (spec.instrument) latent.zeta.resize(n);

  Rng rng = make_rng(seed);
  Draw draw;
  for (std::size_t i = 0; i < n; ++i) {
    draw_row(spec, rng, draw);
    data.y[i] = draw.y;
    data.d[i] = draw.d;
    for (std::size_t j = 0; j < spec.num_controls; ++j) data.x[j][i] = draw.x[j];
    if (spec.instrument) {
      (*data.z)[i] = draw.z;
      latent.zeta[i] = draw.zeta;
    }
    latent.eps[i] = draw.eps;
    latent.eta[i] = draw.u;
    latent.nu[i] = draw.nu;
  }
  data.latent = std::move(latent);
  return data;
}

const char* to_string(Provenance p) { return p == Provenance::closed_form ? "closed_form" : "monte_carlo"; }

const char* to_string(Family f) {
  switch (f) {
  case Family::linear: return "linear";
  case Family::additive: return "additive";
  case Family::interaction: return "interaction";
  }
  return "?";
}

const char* to_string(TreatmentKind k) { return k == TreatmentKind::continuous ? "continuous" : "binary"; }

const char* to_string(Shape s) {
  switch (s) {
  case Shape::zero: return "zero";
  case Shape::identity: return "identity";
  case Shape::square: return "square";
  case Shape::centered_square: return "centered_square";
  case Shape::cube: return "cube";
  case Shape::sin: return "sin";
  case Shape::cos: return "cos";
  case Shape::tanh: return "tanh";
  case Shape::step: return "step";
  }
  return "?";
}

const char* to_string(DistKind k) {
  switch (k) {
  case DistKind::normal: return "normal";
  case DistKind::uniform: return "uniform";
  case DistKind::exponential: return "exponential";
  }
  return "?";
}

} // namespace endo::dgp
