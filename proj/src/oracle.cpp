// Ground-truth oracles. Everything here reads the model's primitives
// directly and never goes through the smoothers.

#include "endo/dgp.hpp"
#include "endo/errors.hpp"

#include <cmath>

namespace endo::dgp {

namespace {

struct Welford {
  std::size_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  void add(double v) {
    ++n;
    const double delta = v - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (v - mean);
  }
  double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
  double se() const { return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

constexpr std::size_t min_accepted = 100;
constexpr double min_acceptance_rate = 1e-4;

std::optional<double> shape_mean(Shape shape, const Distribution& dist) {
  const double m = dist.mean();
  switch (shape) {
  case Shape::zero: return 0.0;
  case Shape::identity: return m;
  case Shape::square: return dist.variance() + m * m;
  case Shape::centered_square: return dist.variance() + m * m - 1.0;
  default: return std::nullopt;
  }
}

std::optional<double> term_mean(const ControlTerm& term, const ModelSpec& spec) {
  const auto sm = shape_mean(term.shape, spec.errors.x_dist);
  if (term.nonlinear != 0.0 && !sm) return std::nullopt;
  const double per = term.linear * spec.errors.x_dist.mean() + (term.nonlinear != 0.0 ? term.nonlinear * *sm : 0.0);
  return per * static_cast<double>(spec.num_controls);
}

void require_continuous(const ModelSpec& spec) {
  if (spec.treatment.kind != TreatmentKind::continuous) {
    throw WrongKindError("model '" + spec.name + "' has a binary treatment; use true_binary_effects");
  }
}

void require_differentiable(const ModelSpec& spec) {
  if (spec.outcome.family == Family::additive && !differentiable(spec.outcome.d_shape)) {
    throw UnsupportedFamilyError("model '" + spec.name + "': outcome is not differentiable in d");
  }
}

/// E[U | D = d, X = x] for a continuous treatment.
OracleValue expected_u(const ModelSpec& spec, double d, std::span<const double> x, std::size_t draws,
                       std::uint64_t seed) {
  const auto& t = spec.treatment;
  double r = d - t.intercept - t.x.eval(x);
  if (!spec.instrument || t.pi_z == 0.0) return {r / t.u_scale, 0.0, Provenance::closed_form};
  r -= t.pi_z * spec.instrument->x.eval(x);
  // r = u_scale * U + pi_z * zeta
  const auto& ud = spec.errors.u_dist;
  const auto& zd = spec.instrument->innovation;
  if (ud.kind == DistKind::normal && zd.kind == DistKind::normal) {
    const double vu = t.u_scale * t.u_scale * ud.variance();
    const double vz = t.pi_z * t.pi_z * zd.variance();
    const double centered = r - t.u_scale * ud.mean() - t.pi_z * zd.mean();
    return {ud.mean() + t.u_scale * ud.variance() / (vu + vz) * centered, 0.0, Provenance::closed_form};
  }
  // Importance sampling over U with the implied zeta density as weight.
  Rng rng = make_rng(seed);
  double sw = 0.0, swu = 0.0;
  std::vector<double> us(draws), ws(draws);
  for (std::size_t i = 0; i < draws; ++i) {
    const double u = ud.sample(rng);
    const double w = zd.pdf((r - t.u_scale * u) / t.pi_z) / std::abs(t.pi_z);
    us[i] = u;
    ws[i] = w;
    sw += w;
    swu += w * u;
  }
  if (!(sw > 0.0)) throw OracleInfeasibleError("no importance mass for E[U | D, X] at the requested point");
  const double est = swu / sw;
  double s2 = 0.0;
  for (std::size_t i = 0; i < draws; ++i) s2 += ws[i] * ws[i] * (us[i] - est) * (us[i] - est);
  return {est, std::sqrt(s2) / sw, Provenance::monte_carlo};
}

/// E[eps | D = d, X = x] for a continuous treatment.
OracleValue expected_eps(const ModelSpec& spec, double d, std::span<const double> x, std::size_t draws,
                         std::uint64_t seed) {
  const auto& e = spec.errors;
  const double base = e.x.eval(x) + e.nu_scale * e.nu_dist.mean();
  if (e.u_loading == 0.0) return {base, 0.0, Provenance::closed_form};
  const OracleValue eu = expected_u(spec, d, x, draws, seed);
  return {base + e.u_loading * eu.value, std::abs(e.u_loading) * eu.se, eu.provenance};
}

/// Mean of `integrand` over draws with D in the window around `target`
/// (exact match for a binary treatment). Two passes over the same stream:
/// the first fixes the window from sd(D).
template <class F>
OracleValue windowed_mean(const ModelSpec& spec, double target, double window_fraction, std::size_t draws,
                          std::uint64_t seed, F&& integrand) {
  const bool binary = spec.treatment.kind == TreatmentKind::binary;
  Draw draw;
  double half_width = 0.0;
  if (!binary) {
    Welford sd;
    Rng rng = make_rng(seed);
    for (std::size_t i = 0; i < draws; ++i) {
      draw_row(spec, rng, draw);
      sd.add(draw.d);
    }
    half_width = window_fraction * std::sqrt(sd.variance());
  }
  Welford acc;
  Rng rng = make_rng(seed);
  for (std::size_t i = 0; i < draws; ++i) {
    draw_row(spec, rng, draw);
    const bool inside = binary ? draw.d == target : std::abs(draw.d - target) <= half_width;
    if (inside) acc.add(integrand(draw));
  }
  if (acc.n < min_accepted || static_cast<double>(acc.n) < min_acceptance_rate * static_cast<double>(draws)) {
    throw OracleInfeasibleError("conditional oracle at D=" + std::to_string(target) + " accepted only " +
                                std::to_string(acc.n) + " of " + std::to_string(draws) + " draws");
  }
  return {acc.mean, acc.se(), Provenance::monte_carlo};
}

} // namespace

OracleValue true_clar(const ModelSpec& spec, double d, std::span<const double> x, std::size_t mc_draws,
                      std::uint64_t seed) {
  spec.validate();
  require_continuous(spec);
  require_differentiable(spec);
  if (x.size() != spec.num_controls) throw PreconditionError("true_clar: control point has the wrong dimension");
  const auto& o = spec.outcome;
  switch (o.family) {
  case Family::linear: return {o.tau, 0.0, Provenance::closed_form};
  case Family::additive: return {o.d_scale * derivative(o.d_shape, d), 0.0, Provenance::closed_form};
  case Family::interaction: {
    double sx = 0.0;
    for (double v : x) sx += v;
    const OracleValue ee = expected_eps(spec, d, x, mc_draws, seed);
    return {o.slope + o.slope_x * sx + o.slope_eps * ee.value, std::abs(o.slope_eps) * ee.se, ee.provenance};
  }
  }
  return {};
}

OracleValue true_lar(const ModelSpec& spec, double d, std::size_t mc_draws, std::uint64_t seed,
                     double window_fraction) {
  spec.validate();
  require_continuous(spec);
  require_differentiable(spec);
  const auto& o = spec.outcome;
  if (o.family == Family::linear) return {o.tau, 0.0, Provenance::closed_form};
  if (o.family == Family::additive) return {o.d_scale * derivative(o.d_shape, d), 0.0, Provenance::closed_form};
  return windowed_mean(spec, d, window_fraction, mc_draws, seed,
                       [&](const Draw& w) { return o.d_derivative(d, w.x, w.eps); });
}

OracleValue true_ate_continuous(const ModelSpec& spec, double d, std::size_t mc_draws, std::uint64_t seed) {
  spec.validate();
  require_continuous(spec);
  require_differentiable(spec);
  const auto& o = spec.outcome;
  if (o.family == Family::linear) return {o.tau, 0.0, Provenance::closed_form};
  if (o.family == Family::additive) return {o.d_scale * derivative(o.d_shape, d), 0.0, Provenance::closed_form};
  Welford acc;
  Rng rng = make_rng(seed);
  Draw draw;
  for (std::size_t i = 0; i < mc_draws; ++i) {
    draw_row(spec, rng, draw);
    acc.add(o.d_derivative(d, draw.x, draw.eps));
  }
  return {acc.mean, acc.se(), Provenance::monte_carlo};
}

OracleValue true_counterfactual_mean(const ModelSpec& spec, double d, double d_tilde, std::size_t mc_draws,
                                     std::uint64_t seed, double window_fraction) {
  spec.validate();
  const auto& o = spec.outcome;
  return windowed_mean(spec, d_tilde, window_fraction, mc_draws, seed,
                       [&](const Draw& w) { return o.value(d, w.x, w.eps); });
}

// ---------------------------------------------------------------------------

BinaryEffects::BinaryEffects(const ModelSpec& spec, std::size_t mc_draws, std::uint64_t seed)
  : spec_(spec), draws_(mc_draws), seed_(seed) {
  spec_.validate();
  if (spec_.treatment.kind != TreatmentKind::binary) {
    throw WrongKindError("model '" + spec_.name + "' has a continuous treatment; use true_clar / true_lar");
  }
  Welford arm[2], all;
  Rng rng = make_rng(seed);
  Draw draw;
  for (std::size_t i = 0; i < mc_draws; ++i) {
    draw_row(spec_, rng, draw);
    const double c = spec_.outcome.binary_contrast(draw.x, draw.eps);
    arm[draw.d == 1.0 ? 1 : 0].add(c);
    all.add(c);
  }
  for (int a = 0; a < 2; ++a) {
    n_arm_[a] = arm[a].n;
    mean_contrast_[a] = arm[a].mean;
    var_contrast_[a] = arm[a].variance();
  }
  mean_all_ = all.mean;
  var_all_ = all.variance();
  treated_share_ = mc_draws > 0 ? static_cast<double>(n_arm_[1]) / static_cast<double>(mc_draws) : 0.0;
}

OracleValue BinaryEffects::clar(int d, std::span<const double> x) const {
  if (d != 0 && d != 1) throw PreconditionError("binary clar: d must be 0 or 1");
  if (x.size() != spec_.num_controls) throw PreconditionError("binary clar: control point has the wrong dimension");
  const auto& o = spec_.outcome;
  const auto& e = spec_.errors;
  if (o.family != Family::interaction || o.slope_eps == 0.0 || e.u_loading == 0.0) {
    // eps enters the contrast only through slope_eps; with u_loading == 0 its
    // conditional mean given (D, X) is E[eps | X].
    const double eps_mean = e.x.eval(x) + e.nu_scale * e.nu_dist.mean();
    return {o.binary_contrast(x, eps_mean), 0.0, Provenance::closed_form};
  }
  // E[U | D = d, X = x] by rejection on the treatment rule.
  const auto& t = spec_.treatment;
  const double base = t.intercept + t.x.eval(x);
  Welford u;
  Rng rng = make_rng(derive_seed(seed_, 17));
  for (std::size_t i = 0; i < draws_; ++i) {
    const double uu = e.u_dist.sample(rng);
    const double arm = (base + t.u_scale * uu) > 0.0 ? 1.0 : 0.0;
    if (arm == static_cast<double>(d)) u.add(uu);
  }
  if (u.n < min_accepted) throw OracleInfeasibleError("binary clar: too few draws in arm " + std::to_string(d));
  const double eps_mean = e.x.eval(x) + e.nu_scale * e.nu_dist.mean() + e.u_loading * u.mean;
  return {o.binary_contrast(x, eps_mean), std::abs(o.slope_eps * e.u_loading) * u.se(), Provenance::monte_carlo};
}

OracleValue BinaryEffects::lar(int d) const {
  if (d != 0 && d != 1) throw PreconditionError("binary lar: d must be 0 or 1");
  if (n_arm_[d] == 0) throw SupportError("binary lar: arm D=" + std::to_string(d) + " has no mass", 0.0);
  const auto& o = spec_.outcome;
  if (o.family != Family::interaction) return {o.binary_contrast({}, 0.0) , 0.0, Provenance::closed_form};
  return {mean_contrast_[d], std::sqrt(var_contrast_[d] / static_cast<double>(n_arm_[d])), Provenance::monte_carlo};
}

OracleValue BinaryEffects::ate() const {
  if (n_arm_[0] == 0 || n_arm_[1] == 0) {
    throw SupportError(std::string("ATE oracle: arm D=") + (n_arm_[0] == 0 ? "0" : "1") + " has no mass", 0.0);
  }
  const auto& o = spec_.outcome;
  if (o.family != Family::interaction) return {o.binary_contrast({}, 0.0), 0.0, Provenance::closed_form};
  const auto& e = spec_.errors;
  const auto ex = term_mean(e.x, spec_);
  if (ex) {
    const double eps_mean = *ex + e.u_loading * e.u_dist.mean() + e.nu_scale * e.nu_dist.mean();
    const double x_sum_mean = e.x_dist.mean() * static_cast<double>(spec_.num_controls);
    return {o.slope + o.slope_eps * eps_mean + o.slope_x * x_sum_mean, 0.0, Provenance::closed_form};
  }
  return {mean_all_, std::sqrt(var_all_ / static_cast<double>(draws_)), Provenance::monte_carlo};
}

OracleValue BinaryEffects::att() const { return lar(1); }

BinaryEffects true_binary_effects(const ModelSpec& spec, std::size_t mc_draws, std::uint64_t seed) {
  return BinaryEffects(spec, mc_draws, seed);
}

} // namespace endo::dgp
