#pragma once

#include "endo/dataset.hpp"
#include "endo/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace YAML {
class Node;
}

namespace endo::dgp {

enum class Family { linear, additive, interaction };
enum class TreatmentKind { continuous, binary };

/// Scalar shape library used by every structural equation.
enum class Shape { zero, identity, square, centered_square, cube, sin, cos, tanh, step };
enum class DistKind { normal, uniform, exponential };

double apply(Shape shape, double v);
double derivative(Shape shape, double v);
bool differentiable(Shape shape);

/// normal(loc, scale), uniform on [loc, loc + scale], or loc + scale * Exp(1).
struct Distribution {
  DistKind kind = DistKind::normal;
  double loc = 0.0;
  double scale = 1.0;

  double mean() const;
  double variance() const;
  double pdf(double v) const;
  double sample(Rng& rng) const;
};

/// sum_j (linear * x_j + nonlinear * shape(x_j)).
struct ControlTerm {
  double linear = 0.0;
  double nonlinear = 0.0;
  Shape shape = Shape::centered_square;

  double eval(std::span<const double> x) const;
  bool is_affine() const { return nonlinear == 0.0 || shape == Shape::zero || shape == Shape::identity; }
};

/// Outcome equation Y = m(D, X, eps):
///   linear:      intercept + tau*D + sum beta_j X_j + eps_loading*eps
///   additive:    intercept + d_scale*d_shape(D) + h(X) + eps_loading*eps
///   interaction: intercept + (slope + slope_eps*eps + slope_x*sum X_j)*D + h(X) + eps_loading*eps
struct OutcomeFn {
  Family family = Family::linear;
  double intercept = 0.0;
  double tau = 1.0;
  std::vector<double> beta;
  Shape d_shape = Shape::identity;
  double d_scale = 1.0;
  ControlTerm h{0.0, 0.0, Shape::zero};
  double slope = 1.0;
  double slope_eps = 0.0;
  double slope_x = 0.0;
  double eps_loading = 1.0;

  double value(double d, std::span<const double> x, double eps) const;
  /// dm/dd; throws UnsupportedFamilyError for a non-differentiable d_shape.
  double d_derivative(double d, std::span<const double> x, double eps) const;
  double binary_contrast(std::span<const double> x, double eps) const;
};

/// Treatment index intercept + g(X) + pi_z*Z + u_scale*U. Continuous D is the
/// index itself (strictly monotone in U iff u_scale != 0); binary D = 1{index > 0}.
struct TreatmentFn {
  TreatmentKind kind = TreatmentKind::continuous;
  double intercept = 0.0;
  ControlTerm x{0.0, 0.0, Shape::zero};
  double pi_z = 0.0;
  double u_scale = 1.0;
};

/// Z = a(X) + zeta, zeta independent of every other primitive.
struct InstrumentSpec {
  ControlTerm x{0.0, 0.0, Shape::zero};
  Distribution innovation;
};

/// eps = e(X) + u_loading*U + nu_scale*nu, with X_j, U, nu, zeta mutually independent.
struct ErrorStructure {
  Distribution x_dist;
  Distribution u_dist;
  Distribution nu_dist;
  double nu_scale = 1.0;
  ControlTerm x{0.0, 0.0, Shape::zero};
  double u_loading = 0.0;
};

struct ModelSpec {
  std::string name;
  std::size_t num_controls = 1;
  OutcomeFn outcome;
  TreatmentFn treatment;
  ErrorStructure errors;
  std::optional<InstrumentSpec> instrument;

  TreatmentKind treatment_kind() const { return treatment.kind; }
  std::optional<double> true_tau() const;
  /// eps independent of D given X (U does not load on eps).
  bool conditional_independence() const { return errors.u_loading == 0.0; }
  /// Throws ConfigError when the spec is internally inconsistent.
  void validate() const;
};

/// One draw of every primitive and derived variable.
struct Draw {
  std::vector<double> x;
  double u = 0.0;
  double nu = 0.0;
  double zeta = 0.0;
  double z = 0.0;
  double eps = 0.0;
  double d = 0.0;
  double y = 0.0;
};

void draw_row(const ModelSpec& spec, Rng& rng, Draw& out);

/// Deterministic in (spec, n, seed). Latent columns are retained for oracle checks.
DataSet sample(const ModelSpec& spec, std::size_t n, std::uint64_t seed);

// ---- ground truth ---------------------------------------------------------

enum class Provenance { closed_form, monte_carlo };
const char* to_string(Provenance p);

struct OracleValue {
  double value = 0.0;
  double se = 0.0;
  Provenance provenance = Provenance::closed_form;
};

inline constexpr std::size_t default_oracle_draws = 1'000'000;

/// beta(d, x) = E[dm(d,x,eps)/dd | D=d, X=x].
OracleValue true_clar(const ModelSpec& spec, double d, std::span<const double> x,
                      std::size_t mc_draws = default_oracle_draws, std::uint64_t seed = 1);

/// beta(d) = E[dm(d,X,eps)/dd | D=d], by rejection sampling on the window
/// |D - d| <= window_fraction * sd(D).
OracleValue true_lar(const ModelSpec& spec, double d, std::size_t mc_draws, std::uint64_t seed,
                     double window_fraction = 0.1);

/// E[dm(d,X,eps)/dd] over the unconditional law of (X, eps).
OracleValue true_ate_continuous(const ModelSpec& spec, double d, std::size_t mc_draws, std::uint64_t seed);

/// E[Y(d) | D = d_tilde] = E[m(d, X, eps) | D = d_tilde].
OracleValue true_counterfactual_mean(const ModelSpec& spec, double d, double d_tilde, std::size_t mc_draws,
                                     std::uint64_t seed, double window_fraction = 0.1);

/// Binary-treatment effects. Arm masses come from one MC pass over the joint
/// law; values are closed-form where the family allows.
class BinaryEffects {
public:
  BinaryEffects(const ModelSpec& spec, std::size_t mc_draws, std::uint64_t seed);

  OracleValue clar(int d, std::span<const double> x) const;
  OracleValue lar(int d) const;
  /// Throws SupportError when either arm has no mass.
  OracleValue ate() const;
  /// Throws SupportError when the treated arm has no mass.
  OracleValue att() const;

  double treated_share() const { return treated_share_; }

private:
  ModelSpec spec_;
  std::size_t draws_;
  std::uint64_t seed_;
  double treated_share_ = 0.0;
  std::size_t n_arm_[2] = {0, 0};
  double mean_contrast_[2] = {0.0, 0.0};
  double var_contrast_[2] = {0.0, 0.0};
  double mean_all_ = 0.0;
  double var_all_ = 0.0;
};

BinaryEffects true_binary_effects(const ModelSpec& spec, std::size_t mc_draws = default_oracle_draws,
                                  std::uint64_t seed = 1);

// ---- registry / serialization ---------------------------------------------

struct RegistryEntry {
  std::string name;
  std::string description;
};

std::vector<RegistryEntry> registry();
/// Throws ConfigError for an unknown name.
ModelSpec registry_spec(const std::string& name);

std::string to_yaml(const ModelSpec& spec);
ModelSpec from_yaml(const std::string& text);
YAML::Node to_node(const ModelSpec& spec);
ModelSpec from_node(const YAML::Node& node);

const char* to_string(Family f);
const char* to_string(TreatmentKind k);
const char* to_string(Shape s);
const char* to_string(DistKind k);

} // namespace endo::dgp
