#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace endo::smooth {

enum class Kernel { gaussian, epanechnikov };

/// K(u): standard normal density, or 0.75(1 - u^2) on |u| <= 1.
double kernel_weight(double u, Kernel kernel);
/// Integral of K from -inf to u.
double integrated_kernel(double u, Kernel kernel);

/// Gaussian weights beyond this standardized distance are treated as zero.
inline constexpr double gaussian_cutoff = 6.0;

struct SmootherConfig {
  Kernel kernel = Kernel::gaussian;
  /// One per conditioning dimension; the first is the treatment direction.
  std::vector<double> bandwidths;
  /// Local-polynomial order, 0..2.
  int degree = 1;
  /// Absolute density floor below which a fit is flagged as trimmed.
  double trim_density_floor = 0.0;

  /// Throws ConfigError unless bandwidth count == dim, bandwidths > 0 and
  /// degree >= 1 when a derivative is required.
  void validate(std::size_t dim, bool need_derivative) const;
};

struct FitResult {
  double mean = 0.0;
  std::optional<double> derivative_wrt_first;
  /// Sum of kernel weights.
  double effective_sample_size = 0.0;
  /// Kernel density estimate of the regressors at the evaluation point.
  double density = 0.0;
  bool trimmed = false;
};

/// Read-only column views; all of equal length.
using Columns = std::vector<std::span<const double>>;

/// Kernel-weighted least-squares polynomial fit of `response` on `regressors`
/// centred at `point`. Throws SingularFitError for a rank-deficient local design.
FitResult local_poly_fit(const Columns& regressors, std::span<const double> response, std::span<const double> point,
                         const SmootherConfig& config, std::optional<std::size_t> exclude_row = std::nullopt);

/// Coefficients of the local fit in bandwidth-scaled coordinates
/// u_j = (x_j - point_j) / h_j, ordered 1, u_1..u_p, then u_j u_k (j <= k).
struct LocalPolynomial {
  std::vector<double> coefficients;
  double weight_sum = 0.0;
  double density = 0.0;

  double evaluate(std::span<const double> u) const;
};

LocalPolynomial local_poly_coefficients(const Columns& regressors, std::span<const double> response,
                                        std::span<const double> point, const SmootherConfig& config,
                                        std::optional<std::size_t> exclude_row = std::nullopt);

/// P(D <= d_value | conditioning = point), smoothed-indicator estimator with a
/// degree-0 fit. bandwidths[0] smooths D; the rest match `conditioning`.
/// Returns 0 below min(D) and 1 at or above max(D). Throws NoSupportError when
/// every conditioning weight is zero.
double conditional_cdf(std::span<const double> treatment, const Columns& conditioning, double d_value,
                       std::span<const double> point, const SmootherConfig& config);

struct DensityResult {
  double density = 0.0;
  double effective_sample_size = 0.0;
  bool trimmed = false;
  bool low_effective_sample = false;
};

/// Kernel density of `columns` at `point`. With `row_weights` the rows are
/// reweighted (e.g. by a kernel window in D), giving a conditional density.
DensityResult conditional_density(const Columns& columns, std::span<const double> point,
                                  const SmootherConfig& config, std::span<const double> row_weights = {});

enum class BandwidthMethod { rule_of_thumb, lscv };

/// 1.06 * sd_j * n^(-1/(4 + dim)) for each column.
std::vector<double> rule_of_thumb(const Columns& columns);

struct LscvProfile {
  std::vector<double> scales;
  std::vector<double> loo_errors;
  std::size_t best = 0;
  std::vector<double> bandwidths;
};

/// Leave-one-out squared prediction error of a local fit of `response` over
/// a log-spaced grid of multiples of the rule-of-thumb bandwidth vector.
LscvProfile lscv_profile(const Columns& columns, std::span<const double> response, int degree = 1,
                         Kernel kernel = Kernel::gaussian, std::size_t grid_points = 13);

/// `response` is required for lscv and ignored by rule_of_thumb.
std::vector<double> bandwidth_select(const Columns& columns, BandwidthMethod method,
                                     std::span<const double> response = {}, int degree = 1,
                                     Kernel kernel = Kernel::gaussian);

/// Largest density over up to `max_points` sample rows spread through the data.
double reference_density(const Columns& columns, const SmootherConfig& config, std::size_t max_points = 200);

} // namespace endo::smooth
