#include "endo/smoothers.hpp"

#include "endo/errors.hpp"
#include "endo/kernels.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace endo::smooth {

namespace {

constexpr std::size_t max_basis = 32;
const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);

std::size_t basis_size(std::size_t dim, int degree) {
  std::size_t q = 1;
  if (degree >= 1) q += dim;
  if (degree >= 2) q += dim * (dim + 1) / 2;
  return q;
}

void fill_basis(const double* u, std::size_t dim, int degree, double* out) {
  std::size_t k = 0;
  out[k++] = 1.0;
  if (degree >= 1) {
    for (std::size_t j = 0; j < dim; ++j) out[k++] = u[j];
  }
  if (degree >= 2) {
    for (std::size_t j = 0; j < dim; ++j) {
      for (std::size_t l = j; l < dim; ++l) out[k++] = u[j] * u[l];
    }
  }
}

void check_columns(const Columns& cols, std::size_t n, const char* what) {
  for (const auto& c : cols) {
    if (c.size() != n) throw PreconditionError(std::string(what) + ": columns have unequal length");
  }
}

double bandwidth_product(const std::vector<double>& h) {
  double p = 1.0;
  for (double v : h) p *= v;
  return p;
}

/// Product-kernel weight of row i; `u` receives the scaled offsets.
inline double row_weight(const Columns& cols, std::size_t i, std::span<const double> point,
                         const std::vector<double>& h, Kernel kernel, double* u) {
  const std::size_t dim = cols.size();
  if (kernel == Kernel::gaussian) {
    double s = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double v = (cols[j][i] - point[j]) / h[j];
      if (std::abs(v) > gaussian_cutoff) return 0.0;
      u[j] = v;
      s += v * v;
    }
    double norm = 1.0;
    for (std::size_t j = 0; j < dim; ++j) norm *= inv_sqrt_2pi;
    return norm * std::exp(-0.5 * s);
  }
  double w = 1.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double v = (cols[j][i] - point[j]) / h[j];
    if (std::abs(v) >= 1.0) return 0.0;
    u[j] = v;
    w *= 0.75 * (1.0 - v * v);
  }
  return w;
}

/// Rows that can carry weight. When the first column is ascending (as in a
/// canonical DataView) the scan is narrowed by binary search.
std::pair<std::size_t, std::size_t> row_window(const Columns& cols, std::size_t n, std::span<const double> point,
                                               const std::vector<double>& h, Kernel kernel) {
  if (cols.empty() || n == 0) return {0, n};
  const auto first = cols[0];
  if (!std::is_sorted(first.begin(), first.end())) return {0, n};
  const double reach = (kernel == Kernel::gaussian ? gaussian_cutoff : 1.0) * h[0];
  const auto lo = std::lower_bound(first.begin(), first.end(), point[0] - reach);
  const auto hi = std::upper_bound(first.begin(), first.end(), point[0] + reach);
  return {static_cast<std::size_t>(lo - first.begin()), static_cast<std::size_t>(hi - first.begin())};
}

} // namespace

double kernel_weight(double u, Kernel kernel) {
  if (kernel == Kernel::gaussian) return inv_sqrt_2pi * std::exp(-0.5 * u * u);
  return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
}

double integrated_kernel(double u, Kernel kernel) {
  if (kernel == Kernel::gaussian) return 0.5 * std::erfc(-u / std::numbers::sqrt2);
  if (u <= -1.0) return 0.0;
  if (u >= 1.0) return 1.0;
  return 0.5 + 0.75 * (u - u * u * u / 3.0);
}

void SmootherConfig::validate(std::size_t dim, bool need_derivative) const {
  if (bandwidths.size() != dim) {
    throw ConfigError("smoother has " + std::to_string(bandwidths.size()) + " bandwidths for " +
                      std::to_string(dim) + " conditioning dimensions");
  }
  for (double h : bandwidths) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("bandwidths must be positive and finite");
  }
  if (degree < 0 || degree > 2) throw ConfigError("local-polynomial degree must be 0, 1 or 2");
  if (need_derivative && degree < 1) throw ConfigError("a derivative needs local-polynomial degree >= 1");
  if (!(trim_density_floor >= 0.0)) throw ConfigError("trim_density_floor must be nonnegative");
  if (basis_size(dim, degree) > max_basis) throw ConfigError("too many conditioning dimensions for this degree");
}

double LocalPolynomial::evaluate(std::span<const double> u) const {
  std::array<double, max_basis> b{};
  const std::size_t dim = u.size();
  int degree = 0;
  if (coefficients.size() == basis_size(dim, 1)) degree = 1;
  if (coefficients.size() == basis_size(dim, 2) && dim > 0) degree = 2;
  fill_basis(u.data(), dim, degree, b.data());
  double s = 0.0;
  for (std::size_t k = 0; k < coefficients.size(); ++k) s += coefficients[k] * b[k];
  return s;
}

LocalPolynomial local_poly_coefficients(const Columns& regressors, std::span<const double> response,
                                        std::span<const double> point, const SmootherConfig& config,
                                        std::optional<std::size_t> exclude_row) {
  const std::size_t dim = regressors.size();
  const std::size_t n = response.size();
  config.validate(dim, false);
  check_columns(regressors, n, "local_poly_fit");
  if (point.size() != dim) throw PreconditionError("local_poly_fit: evaluation point has the wrong dimension");

  const std::size_t q = basis_size(dim, config.degree);
  std::array<double, max_basis * max_basis> gram{};
  std::array<double, max_basis> rhs{};
  std::array<double, max_basis> b{};
  std::array<double, 8> u{};
  double wsum = 0.0;
  std::size_t support = 0;

  const auto [first_row, last_row] = row_window(regressors, n, point, config.bandwidths, config.kernel);
  for (std::size_t i = first_row; i < last_row; ++i) {
    if (exclude_row && *exclude_row == i) continue;
    const double w = row_weight(regressors, i, point, config.bandwidths, config.kernel, u.data());
    if (w == 0.0) continue;
    ++support;
    wsum += w;
    fill_basis(u.data(), dim, config.degree, b.data());
    const double wy = w * response[i];
    for (std::size_t a = 0; a < q; ++a) {
      const double wb = w * b[a];
      double* row = gram.data() + a * max_basis;
      for (std::size_t c = a; c < q; ++c) row[c] += wb * b[c];
      rhs[a] += wy * b[a];
    }
  }

  const double n_used = static_cast<double>(exclude_row ? n - 1 : n);
  const double density = n_used > 0 ? wsum / (n_used * bandwidth_product(config.bandwidths)) : 0.0;
  if (support < q || !(wsum > 0.0)) {
    throw SingularFitError("local fit has " + std::to_string(support) + " supporting rows for " +
                             std::to_string(q) + " coefficients",
                           wsum, density);
  }

  Eigen::MatrixXd g(q, q);
  Eigen::VectorXd r(q);
  for (std::size_t a = 0; a < q; ++a) {
    r(a) = rhs[a];
    for (std::size_t c = a; c < q; ++c) {
      g(a, c) = gram[a * max_basis + c];
      g(c, a) = g(a, c);
    }
  }
  // Normalise so the pivot threshold is relative to the weight mass.
  g /= wsum;
  r /= wsum;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(g);
  lu.setThreshold(1e-12);
  if (lu.rank() < static_cast<Eigen::Index>(q)) {
    throw SingularFitError("local design is rank deficient (rank " + std::to_string(lu.rank()) + " of " +
                             std::to_string(q) + ")",
                           wsum, density);
  }
  const Eigen::VectorXd coef = lu.solve(r);

  LocalPolynomial out;
  out.coefficients.assign(coef.data(), coef.data() + q);
  out.weight_sum = wsum;
  out.density = density;
  return out;
}

FitResult local_poly_fit(const Columns& regressors, std::span<const double> response, std::span<const double> point,
                         const SmootherConfig& config, std::optional<std::size_t> exclude_row) {
  const LocalPolynomial lp = local_poly_coefficients(regressors, response, point, config, exclude_row);
  FitResult fit;
  fit.mean = lp.coefficients[0];
  if (config.degree >= 1) fit.derivative_wrt_first = lp.coefficients[1] / config.bandwidths[0];
  fit.effective_sample_size = lp.weight_sum;
  fit.density = lp.density;
  fit.trimmed = lp.density < config.trim_density_floor;
  return fit;
}

double conditional_cdf(std::span<const double> treatment, const Columns& conditioning, double d_value,
                       std::span<const double> point, const SmootherConfig& config) {
  const std::size_t n = treatment.size();
  const std::size_t dim = conditioning.size();
  config.validate(dim + 1, false);
  check_columns(conditioning, n, "conditional_cdf");
  if (point.size() != dim) throw PreconditionError("conditional_cdf: evaluation point has the wrong dimension");
  if (n == 0) throw NoSupportError("conditional_cdf: empty sample");

  const auto [lo, hi] = std::minmax_element(treatment.begin(), treatment.end());
  if (d_value < *lo) return 0.0;
  if (d_value >= *hi) return 1.0;

  const std::vector<double> h_cond(config.bandwidths.begin() + 1, config.bandwidths.end());
  const double h_d = config.bandwidths[0];
  std::array<double, 8> u{};
  double wsum = 0.0, fsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = row_weight(conditioning, i, point, h_cond, config.kernel, u.data());
    if (w == 0.0) continue;
    wsum += w;
    fsum += w * integrated_kernel((d_value - treatment[i]) / h_d, config.kernel);
  }
  if (!(wsum > 0.0)) throw NoSupportError("conditional_cdf: no kernel mass at the conditioning point");
  return std::clamp(fsum / wsum, 0.0, 1.0);
}

DensityResult conditional_density(const Columns& columns, std::span<const double> point,
                                  const SmootherConfig& config, std::span<const double> row_weights) {
  const std::size_t dim = columns.size();
  config.validate(dim, false);
  const std::size_t n = dim > 0 ? columns[0].size() : 0;
  check_columns(columns, n, "conditional_density");
  if (point.size() != dim) throw PreconditionError("conditional_density: evaluation point has the wrong dimension");
  if (!row_weights.empty() && row_weights.size() != n) {
    throw PreconditionError("conditional_density: row weights have the wrong length");
  }
  std::array<double, 8> u{};
  double total = static_cast<double>(n);
  if (!row_weights.empty()) {
    total = 0.0;
    for (double rw : row_weights) total += rw;
  }
  double ksum = 0.0, ksq = 0.0;
  const auto [first_row, last_row] = row_window(columns, n, point, config.bandwidths, config.kernel);
  for (std::size_t i = first_row; i < last_row; ++i) {
    const double rw = row_weights.empty() ? 1.0 : row_weights[i];
    if (rw == 0.0) continue;
    const double w = rw * row_weight(columns, i, point, config.bandwidths, config.kernel, u.data());
    ksum += w;
    ksq += w * w;
  }
  DensityResult out;
  out.density = total > 0.0 ? ksum / (total * bandwidth_product(config.bandwidths)) : 0.0;
  out.effective_sample_size = ksum;
  out.trimmed = out.density <= config.trim_density_floor;
  const double kish = ksq > 0.0 ? ksum * ksum / ksq : 0.0;
  out.low_effective_sample = kish < 5.0;
  return out;
}

std::vector<double> rule_of_thumb(const Columns& columns) {
  const std::size_t dim = columns.size();
  std::vector<double> h(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    const auto col = columns[j];
    const std::size_t n = col.size();
    if (n < 10) throw PreconditionError("rule-of-thumb bandwidth needs at least 10 observations");
    double mean = 0.0;
    for (double v : col) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : col) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (!(sd > 0.0)) {
      throw DegenerateColumnError("column " + std::to_string(j) + " has zero variance; no bandwidth exists");
    }
    h[j] = 1.06 * sd * std::pow(static_cast<double>(n), -1.0 / (4.0 + static_cast<double>(dim)));
  }
  return h;
}

LscvProfile lscv_profile(const Columns& columns, std::span<const double> response, int degree, Kernel kernel,
                         std::size_t grid_points) {
  const std::size_t n = response.size();
  if (n < 50) throw PreconditionError("lscv bandwidth selection needs at least 50 observations");
  check_columns(columns, n, "lscv");
  if (grid_points < 2) throw PreconditionError("lscv grid needs at least two points");
  const std::vector<double> base = rule_of_thumb(columns);

  LscvProfile prof;
  prof.scales.resize(grid_points);
  prof.loo_errors.resize(grid_points);
  const double lo = std::log(0.25), hi = std::log(4.0);
  for (std::size_t g = 0; g < grid_points; ++g) {
    prof.scales[g] = std::exp(lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_points - 1));
    SmootherConfig cfg;
    cfg.kernel = kernel;
    cfg.degree = degree;
    cfg.bandwidths = base;
    for (double& h : cfg.bandwidths) h *= prof.scales[g];
    prof.loo_errors[g] = kernels::loo_squared_error(columns, response, cfg);
  }
  prof.best = static_cast<std::size_t>(
    std::min_element(prof.loo_errors.begin(), prof.loo_errors.end()) - prof.loo_errors.begin());
  prof.bandwidths = base;
  for (double& h : prof.bandwidths) h *= prof.scales[prof.best];
  return prof;
}

std::vector<double> bandwidth_select(const Columns& columns, BandwidthMethod method,
                                     std::span<const double> response, int degree, Kernel kernel) {
  if (method == BandwidthMethod::rule_of_thumb) return rule_of_thumb(columns);
  return lscv_profile(columns, response, degree, kernel).bandwidths;
}

double reference_density(const Columns& columns, const SmootherConfig& config, std::size_t max_points) {
  if (columns.empty()) return 0.0;
  const std::size_t n = columns[0].size();
  const std::size_t m = std::min(n, max_points);
  std::vector<double> point(columns.size());
  double best = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t i = k * n / m;
    for (std::size_t j = 0; j < columns.size(); ++j) point[j] = columns[j][i];
    best = std::max(best, conditional_density(columns, point, config).density);
  }
  return best;
}

} // namespace endo::smooth
