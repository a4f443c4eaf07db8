#include "endo/kernels.hpp"

#include "endo/errors.hpp"

#include <limits>

namespace endo::kernels {

namespace {

std::size_t point_count(std::span<const double> points, std::size_t dim) {
  if (dim == 0) throw PreconditionError("evaluation points need at least one dimension");
  if (points.size() % dim != 0) throw PreconditionError("evaluation point buffer is not a multiple of the dimension");
  return points.size() / dim;
}

} // namespace

std::vector<PointFit> fit_points(const smooth::Columns& regressors, std::span<const double> response,
                                 std::span<const double> points, const smooth::SmootherConfig& config, Exec exec) {
  const std::size_t dim = regressors.size();
  const std::size_t m = point_count(points, dim);
  std::vector<PointFit> out(m);
  for_each_index(m, exec, [&](std::size_t p) {
    try {
      out[p].fit = smooth::local_poly_fit(regressors, response, points.subspan(p * dim, dim), config);
    } catch (const Error&) {
      out[p].error = std::current_exception();
    }
  });
  return out;
}

std::vector<smooth::DensityResult> density_at_points(const smooth::Columns& columns, std::span<const double> points,
                                                     const smooth::SmootherConfig& config, Exec exec) {
  const std::size_t dim = columns.size();
  const std::size_t m = point_count(points, dim);
  std::vector<smooth::DensityResult> out(m);
  for_each_index(m, exec, [&](std::size_t p) {
    out[p] = smooth::conditional_density(columns, points.subspan(p * dim, dim), config);
  });
  return out;
}

CdfColumn conditional_cdf_at_rows(std::span<const double> treatment, const smooth::Columns& conditioning,
                                  const smooth::SmootherConfig& config, Exec exec) {
  const std::size_t n = treatment.size();
  const std::size_t dim = conditioning.size();
  CdfColumn out;
  out.values.assign(n, 0.5);
  out.no_support.assign(n, 0);
  for_each_index(n, exec, [&](std::size_t i) {
    std::vector<double> point(dim);
    for (std::size_t j = 0; j < dim; ++j) point[j] = conditioning[j][i];
    try {
      out.values[i] = smooth::conditional_cdf(treatment, conditioning, treatment[i], point, config);
    } catch (const NoSupportError&) {
      out.no_support[i] = 1;
    }
  });
  return out;
}

double loo_squared_error(const smooth::Columns& regressors, std::span<const double> response,
                         const smooth::SmootherConfig& config, Exec exec) {
  const std::size_t n = response.size();
  const std::size_t dim = regressors.size();
  std::vector<double> err(n);
  for_each_index(n, exec, [&](std::size_t i) {
    std::vector<double> point(dim);
    for (std::size_t j = 0; j < dim; ++j) point[j] = regressors[j][i];
    try {
      const double r = response[i] - smooth::local_poly_fit(regressors, response, point, config, i).mean;
      err[i] = r * r;
    } catch (const SingularFitError&) {
      err[i] = std::numeric_limits<double>::infinity();
    }
  });
  double total = 0.0;
  for (double e : err) total += e;
  return n > 0 ? total / static_cast<double>(n) : 0.0;
}

} // namespace endo::kernels
