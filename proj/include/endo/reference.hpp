#pragma once

// Single-threaded counterparts of the batch kernels, kept as the baseline
// for equivalence tests and benchmarks.

#include "endo/kernels.hpp"

namespace endo::reference {

inline std::vector<kernels::PointFit> fit_points(const smooth::Columns& regressors, std::span<const double> response,
                                                 std::span<const double> points,
                                                 const smooth::SmootherConfig& config) {
  return kernels::fit_points(regressors, response, points, config, kernels::Exec::serial);
}

inline std::vector<smooth::DensityResult> density_at_points(const smooth::Columns& columns,
                                                            std::span<const double> points,
                                                            const smooth::SmootherConfig& config) {
  return kernels::density_at_points(columns, points, config, kernels::Exec::serial);
}

inline kernels::CdfColumn conditional_cdf_at_rows(std::span<const double> treatment,
                                                  const smooth::Columns& conditioning,
                                                  const smooth::SmootherConfig& config) {
  return kernels::conditional_cdf_at_rows(treatment, conditioning, config, kernels::Exec::serial);
}

inline double loo_squared_error(const smooth::Columns& regressors, std::span<const double> response,
                                const smooth::SmootherConfig& config) {
  return kernels::loo_squared_error(regressors, response, config, kernels::Exec::serial);
}

} // namespace endo::reference
