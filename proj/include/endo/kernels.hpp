#pragma once

// Batch evaluators over many evaluation points or rows. Each output is
// computed by one serial call, so the parallel and serial paths agree bit
// for bit; only the assignment of outputs to threads differs.

#include "endo/parallel.hpp"
#include "endo/smoothers.hpp"

#include <cstddef>
#include <exception>
#include <span>
#include <vector>

namespace endo::kernels {

enum class Exec { serial, parallel };

/// Runs f(i) for i in [0, n). Exceptions are captured per index and the one
/// with the lowest index is rethrown after the loop.
template <class F>
void for_each_index(std::size_t n, Exec exec, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  const auto body = [&](std::size_t i) {
    try {
      f(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (exec == Exec::parallel && n > 1 && !parallel::in_parallel_region()) {
    const long long count = static_cast<long long>(n);
    ENDO_OMP(parallel for schedule(dynamic, 4))
    for (long long i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// A fit that may have failed; failures are kept rather than thrown.
struct PointFit {
  smooth::FitResult fit;
  std::exception_ptr error;
  bool ok() const noexcept { return !error; }
};

/// Points are stored row-major: point p occupies [p*dim, (p+1)*dim).
std::vector<PointFit> fit_points(const smooth::Columns& regressors, std::span<const double> response,
                                 std::span<const double> points, const smooth::SmootherConfig& config,
                                 Exec exec = Exec::parallel);

std::vector<smooth::DensityResult> density_at_points(const smooth::Columns& columns, std::span<const double> points,
                                                     const smooth::SmootherConfig& config,
                                                     Exec exec = Exec::parallel);

struct CdfColumn {
  std::vector<double> values;
  std::vector<char> no_support;
};

/// Smoothed conditional CDF of each row's own treatment value given its own
/// conditioning values.
CdfColumn conditional_cdf_at_rows(std::span<const double> treatment, const smooth::Columns& conditioning,
                                  const smooth::SmootherConfig& config, Exec exec = Exec::parallel);

/// Mean leave-one-out squared prediction error. Rows whose fit is singular
/// make the result +inf.
double loo_squared_error(const smooth::Columns& regressors, std::span<const double> response,
                         const smooth::SmootherConfig& config, Exec exec = Exec::parallel);

} // namespace endo::kernels
