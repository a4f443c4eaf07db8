#pragma once

#include "endo/dataset.hpp"
#include "endo/rng.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace testutil {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

inline std::vector<double> normals(std::size_t n, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

/// Y = a + tau D + b X (+ noise), D = X + U, Z independent and D = Z + X + U when with_z.
inline endo::DataSet linear_data(std::size_t n, std::uint64_t seed, double tau, double noise, bool with_z) {
  std::mt19937_64 rng(seed);
  const auto x = normals(n, rng), u = normals(n, rng), e = normals(n, rng), z = normals(n, rng);
  endo::DataSet ds;
  ds.x = {std::vector<double>(n)};
  ds.d.resize(n);
  ds.y.resize(n);
  if (with_z) ds.z = std::vector<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.x[0][i] = x[i];
    ds.d[i] = x[i] + u[i] + (with_z ? z[i] : 0.0);
    if (with_z) (*ds.z)[i] = z[i];
    ds.y[i] = 0.5 + tau * ds.d[i] + 1.5 * x[i] + noise * e[i];
  }
  return ds;
}

} // namespace testutil
