#include "endo/diagnostics.hpp"

#include "endo/errors.hpp"
#include "endo/format.hpp"
#include "endo/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace endo::diag {

namespace {

double variance(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / n;
}

/// Kernel-weighted residual variance of a local quadratic fit of D on X at x.
double local_residual_variance(const smooth::Columns& x, std::span<const double> d, std::span<const double> point,
                               const smooth::SmootherConfig& s) {
  const smooth::LocalPolynomial lp = smooth::local_poly_coefficients(x, d, point, s);
  const std::size_t dim = x.size();
  std::vector<double> u(dim);
  double wsum = 0.0, rsum = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double w = 1.0;
    for (std::size_t j = 0; j < dim && w > 0.0; ++j) {
      u[j] = (x[j][i] - point[j]) / s.bandwidths[j];
      w *= smooth::kernel_weight(u[j], s.kernel);
    }
    if (!(w > 0.0)) continue;
    const double r = d[i] - lp.evaluate(u);
    wsum += w;
    rsum += w * r * r;
  }
  return wsum > 0.0 ? rsum / wsum : std::numeric_limits<double>::quiet_NaN();
}

} // namespace

const char* to_string(Verdict v) {
  switch (v) {
  case Verdict::pass: return "pass";
  case Verdict::warn: return "warn";
  case Verdict::fail: return "fail";
  }
  return "?";
}

nlohmann::ordered_json DiagnosticReport::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["statistic"] = std::isfinite(statistic) ? nlohmann::ordered_json(statistic) : nlohmann::ordered_json(nullptr);
  j["threshold"] = threshold;
  j["verdict"] = to_string(verdict);
  j["details"] = details;
  return j;
}

std::string DiagnosticReport::to_text() const {
  std::string out = name + ": " + to_string(verdict) + " (statistic " +
                    (std::isfinite(statistic) ? format_double(statistic) : std::string("n/a")) + ", threshold " +
                    format_double(threshold) + ")";
  if (!details.empty()) out += "\n  " + details;
  return out;
}

DiagnosticReport separability_check(const DataView& data, const SeparabilityConfig& config) {
  DiagnosticReport r;
  r.name = "separability_check";
  r.threshold = config.threshold;
  if (data.binary_treatment()) {
    r.statistic = std::numeric_limits<double>::quiet_NaN();
    r.verdict = Verdict::warn;
    r.details = "not applicable: binary treatment needs no residual variation condition";
    return r;
  }
  const std::size_t n = data.size();
  const smooth::Columns x = data.controls();
  const auto d = data.d();
  if (n < 3) {
    r.statistic = std::numeric_limits<double>::quiet_NaN();
    r.verdict = Verdict::warn;
    r.details = "insufficient data: " + std::to_string(n) + " rows";
    return r;
  }
  const double var_d = variance(d);
  if (!(var_d > 0.0)) {
    r.statistic = 0.0;
    r.verdict = Verdict::fail;
    r.details = "treatment has no variation";
    return r;
  }

  smooth::SmootherConfig s = config.smoother;
  s.degree = 2;
  if (s.bandwidths.empty()) s.bandwidths = smooth::rule_of_thumb(x);
  s.validate(x.size(), false);
  s.trim_density_floor = config.trim_relative * smooth::reference_density(x, s);

  // Grid: quantiles of X for one control, evenly spaced rows otherwise.
  const std::size_t k = x.size();
  const std::size_t g = std::max<std::size_t>(config.grid_points, 1);
  std::vector<double> grid(g * k);
  if (k == 1) {
    std::vector<double> sorted(x[0].begin(), x[0].end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t p = 0; p < g; ++p) {
      const double q = g == 1 ? 0.5 : 0.05 + 0.9 * static_cast<double>(p) / static_cast<double>(g - 1);
      grid[p] = sorted[static_cast<std::size_t>(q * static_cast<double>(n - 1))];
    }
  } else {
    for (std::size_t p = 0; p < g; ++p) {
      const std::size_t row = std::min(n - 1, (2 * p + 1) * n / (2 * g));
      for (std::size_t j = 0; j < k; ++j) grid[p * k + j] = x[j][row];
    }
  }

  std::vector<double> ratio(g, std::numeric_limits<double>::quiet_NaN());
  kernels::for_each_index(g, kernels::Exec::parallel, [&](std::size_t p) {
    const std::span<const double> point(grid.data() + p * k, k);
    if (smooth::conditional_density(x, point, s).trimmed) return;
    try {
      ratio[p] = local_residual_variance(x, d, point, s) / var_d;
    } catch (const SingularFitError&) {
    }
  });
  double best = std::numeric_limits<double>::infinity();
  std::size_t used = 0, arg = 0;
  for (std::size_t p = 0; p < g; ++p) {
    if (std::isnan(ratio[p])) continue;
    ++used;
    if (ratio[p] < best) {
      best = ratio[p];
      arg = p;
    }
  }
  if (used == 0) {
    r.statistic = std::numeric_limits<double>::quiet_NaN();
    r.verdict = Verdict::warn;
    r.details = "no grid point has enough support";
    return r;
  }
  r.statistic = best;
  r.verdict = best < config.threshold ? Verdict::fail : Verdict::pass;
  std::string at;
  for (std::size_t j = 0; j < k; ++j) at += (j ? ", " : "") + format_double(grid[arg * k + j]);
  r.details = "minimum residual variance share at x = (" + at + ") over " + std::to_string(used) + " grid points";
  if (n < config.min_rows) {
    r.verdict = Verdict::warn;
    r.details = "insufficient data (" + std::to_string(n) + " rows < " + std::to_string(config.min_rows) + "); " +
                r.details;
  }
  return r;
}

DiagnosticReport support_overlap(const DataView& data, double d, double d_tilde, const OverlapConfig& config) {
  DiagnosticReport r;
  r.name = "support_overlap";
  r.threshold = config.threshold;
  const std::size_t k = data.num_controls();

  // Reference population (D = d) and target population (D = d_tilde).
  smooth::Columns ref_cols;
  std::vector<double> ref_weights;
  std::vector<double> target_points, target_weights;
  smooth::SmootherConfig s = config.smoother;
  s.degree = 0;
  DataView ref_arm = data;
  if (data.binary_treatment()) {
    ref_arm = data.arm(d);
    const DataView target = data.arm(d_tilde);
    if (ref_arm.size() == 0 || target.size() == 0) {
      throw NoSupportError("support_overlap: the D = " + format_double(ref_arm.size() == 0 ? d : d_tilde) +
                           " population is empty");
    }
    if (s.bandwidths.empty()) s.bandwidths = smooth::rule_of_thumb(data.controls());
    s.validate(k, false);
    ref_cols = ref_arm.controls();
    for (std::size_t i = 0; i < target.size(); ++i) {
      for (std::size_t j = 0; j < k; ++j) target_points.push_back(target.x(j)[i]);
      target_weights.push_back(1.0);
    }
  } else {
    smooth::Columns all{data.d()};
    for (const auto& c : data.controls()) all.push_back(c);
    if (s.bandwidths.empty()) s.bandwidths = smooth::rule_of_thumb(all);
    s.validate(k + 1, false);
    const double h_d = s.bandwidths[0];
    const auto dd = data.d();
    ref_cols = data.controls();
    ref_weights.resize(data.size());
    double ref_mass = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double u = (dd[i] - d) / h_d;
      ref_weights[i] = std::abs(u) <= config.window_cutoff ? smooth::kernel_weight(u, s.kernel) : 0.0;
      ref_mass += ref_weights[i];
      const double ut = (dd[i] - d_tilde) / h_d;
      if (std::abs(ut) <= config.window_cutoff) {
        for (std::size_t j = 0; j < k; ++j) target_points.push_back(data.x(j)[i]);
        target_weights.push_back(smooth::kernel_weight(ut, s.kernel));
      }
    }
    if (!(ref_mass > 0.0) || target_weights.empty()) {
      throw NoSupportError("support_overlap: no observations with D near " +
                           format_double(ref_mass > 0.0 ? d_tilde : d));
    }
    s.bandwidths.erase(s.bandwidths.begin());
  }

  // Floor relative to the largest density of X | D = d over its own rows.
  double max_density = 0.0;
  {
    const std::size_t n_ref = ref_cols[0].size();
    const std::size_t m = std::min<std::size_t>(n_ref, 200);
    std::vector<double> pt(k);
    for (std::size_t q = 0; q < m; ++q) {
      const std::size_t i = q * n_ref / m;
      if (!ref_weights.empty() && ref_weights[i] == 0.0) continue;
      for (std::size_t j = 0; j < k; ++j) pt[j] = ref_cols[j][i];
      max_density = std::max(max_density, smooth::conditional_density(ref_cols, pt, s, ref_weights).density);
    }
  }
  s.trim_density_floor = config.trim_relative * max_density;

  const std::size_t m = target_weights.size();
  std::vector<char> below(m, 0);
  kernels::for_each_index(m, kernels::Exec::parallel, [&](std::size_t i) {
    const std::span<const double> pt(target_points.data() + i * k, k);
    below[i] = smooth::conditional_density(ref_cols, pt, s, ref_weights).density < s.trim_density_floor ? 1 : 0;
  });
  double bad = 0.0, total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    total += target_weights[i];
    if (below[i]) bad += target_weights[i];
  }
  r.statistic = bad / total;
  r.verdict = r.statistic > config.threshold ? Verdict::fail : Verdict::pass;
  r.details = "share of the D = " + format_double(d_tilde) + " population outside the estimated support of X | D = " +
              format_double(d) + " (floor " + format_double(s.trim_density_floor) + ")";
  return r;
}

double ks_uniform(std::span<const double> v) {
  if (v.empty()) throw PreconditionError("ks_uniform: empty column");
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double stat = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = std::clamp(sorted[i], 0.0, 1.0);
    stat = std::max({stat, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return stat;
}

DiagnosticReport cv_uniformity(std::span<const double> v, double threshold) {
  DiagnosticReport r;
  r.name = "cv_uniformity";
  r.threshold = threshold;
  r.statistic = ks_uniform(v);
  r.verdict = r.statistic < threshold ? Verdict::pass : Verdict::fail;
  r.details = "Kolmogorov-Smirnov distance to Uniform(0, 1) over " + std::to_string(v.size()) + " values";
  return r;
}

} // namespace endo::diag
