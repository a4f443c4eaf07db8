#pragma once

#include "endo/dataset.hpp"
#include "endo/smoothers.hpp"

#include <json.hpp>

#include <span>
#include <string>

namespace endo::diag {

enum class Verdict { pass, warn, fail };
const char* to_string(Verdict v);

struct DiagnosticReport {
  std::string name;
  double statistic = 0.0;
  double threshold = 0.0;
  Verdict verdict = Verdict::pass;
  std::string details;

  nlohmann::ordered_json to_json() const;
  std::string to_text() const;
};

struct SeparabilityConfig {
  /// Fail when min Var(D|X=x)/Var(D) over the grid is below this.
  double threshold = 0.01;
  /// Fewer rows than this give a warn verdict.
  std::size_t min_rows = 100;
  std::size_t grid_points = 19;
  /// Grid points whose X density is below trim_relative * max are skipped.
  double trim_relative = 1e-3;
  /// Bandwidths over X; empty means rule of thumb. Degree is forced to 2.
  smooth::SmootherConfig smoother;
};

/// Screens for residual variation of D given X: the statistic is the minimum
/// over a grid of local-quadratic residual variances of D given X=x, divided
/// by Var(D). A heuristic necessary condition, not a test.
DiagnosticReport separability_check(const DataView& data, const SeparabilityConfig& config = {});

struct OverlapConfig {
  /// Fail when the violating share exceeds this.
  double threshold = 0.10;
  /// Density floor relative to the largest estimated density of X | D = d.
  double trim_relative = 0.01;
  /// Bandwidths over (D, X) for continuous D, over X for binary D; empty means rule of thumb.
  smooth::SmootherConfig smoother;
  double window_cutoff = 1.0;
};

/// Share of the D = d_tilde population whose X falls where the estimated
/// density of X given D = d is below the floor.
DiagnosticReport support_overlap(const DataView& data, double d, double d_tilde, const OverlapConfig& config = {});

/// Kolmogorov-Smirnov distance between the values and Uniform(0, 1).
double ks_uniform(std::span<const double> v);

/// Passes when ks_uniform(v) is below `threshold`.
DiagnosticReport cv_uniformity(std::span<const double> v, double threshold = 0.05);

} // namespace endo::diag
