#include "endo/errors.hpp"
#include "endo/estimators.hpp"
#include "endo/format.hpp"

#include <algorithm>
#include <cmath>

namespace endo::est {

using smooth::Columns;
using smooth::SmootherConfig;

namespace {

/// Bandwidths from the config, or selected from `cols` and scaled.
SmootherConfig resolve_bandwidths(const SmootherConfig& base, const Columns& cols, std::span<const double> response,
                                  const EstimatorConfig& cfg, double scale, bool need_derivative) {
  SmootherConfig s = base;
  if (s.bandwidths.empty()) {
    s.bandwidths = smooth::bandwidth_select(cols, cfg.bandwidth_method, response, std::max(s.degree, 1), s.kernel);
    for (double& h : s.bandwidths) h *= scale;
  }
  s.validate(cols.size(), need_derivative);
  return s;
}

/// Fills in the relative trim floor against the largest density over `cols`.
SmootherConfig with_floor(SmootherConfig s, const Columns& cols, const EstimatorConfig& cfg) {
  if (s.trim_density_floor <= 0.0 && cfg.trim_relative > 0.0) {
    s.trim_density_floor = cfg.trim_relative * smooth::reference_density(cols, s);
  }
  return s;
}

SmootherConfig second_stage(const Columns& cols, std::span<const double> response, const EstimatorConfig& cfg,
                            bool need_derivative) {
  return with_floor(resolve_bandwidths(cfg.smoother, cols, response, cfg, cfg.bandwidth_scale, need_derivative), cols,
                    cfg);
}

/// Rows whose D lies within cutoff * h of `center`; D is ascending in a DataView.
std::pair<std::size_t, std::size_t> d_window(std::span<const double> d, double center, double reach) {
  const auto lo = std::lower_bound(d.begin(), d.end(), center - reach);
  const auto hi = std::upper_bound(d.begin(), d.end(), center + reach);
  return {static_cast<std::size_t>(lo - d.begin()), static_cast<std::size_t>(hi - d.begin())};
}

double kish(double sum_w, double sum_w2) { return sum_w2 > 0.0 ? sum_w * sum_w / sum_w2 : 0.0; }

struct Averaged {
  double value = 0.0;
  double n_effective = 0.0;
  double trimmed_fraction = 0.0;
};

/// Weighted mean of fitted values (or derivatives) at `points`, skipping
/// failed and trimmed fits. Throws SupportError when nothing survives.
Averaged average_fits(const Columns& regressors, std::span<const double> response, const SmootherConfig& s,
                      const std::vector<double>& points, const std::vector<double>& weights, bool derivative,
                      const char* what) {
  const auto fits = kernels::fit_points(regressors, response, points, s);
  double num = 0.0, den = 0.0, den2 = 0.0, dropped = 0.0;
  for (std::size_t i = 0; i < fits.size(); ++i) {
    const double w = weights[i];
    if (!fits[i].ok() || fits[i].fit.trimmed) {
      dropped += w;
      continue;
    }
    num += w * (derivative ? *fits[i].fit.derivative_wrt_first : fits[i].fit.mean);
    den += w;
    den2 += w * w;
  }
  const double total = den + dropped;
  if (!(den > 0.0)) throw SupportError(std::string(what) + ": every evaluation point is trimmed", 1.0);
  return {num / den, kish(den, den2), total > 0.0 ? dropped / total : 0.0};
}

void require_continuous(const DataView& data, const char* what) {
  if (data.size() == 0) throw PreconditionError(std::string(what) + ": empty sample");
  if (data.binary_treatment()) throw WrongKindError(std::string(what) + " needs a continuous treatment");
}

void require_binary(const DataView& data, const char* what) {
  if (data.size() == 0) throw PreconditionError(std::string(what) + ": empty sample");
  if (!data.binary_treatment()) throw WrongKindError(std::string(what) + " needs a binary treatment");
}

void require_point(std::span<const double> x, const DataView& data, const char* what) {
  if (x.size() != data.num_controls()) {
    throw PreconditionError(std::string(what) + ": evaluation point has " + std::to_string(x.size()) +
                            " control values, data has " + std::to_string(data.num_controls()));
  }
}

void require_v(const DataView& data, const ControlVariableColumn& v) {
  if (v.v.size() != data.size()) {
    throw PreconditionError("control variable column does not match the sample (" + std::to_string(v.v.size()) +
                            " vs " + std::to_string(data.size()) + " rows)");
  }
}

Columns with_v(Columns cols, const ControlVariableColumn& v) {
  cols.emplace_back(v.v);
  return cols;
}

Columns d_and_controls(const DataView& data) {
  Columns cols{data.d()};
  for (const auto& c : data.controls()) cols.push_back(c);
  return cols;
}

void fill_meta(Estimate& e, const SmootherConfig& s) {
  e.bandwidths = s.bandwidths;
  e.trim_floor = s.trim_density_floor;
}

// ---- binary arms -----------------------------------------------------------

struct Arms {
  DataView treated;
  DataView control;
  SmootherConfig s1;
  SmootherConfig s0;
};

Arms split_arms(const DataView& data, const EstimatorConfig& cfg, bool need_both) {
  DataView treated = data.arm(1.0);
  DataView control = data.arm(0.0);
  if (need_both && (treated.size() == 0 || control.size() == 0)) {
    throw OverlapError(std::string("treatment arm D=") + (treated.size() == 0 ? "1" : "0") + " is empty", 1.0);
  }
  const Columns all = data.controls();
  const SmootherConfig base = resolve_bandwidths(cfg.smoother, all, data.y(), cfg, cfg.bandwidth_scale, false);
  const SmootherConfig s1 = treated.size() > 0 ? with_floor(base, treated.controls(), cfg) : base;
  const SmootherConfig s0 = control.size() > 0 ? with_floor(base, control.controls(), cfg) : base;
  return {std::move(treated), std::move(control), s1, s0};
}

/// Per-point fitted arm means; NaN marks a failed or trimmed fit.
std::vector<double> arm_means(const DataView& arm, const SmootherConfig& s, const std::vector<double>& points) {
  const std::size_t dim = arm.num_controls();
  std::vector<double> out(points.size() / dim, std::numeric_limits<double>::quiet_NaN());
  if (arm.size() == 0) return out;
  const auto fits = kernels::fit_points(arm.controls(), arm.y(), points, s);
  for (std::size_t i = 0; i < fits.size(); ++i) {
    if (fits[i].ok() && !fits[i].fit.trimmed) out[i] = fits[i].fit.mean;
  }
  return out;
}

std::vector<double> row_points(const DataView& rows) {
  const std::size_t k = rows.num_controls();
  std::vector<double> pts(rows.size() * k);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < k; ++j) pts[i * k + j] = rows.x(j)[i];
  }
  return pts;
}

/// Mean over `rows` of mu_1(X) - mu_0(X) (or of mu_arm(X) when `only_arm` is 0/1).
Estimate binary_average(const DataView& data, const DataView& rows, const EstimatorConfig& cfg, EstimatorId id,
                        int only_arm) {
  Arms arms = split_arms(data, cfg, only_arm < 0);
  if (rows.size() == 0) throw OverlapError("no rows in the target population", 1.0);
  const std::vector<double> pts = row_points(rows);
  std::vector<double> m1, m0;
  if (only_arm != 0) m1 = arm_means(arms.treated, arms.s1, pts);
  if (only_arm != 1) m0 = arm_means(arms.control, arms.s0, pts);
  if (only_arm == 1 && arms.treated.size() == 0) throw OverlapError("treatment arm D=1 is empty", 1.0);
  if (only_arm == 0 && arms.control.size() == 0) throw OverlapError("treatment arm D=0 is empty", 1.0);

  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double v = 0.0;
    if (only_arm == 1) v = m1[i];
    else if (only_arm == 0) v = m0[i];
    else v = m1[i] - m0[i];
    if (std::isnan(v)) continue;
    sum += v;
    ++used;
  }
  const double trimmed = 1.0 - static_cast<double>(used) / static_cast<double>(rows.size());
  if (used == 0) throw OverlapError("no row has local support in the required arms", 1.0);
  Estimate e;
  e.id = id;
  e.value = sum / static_cast<double>(used);
  e.n_effective = static_cast<double>(used);
  e.trimmed_fraction = trimmed;
  fill_meta(e, arms.s1);
  return e;
}

void check_trim_budget(const Estimate& e, const EstimatorConfig& cfg, const char* what) {
  if (e.trimmed_fraction > cfg.max_trimmed_fraction) {
    throw SupportError(std::string(what) + ": support overlap violated for " + format_double(e.trimmed_fraction) +
                         " of the target mass (limit " + format_double(cfg.max_trimmed_fraction) + ")",
                       e.trimmed_fraction);
  }
}

// ---- continuous counterfactual means -----------------------------------------

struct Regression {
  Columns regressors;
  SmootherConfig s;
};

Regression outcome_regression(const DataView& data, const EstimatorConfig& cfg, EffectMode mode,
                              const ControlVariableColumn* v, bool need_derivative) {
  Columns cols = d_and_controls(data);
  if (mode == EffectMode::triangular) {
    if (!v) throw PreconditionError("triangular mode needs a control variable column");
    require_v(data, *v);
    cols = with_v(cols, *v);
  }
  SmootherConfig s = second_stage(cols, data.y(), cfg, need_derivative);
  return {std::move(cols), std::move(s)};
}

/// Fitted E[Y | D=t, X_i (, V_i)] averaged over rows i with weights.
Averaged counterfactual_at(const DataView& data, const Regression& reg, double t, std::size_t first,
                           std::size_t last, const std::vector<double>& weights) {
  const std::size_t dim = reg.regressors.size();
  std::vector<double> pts((last - first) * dim);
  for (std::size_t i = first; i < last; ++i) {
    double* p = pts.data() + (i - first) * dim;
    p[0] = t;
    for (std::size_t j = 1; j < dim; ++j) p[j] = reg.regressors[j][i];
  }
  return average_fits(reg.regressors, data.y(), reg.s, pts, weights, false, "counterfactual mean");
}

struct Window {
  std::size_t first = 0;
  std::size_t last = 0;
  std::vector<double> weights;
};

Window kernel_window(std::span<const double> d, double center, const SmootherConfig& s, double cutoff) {
  const double h = s.bandwidths[0];
  const auto [first, last] = d_window(d, center, cutoff * h);
  Window w{first, last, {}};
  w.weights.reserve(last - first);
  for (std::size_t i = first; i < last; ++i) w.weights.push_back(smooth::kernel_weight((d[i] - center) / h, s.kernel));
  return w;
}

Window all_rows(std::size_t n) { return {0, n, std::vector<double>(n, 1.0)}; }

/// Local-linear slope in t of g(t) over the effect grid, at t = d.
Estimate grid_derivative(const DataView& data, double d, const EstimatorConfig& cfg,
                         const std::function<Averaged(double)>& g, const SmootherConfig& s, EstimatorId id) {
  const auto dcol = data.d();
  const std::size_t n = dcol.size();
  const std::size_t m = std::max<std::size_t>(cfg.effect_grid_points, 3);
  const double lo = dcol[static_cast<std::size_t>(0.05 * static_cast<double>(n - 1))];
  const double hi = dcol[static_cast<std::size_t>(0.95 * static_cast<double>(n - 1))];
  const double h = s.bandwidths[0];
  double sw = 0.0, st = 0.0, sg = 0.0, stt = 0.0, stg = 0.0, trim = 0.0, neff = 0.0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const double t = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(m - 1);
    if (std::abs(t - d) > cfg.window_cutoff * h) continue;
    Averaged a;
    try {
      a = g(t);
    } catch (const SupportError&) {
      continue;
    }
    const double w = smooth::kernel_weight((t - d) / h, s.kernel);
    if (!(w > 0.0)) continue;
    sw += w;
    st += w * t;
    sg += w * a.value;
    trim += a.trimmed_fraction;
    neff += a.n_effective;
    ++used;
    stt += w * t * t;
    stg += w * t * a.value;
  }
  if (used < 2) {
    throw SupportError("effect grid has " + std::to_string(used) + " usable points within reach of d = " +
                         format_double(d),
                       1.0);
  }
  const double tbar = st / sw, gbar = sg / sw;
  const double sxx = stt / sw - tbar * tbar;
  if (!(sxx > 0.0)) throw SupportError("effect grid is degenerate around d = " + format_double(d), 1.0);
  Estimate e;
  e.id = id;
  e.value = (stg / sw - tbar * gbar) / sxx;
  e.eval_d = d;
  e.n_effective = neff / static_cast<double>(used);
  e.trimmed_fraction = trim / static_cast<double>(used);
  fill_meta(e, s);
  return e;
}

} // namespace

Estimate iv_ratio(const DataView& data, double z, std::span<const double> x, const EstimatorConfig& config) {
  if (!data.has_instrument()) throw PreconditionError("iv_ratio needs an instrument column");
  require_point(x, data, "iv_ratio");
  Columns cols{data.z()};
  for (const auto& c : data.controls()) cols.push_back(c);
  const SmootherConfig s = second_stage(cols, data.y(), config, true);
  std::vector<double> point{z};
  point.insert(point.end(), x.begin(), x.end());

  const smooth::FitResult fy = smooth::local_poly_fit(cols, data.y(), point, s);
  if (fy.trimmed) throw SupportError("iv_ratio: (z, x) is outside the estimated support", fy.density);
  const smooth::FitResult fd = smooth::local_poly_fit(cols, data.d(), point, s);
  const double denom = *fd.derivative_wrt_first;
  if (!(std::abs(denom) >= config.denominator_floor)) {
    throw NearZeroDenominatorError("iv_ratio: first-stage derivative " + format_double(denom) + " is below the floor " +
                                     format_double(config.denominator_floor),
                                   denom);
  }
  Estimate e;
  e.id = EstimatorId::iv_ratio;
  e.value = *fy.derivative_wrt_first / denom;
  e.eval_d = z;
  e.eval_x.assign(x.begin(), x.end());
  e.n_effective = fy.effective_sample_size;
  fill_meta(e, s);
  return e;
}

Estimate clar_continuous(const DataView& data, double d, std::span<const double> x, const EstimatorConfig& config) {
  require_continuous(data, "clar_continuous");
  require_point(x, data, "clar_continuous");
  const Columns cols = d_and_controls(data);
  const SmootherConfig s = second_stage(cols, data.y(), config, true);
  std::vector<double> point{d};
  point.insert(point.end(), x.begin(), x.end());
  const smooth::FitResult fit = smooth::local_poly_fit(cols, data.y(), point, s);
  if (fit.trimmed) {
    throw SupportError("clar_continuous: density " + format_double(fit.density) + " at (d, x) is below the floor " +
                         format_double(s.trim_density_floor),
                       fit.density);
  }
  Estimate e;
  e.id = EstimatorId::clar_continuous;
  e.value = *fit.derivative_wrt_first;
  e.eval_d = d;
  e.eval_x.assign(x.begin(), x.end());
  e.n_effective = fit.effective_sample_size;
  fill_meta(e, s);
  return e;
}

Estimate lar_continuous(const DataView& data, double d, const EstimatorConfig& config) {
  require_continuous(data, "lar_continuous");
  const Regression reg = outcome_regression(data, config, EffectMode::conditional_independence, nullptr, true);
  const Window win = kernel_window(data.d(), d, reg.s, config.window_cutoff);
  if (win.first == win.last) throw SupportError("lar_continuous: no observations with D near d", 1.0);
  const std::size_t dim = reg.regressors.size();
  std::vector<double> pts((win.last - win.first) * dim);
  for (std::size_t i = win.first; i < win.last; ++i) {
    double* p = pts.data() + (i - win.first) * dim;
    p[0] = d;
    for (std::size_t j = 1; j < dim; ++j) p[j] = reg.regressors[j][i];
  }
  const Averaged a = average_fits(reg.regressors, data.y(), reg.s, pts, win.weights, true, "lar_continuous");
  Estimate e;
  e.id = EstimatorId::lar_continuous;
  e.value = a.value;
  e.eval_d = d;
  e.n_effective = a.n_effective;
  e.trimmed_fraction = a.trimmed_fraction;
  fill_meta(e, reg.s);
  return e;
}

Estimate clar_binary(const DataView& data, std::span<const double> x, const EstimatorConfig& config) {
  require_binary(data, "clar_binary");
  require_point(x, data, "clar_binary");
  Arms arms = split_arms(data, config, true);
  const auto fit_arm = [&](const DataView& arm, const SmootherConfig& s, int label) {
    smooth::FitResult f;
    try {
      f = smooth::local_poly_fit(arm.controls(), arm.y(), x, s);
    } catch (const SingularFitError& err) {
      throw OverlapError("clar_binary: arm D=" + std::to_string(label) + " has no local support at x (" +
                           err.what() + ")",
                         err.density());
    }
    if (f.trimmed) {
      throw OverlapError("clar_binary: arm D=" + std::to_string(label) + " density " + format_double(f.density) +
                           " at x is below the floor",
                         f.density);
    }
    return f;
  };
  const smooth::FitResult f1 = fit_arm(arms.treated, arms.s1, 1);
  const smooth::FitResult f0 = fit_arm(arms.control, arms.s0, 0);
  Estimate e;
  e.id = EstimatorId::clar_binary;
  e.value = f1.mean - f0.mean;
  e.eval_x.assign(x.begin(), x.end());
  e.n_effective = std::min(f1.effective_sample_size, f0.effective_sample_size);
  fill_meta(e, arms.s1);
  return e;
}

Estimate lar_binary(const DataView& data, int d, const EstimatorConfig& config) {
  require_binary(data, "lar_binary");
  if (d != 0 && d != 1) throw PreconditionError("lar_binary: d must be 0 or 1");
  Estimate e = binary_average(data, data.arm(static_cast<double>(d)), config, EstimatorId::lar_binary, -1);
  e.eval_d = d;
  return e;
}

ControlVariableColumn construct_control_variable(const DataView& data, const EstimatorConfig& config) {
  if (!data.has_instrument()) throw PreconditionError("construct_control_variable needs an instrument column");
  require_continuous(data, "construct_control_variable");
  Columns conditioning{data.z()};
  for (const auto& c : data.controls()) conditioning.push_back(c);
  SmootherConfig s = config.first_stage;
  if (s.bandwidths.empty()) {
    Columns all{data.d()};
    all.insert(all.end(), conditioning.begin(), conditioning.end());
    s.bandwidths = smooth::rule_of_thumb(all);
    for (double& h : s.bandwidths) h *= config.first_stage_scale;
  }
  s.degree = 0;
  s.validate(conditioning.size() + 1, false);
  const kernels::CdfColumn cdf = kernels::conditional_cdf_at_rows(data.d(), conditioning, s);
  return {cdf.values, cdf.no_support, s.bandwidths};
}

Estimate clar_triangular(const DataView& data, const ControlVariableColumn& v, double d, std::span<const double> x,
                         const EstimatorConfig& config) {
  require_continuous(data, "clar_triangular");
  require_point(x, data, "clar_triangular");
  require_v(data, v);
  const Regression reg = outcome_regression(data, config, EffectMode::triangular, &v, true);
  const std::size_t k = data.num_controls();

  // Support check on (D, X) at (d, x).
  SmootherConfig sdx = reg.s;
  sdx.bandwidths.resize(k + 1);
  sdx.trim_density_floor = 0.0;
  const Columns dx = d_and_controls(data);
  sdx = with_floor(sdx, dx, config);
  std::vector<double> dx_point{d};
  dx_point.insert(dx_point.end(), x.begin(), x.end());
  const smooth::DensityResult dens = smooth::conditional_density(dx, dx_point, sdx);
  if (dens.trimmed) {
    throw SupportError("clar_triangular: density " + format_double(dens.density) + " at (d, x) is below the floor",
                       dens.density);
  }

  // Rows near (d, x) supply the conditional law of V.
  const double reach = config.window_cutoff;
  const auto [first, last] = d_window(data.d(), d, reach * sdx.bandwidths[0]);
  std::vector<double> pts, weights;
  for (std::size_t i = first; i < last; ++i) {
    double w = smooth::kernel_weight((data.d()[i] - d) / sdx.bandwidths[0], sdx.kernel);
    for (std::size_t j = 0; j < k && w > 0.0; ++j) {
      const double u = (data.x(j)[i] - x[j]) / sdx.bandwidths[j + 1];
      w = std::abs(u) > reach ? 0.0 : w * smooth::kernel_weight(u, sdx.kernel);
    }
    if (!(w > 0.0)) continue;
    weights.push_back(w);
    pts.push_back(d);
    pts.insert(pts.end(), x.begin(), x.end());
    pts.push_back(v.v[i]);
  }
  if (weights.empty()) throw SupportError("clar_triangular: no observations near (d, x)", 0.0);
  const Averaged a = average_fits(reg.regressors, data.y(), reg.s, pts, weights, true, "clar_triangular");
  Estimate e;
  e.id = EstimatorId::clar_triangular;
  e.value = a.value;
  e.eval_d = d;
  e.eval_x.assign(x.begin(), x.end());
  e.n_effective = a.n_effective;
  e.trimmed_fraction = a.trimmed_fraction;
  fill_meta(e, reg.s);
  return e;
}

Estimate lar_triangular(const DataView& data, const ControlVariableColumn& v, double d,
                        const EstimatorConfig& config) {
  require_continuous(data, "lar_triangular");
  require_v(data, v);
  const Regression reg = outcome_regression(data, config, EffectMode::triangular, &v, true);
  const Window win = kernel_window(data.d(), d, reg.s, config.window_cutoff);
  if (win.first == win.last) throw SupportError("lar_triangular: no observations with D near d", 1.0);
  const std::size_t dim = reg.regressors.size();
  std::vector<double> pts((win.last - win.first) * dim);
  for (std::size_t i = win.first; i < win.last; ++i) {
    double* p = pts.data() + (i - win.first) * dim;
    p[0] = d;
    for (std::size_t j = 1; j < dim; ++j) p[j] = reg.regressors[j][i];
  }
  const Averaged a = average_fits(reg.regressors, data.y(), reg.s, pts, win.weights, true, "lar_triangular");
  Estimate e;
  e.id = EstimatorId::lar_triangular;
  e.value = a.value;
  e.eval_d = d;
  e.n_effective = a.n_effective;
  e.trimmed_fraction = a.trimmed_fraction;
  fill_meta(e, reg.s);
  return e;
}

Estimate counterfactual_mean(const DataView& data, double d, double d_tilde, const EstimatorConfig& config,
                             EffectMode mode, const ControlVariableColumn* v) {
  if (data.size() == 0) throw PreconditionError("counterfactual_mean: empty sample");
  Estimate e;
  if (data.binary_treatment()) {
    if (mode == EffectMode::triangular) throw PreconditionError("triangular mode needs a continuous treatment");
    if ((d != 0.0 && d != 1.0) || (d_tilde != 0.0 && d_tilde != 1.0)) {
      throw PreconditionError("counterfactual_mean: binary treatment needs d and d_tilde in {0, 1}");
    }
    e = binary_average(data, data.arm(d_tilde), config, EstimatorId::counterfactual_mean, static_cast<int>(d));
  } else {
    const Regression reg = outcome_regression(data, config, mode, v, false);
    const Window win = kernel_window(data.d(), d_tilde, reg.s, config.window_cutoff);
    if (win.first == win.last) throw SupportError("counterfactual_mean: no observations with D near d_tilde", 1.0);
    const Averaged a = counterfactual_at(data, reg, d, win.first, win.last, win.weights);
    e.id = EstimatorId::counterfactual_mean;
    e.value = a.value;
    e.n_effective = a.n_effective;
    e.trimmed_fraction = a.trimmed_fraction;
    fill_meta(e, reg.s);
  }
  e.eval_d = d;
  check_trim_budget(e, config, "counterfactual_mean");
  return e;
}

Estimate att(const DataView& data, double d, double d_tilde, const EstimatorConfig& config, EffectMode mode,
             const ControlVariableColumn* v) {
  if (data.size() == 0) throw PreconditionError("att: empty sample");
  if (data.binary_treatment()) {
    if (mode == EffectMode::triangular) throw PreconditionError("triangular mode needs a continuous treatment");
    Estimate e = binary_average(data, data.arm(1.0), config, EstimatorId::att, -1);
    check_trim_budget(e, config, "att");
    return e;
  }
  const Regression reg = outcome_regression(data, config, mode, v, false);
  const Window win = kernel_window(data.d(), d_tilde, reg.s, config.window_cutoff);
  if (win.first == win.last) throw SupportError("att: no observations with D near d_tilde", 1.0);
  Estimate e = grid_derivative(
    data, d, config, [&](double t) { return counterfactual_at(data, reg, t, win.first, win.last, win.weights); },
    reg.s, EstimatorId::att);
  check_trim_budget(e, config, "att");
  return e;
}

Estimate ate(const DataView& data, double d, const EstimatorConfig& config, EffectMode mode,
             const ControlVariableColumn* v) {
  if (data.size() == 0) throw PreconditionError("ate: empty sample");
  if (data.binary_treatment()) {
    if (mode == EffectMode::triangular) throw PreconditionError("triangular mode needs a continuous treatment");
    Estimate e = binary_average(data, data, config, EstimatorId::ate, -1);
    check_trim_budget(e, config, "ate");
    return e;
  }
  const Regression reg = outcome_regression(data, config, mode, v, false);
  const Window win = all_rows(data.size());
  Estimate e = grid_derivative(
    data, d, config, [&](double t) { return counterfactual_at(data, reg, t, win.first, win.last, win.weights); },
    reg.s, EstimatorId::ate);
  check_trim_budget(e, config, "ate");
  return e;
}

} // namespace endo::est
